"""Risk scores whose within-subject trajectories respect irreversible progression.

A multilayer perceptron ``f(x) = w . g(x) + b`` is trained with a cosine
regularizer that aligns within-subject embedding displacements with the
classifier direction ``w``, and evaluated by how often each subject's score
sequence decreases over time.
"""

__version__ = "0.1.0"
