"""Independent reference implementations used as test oracles.

Written with plain Python loops and no numpy vectorization, so they share no
code path with the package.
"""

import math
import random


def pair_list(n, mode):
    if mode == "neighbor":
        return [(k, k + 1) for k in range(n - 1)]
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def brute_ratio(trajectories, mode):
    """Mean per-subject share of violating pairs over subjects with >= 2 visits."""
    per_subject = []
    for scores in trajectories:
        if len(scores) < 2:
            continue
        pairs = pair_list(len(scores), mode)
        bad = 0
        for i, j in pairs:
            if scores[j] < scores[i]:
                bad += 1
        per_subject.append(bad / len(pairs))
    return sum(per_subject) / len(per_subject) if per_subject else 0.0


def brute_gap(trajectories, mode):
    per_subject = []
    for scores in trajectories:
        if len(scores) < 2:
            continue
        pairs = pair_list(len(scores), mode)
        biggest = max(scores[i] - scores[j] for i, j in pairs)
        if biggest <= 0:
            per_subject.append(0.0)
            continue
        total = 0.0
        for i, j in pairs:
            if scores[j] < scores[i]:
                total += scores[i] - scores[j]
        per_subject.append(total / biggest)
    return sum(per_subject) / len(per_subject) if per_subject else 0.0


def random_trajectories(rng: random.Random, n_subjects, max_visits=8, tie_prob=0.2):
    """Lists of scores; some values repeat so ties get exercised."""
    out = []
    for _ in range(n_subjects):
        k = rng.randint(1, max_visits)
        scores = []
        for _ in range(k):
            if scores and rng.random() < tie_prob:
                scores.append(rng.choice(scores))
            else:
                scores.append(round(rng.gauss(0.0, 1.0), rng.choice([1, 3, 12])))
        out.append(scores)
    return out


def pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)
