"""Classification loss plus trajectory-monotonicity regularizers.

The regularizers reward embedding displacements between a subject's visits
that point along the final-layer weight vector ``w``. For a visit pair (k1, k2)
with ``k1`` earlier, the pair score is the cosine between ``w`` and
``g(x_k2) - g(x_k1)``; a positive cosine means the later visit scores higher.

* neighbor mode: consecutive visits only, unit weight per pair.
* complete mode: every ordered pair, weighted by the elapsed years between them.

The per-subject sums are negated (so minimizing rewards alignment) and
averaged over the subjects of a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import net
from .cohort import Cohort
from .errors import ContractError

DEFAULT_EPS = 1e-12
REG_MODES = ("neighbor", "complete")
WEIGHTINGS = ("years", "mean1", "unit")


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(logits, labels):
    """Mean binary cross-entropy on logits.

    Returns:
        (loss, dloss/dlogit) with the gradient already divided by n.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.ndim != 1 or z.shape != y.shape:
        raise ContractError(f"logits {z.shape} and labels {y.shape} must be aligned vectors")
    if z.size == 0:
        raise ContractError("bce_loss needs at least one logit")
    n = z.size
    # log(1 + e^z) - y z, evaluated without overflow
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return loss, (sigmoid(z) - y) / n


@dataclass(frozen=True, eq=False)
class CosineTerm:
    value: float
    grad_w: np.ndarray
    grad_g1: np.ndarray
    grad_g2: np.ndarray
    degenerate: bool = False


def cosine_term(w, g1, g2, eps: float = DEFAULT_EPS) -> CosineTerm:
    """Cosine between ``w`` and ``g2 - g1`` with its analytic gradients."""
    w = np.asarray(w, dtype=np.float64)
    delta = np.asarray(g2, dtype=np.float64) - np.asarray(g1, dtype=np.float64)
    nw = np.linalg.norm(w)
    if not nw > eps:
        raise ContractError(f"|w| = {nw:g} is not above eps = {eps:g}")
    nd = np.linalg.norm(delta)
    if not nd > eps:
        zero = np.zeros_like(w)
        return CosineTerm(0.0, zero, zero.copy(), zero.copy(), degenerate=True)
    value = float(w @ delta) / (nw * nd)
    grad_w = delta / (nw * nd) - value * w / (nw * nw)
    grad_delta = w / (nw * nd) - value * delta / (nd * nd)
    return CosineTerm(value, grad_w, -grad_delta, grad_delta)


@dataclass(frozen=True, eq=False)
class RegTerm:
    """One subject's regularizer value with gradients on its embeddings and on w."""

    value: float
    grad_embeddings: np.ndarray
    grad_w: np.ndarray
    n_degenerate: int = 0


def _pair_reg(embeddings, w, pairs, weights, eps) -> RegTerm:
    G = np.asarray(embeddings, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    grad_g = np.zeros_like(G)
    grad_w = np.zeros_like(w)
    value = 0.0
    n_degenerate = 0
    for (k1, k2), weight in zip(pairs, weights):
        term = cosine_term(w, G[k1], G[k2], eps)
        n_degenerate += term.degenerate
        value -= weight * term.value
        grad_w -= weight * term.grad_w
        grad_g[k1] -= weight * term.grad_g1
        grad_g[k2] -= weight * term.grad_g2
    return RegTerm(value, grad_g, grad_w, n_degenerate)


def neighbor_reg(embeddings, w, eps: float = DEFAULT_EPS) -> RegTerm:
    """Negated sum of cosines over consecutive visits of one subject.

    Args:
        embeddings: (K, p) embeddings of the subject's visits in age order.
    """
    G = np.asarray(embeddings, dtype=np.float64).reshape(len(embeddings), -1)
    K = G.shape[0]
    pairs = [(k, k + 1) for k in range(K - 1)]
    return _pair_reg(G, w, pairs, [1.0] * len(pairs), eps)


def pair_weights(ages, pairs, weighting: str = "years") -> np.ndarray:
    ages = np.asarray(ages, dtype=np.float64)
    if weighting not in WEIGHTINGS:
        raise ContractError(f"unknown pair weighting {weighting!r}")
    if not pairs:
        return np.zeros(0)
    if weighting == "unit":
        return np.ones(len(pairs))
    weights = np.array([ages[k2] - ages[k1] for k1, k2 in pairs])
    if weighting == "mean1":
        weights = weights / weights.mean()
    return weights


def complete_reg(embeddings, ages, w, eps: float = DEFAULT_EPS, weighting: str = "years") -> RegTerm:
    """Negated, time-weighted sum of cosines over all visit pairs of one subject."""
    G = np.asarray(embeddings, dtype=np.float64).reshape(len(embeddings), -1)
    ages = np.asarray(ages, dtype=np.float64)
    if ages.shape != (G.shape[0],):
        raise ContractError("one age per embedding is required")
    if np.any(np.diff(ages) <= 0):
        raise ContractError("ages must be strictly increasing within a subject")
    K = G.shape[0]
    pairs = [(k1, k2) for k1 in range(K) for k2 in range(k1 + 1, K)]
    return _pair_reg(G, w, pairs, pair_weights(ages, pairs, weighting), eps)


# ---------------------------------------------------------------------------
# Batched objective
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairSet:
    """Flattened visit pairs of a batch: row indices into the stacked visits."""

    first: np.ndarray
    second: np.ndarray
    weight: np.ndarray


def build_pairs(offsets, ages, mode: str, weighting: str = "years") -> PairSet:
    if mode not in REG_MODES:
        raise ContractError(f"unknown regularizer mode {mode!r}")
    ages = np.asarray(ages, dtype=np.float64)
    first, second, weight = [], [], []
    for start, stop in zip(offsets[:-1], offsets[1:]):
        K = stop - start
        if K < 2:
            continue
        if mode == "neighbor":
            local = [(k, k + 1) for k in range(K - 1)]
            w_local = np.ones(len(local))
        else:
            sub_ages = ages[start:stop]
            if np.any(np.diff(sub_ages) <= 0):
                raise ContractError("ages must be strictly increasing within a subject")
            local = [(k1, k2) for k1 in range(K) for k2 in range(k1 + 1, K)]
            w_local = pair_weights(sub_ages, local, weighting)
        first.extend(start + k1 for k1, _ in local)
        second.extend(start + k2 for _, k2 in local)
        weight.extend(w_local)
    return PairSet(
        np.array(first, dtype=np.intp), np.array(second, dtype=np.intp), np.array(weight, dtype=np.float64)
    )


@dataclass(eq=False)
class SubjectBatch:
    """Visits of whole subjects stacked row-wise, ready for a training step."""

    features: np.ndarray
    labels: np.ndarray
    ages: np.ndarray
    offsets: np.ndarray
    _pairs: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_cohort(cls, cohort: Cohort) -> "SubjectBatch":
        labels = cohort.labels()
        if labels is None:
            raise ContractError("training needs binary labels; run select_task first")
        return cls(cohort.features(), labels, cohort.ages(), cohort.offsets())

    @property
    def n_subjects(self) -> int:
        return len(self.offsets) - 1

    def take(self, subject_indices) -> "SubjectBatch":
        """Sub-batch of whole subjects, in the given order."""
        rows = [np.arange(self.offsets[i], self.offsets[i + 1]) for i in subject_indices]
        sizes = [len(r) for r in rows]
        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.intp)
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.intp)
        return SubjectBatch(self.features[rows], self.labels[rows], self.ages[rows], offsets)

    def pairs(self, mode: str, weighting: str = "years") -> PairSet:
        key = (mode, weighting)
        if key not in self._pairs:
            self._pairs[key] = build_pairs(self.offsets, self.ages, mode, weighting)
        return self._pairs[key]


def batch_regularizer(embeddings, w, pairs: PairSet, n_subjects: int, eps: float = DEFAULT_EPS):
    """Vectorized mean-over-subjects regularizer for a whole batch.

    Returns:
        (value, grad wrt embeddings (n, p), grad wrt w (p,), n_degenerate)
    """
    G = np.asarray(embeddings, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    grad_g = np.zeros_like(G)
    grad_w = np.zeros_like(w)
    if pairs.first.size == 0:
        return 0.0, grad_g, grad_w, 0
    nw = np.linalg.norm(w)
    if not nw > eps:
        raise ContractError(f"|w| = {nw:g} is not above eps = {eps:g}")
    D = G[pairs.second] - G[pairs.first]
    nd = np.linalg.norm(D, axis=1)
    ok = nd > eps
    safe = np.where(ok, nd, 1.0)
    cos = np.where(ok, (D @ w) / (nw * safe), 0.0)
    scale = pairs.weight * ok / n_subjects
    value = -float(np.sum(pairs.weight * cos)) / n_subjects

    # d(-sum scale*cos)/dD = -scale * (w/(|w||D|) - cos*D/|D|^2)
    coef = (scale / (nw * safe))[:, None]
    dD = -(coef * w[None, :] - (scale * cos / (safe * safe))[:, None] * D)
    np.add.at(grad_g, pairs.second, dD)
    np.add.at(grad_g, pairs.first, -dD)
    grad_w = -((scale / (nw * safe)) @ D) + float(np.sum(scale * cos)) * w / (nw * nw)
    return value, grad_g, grad_w, int(np.count_nonzero(~ok))


@dataclass(frozen=True)
class LossBreakdown:
    l_cls: float
    l_reg: float
    gamma: float
    total: float
    n_degenerate: int = 0


@dataclass(frozen=True, eq=False)
class ObjectiveGrads:
    logit_grads: np.ndarray
    embedding_grads: Optional[np.ndarray]
    w_grad: Optional[np.ndarray]


def total_loss(
    batch: SubjectBatch,
    trace: net.ForwardTrace,
    w,
    gamma: float,
    mode: str = "complete",
    eps: float = DEFAULT_EPS,
    weighting: str = "years",
):
    """``l_cls + gamma * l_reg`` for one batch of whole subjects.

    With ``gamma == 0`` the regularizer is still evaluated for reporting but
    contributes no gradient.

    Returns:
        (LossBreakdown, ObjectiveGrads) ready for :func:`net.backward`.
    """
    if batch.n_subjects == 0:
        raise ContractError("empty batch")
    l_cls, dlogit = bce_loss(trace.logits, batch.labels)
    pairs = batch.pairs(mode, weighting)
    l_reg, grad_g, grad_w, n_deg = batch_regularizer(trace.embedding, w, pairs, batch.n_subjects, eps)
    total = l_cls + gamma * l_reg
    if gamma == 0:
        grads = ObjectiveGrads(dlogit, None, None)
    else:
        grads = ObjectiveGrads(dlogit, gamma * grad_g, gamma * grad_w)
    return LossBreakdown(l_cls, l_reg, gamma, total, n_deg), grads


def loss_and_gradient(
    params: net.MlpParams,
    batch: SubjectBatch,
    gamma: float,
    mode: str = "complete",
    eps: float = DEFAULT_EPS,
    weighting: str = "years",
):
    """Forward, objective and backward in one call."""
    trace = net.forward(params, batch.features)
    breakdown, g = total_loss(batch, trace, params.w, gamma, mode, eps, weighting)
    grads = net.backward(params, trace, g.logit_grads, g.embedding_grads, g.w_grad)
    return breakdown, grads
