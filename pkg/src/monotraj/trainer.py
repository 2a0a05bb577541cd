"""Training loop, subject-level cross-validation and a logistic-regression baseline."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import net
from .cohort import (
    Cohort,
    CovariateModel,
    FeatureStats,
    Split,
    SplitPlan,
    fit_covariate_model,
    merge_cohorts,
    split_subjects,
    standardize,
)
from .errors import ConfigError, DivergenceError, ProtocolError
from .metrics import MetricsReport, evaluate
from .objective import DEFAULT_EPS, REG_MODES, WEIGHTINGS, SubjectBatch, bce_loss, loss_and_gradient

log = logging.getLogger(__name__)

PAPER_GAMMA = 2e-4
AUTO_ALL_MAX_SUBJECTS = 400
AUTO_BATCH_SUBJECTS = 32


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = PAPER_GAMMA
    reg_mode: str = "complete"
    epochs: int = 300
    subjects_per_batch: Union[int, str, None] = None  # None: "all" up to 400 subjects, else 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    eps: float = DEFAULT_EPS
    hidden: tuple = net.DEFAULT_HIDDEN
    activation: str = "relu"
    weighting: str = "years"
    patience: Optional[int] = None
    l2: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError(f"learning_rate must be finite and > 0, got {self.learning_rate}")
        if self.reg_mode not in REG_MODES:
            raise ConfigError(f"reg_mode must be one of {REG_MODES}, got {self.reg_mode!r}")
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"optimizer must be sgd or adam, got {self.optimizer!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be positive")
        spb = self.subjects_per_batch
        if spb is not None and spb != "all" and not (isinstance(spb, int) and spb > 0):
            raise ConfigError(f"subjects_per_batch must be a positive integer or 'all', got {spb!r}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be positive")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")

    def batch_size_for(self, n_subjects: int) -> int:
        spb = self.subjects_per_batch
        if spb is None:
            spb = "all" if n_subjects <= AUTO_ALL_MAX_SUBJECTS else AUTO_BATCH_SUBJECTS
        return n_subjects if spb == "all" else min(int(spb), n_subjects)


@dataclass(eq=False)
class TrainedModel:
    params: net.MlpParams
    config: TrainConfig
    stats: Optional[FeatureStats] = None
    loss_history: list = field(default_factory=list)
    kind: str = "mlp"
    covariate_model: Optional[CovariateModel] = None
    task: Optional[str] = None

    @property
    def n_features(self) -> int:
        return self.params.layer_sizes[0]

    def prepare(self, cohort: Cohort) -> Cohort:
        """Apply the stored covariate adjustment and standardization."""
        if self.covariate_model is not None:
            cohort = self.covariate_model.apply(cohort)
        if self.stats is not None:
            cohort, _ = standardize(cohort, self.stats)
        return cohort

    def score(self, X: np.ndarray) -> np.ndarray:
        return net.score(self.params, X)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "task": self.task,
            "config": asdict(self.config),
            "params": net.params_to_dict(self.params),
            "stats": None if self.stats is None else self.stats.to_dict(),
            "covariate_model": None if self.covariate_model is None else self.covariate_model.to_dict(),
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainedModel":
        cfg = dict(data["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        return cls(
            params=net.params_from_dict(data["params"]),
            config=TrainConfig(**cfg),
            stats=None if data["stats"] is None else FeatureStats.from_dict(data["stats"]),
            loss_history=list(data["loss_history"]),
            kind=data["kind"],
            covariate_model=(
                None if data["covariate_model"] is None else CovariateModel.from_dict(data["covariate_model"])
            ),
            task=data.get("task"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


class Adam:
    """Bias-corrected adaptive moment updates, applied in place."""

    def __init__(self, arrays, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, arrays, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class SGD:
    def __init__(self, arrays, lr):
        self.lr = lr

    def step(self, arrays, grads):
        for a, g in zip(arrays, grads):
            a -= self.lr * g


def _make_optimizer(config: TrainConfig, arrays):
    if config.optimizer == "adam":
        return Adam(arrays, config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    return SGD(arrays, config.learning_rate)


def iter_subject_batches(n_subjects: int, batch_size: int, rng: np.random.Generator):
    """Subject index chunks for one epoch; full-cohort batches keep subject order."""
    if batch_size >= n_subjects:
        yield np.arange(n_subjects)
        return
    order = rng.permutation(n_subjects)
    for start in range(0, n_subjects, batch_size):
        yield order[start : start + batch_size]


def train(
    train_cohort: Cohort,
    config: TrainConfig = TrainConfig(),
    stats: Optional[FeatureStats] = None,
    covariate_model: Optional[CovariateModel] = None,
) -> TrainedModel:
    """Fit the network on ``l_cls + gamma * l_reg`` with whole-subject batches.

    ``train_cohort`` must already carry binary labels and standardized
    features; ``stats`` and ``covariate_model`` are only stored for scoring.
    """
    batch = SubjectBatch.from_cohort(train_cohort)
    params = net.init_params(net.mlp_layer_sizes(train_cohort.n_features, config.hidden), config.seed, config.activation)
    arrays = params.arrays()
    optimizer = _make_optimizer(config, arrays)
    rng = np.random.default_rng([config.seed, 1])
    batch_size = config.batch_size_for(batch.n_subjects)

    history = []
    best, since_best = np.inf, 0
    for epoch in range(config.epochs):
        totals = []
        for idx in iter_subject_batches(batch.n_subjects, batch_size, rng):
            sub = batch if len(idx) == batch.n_subjects else batch.take(idx)
            breakdown, grads = loss_and_gradient(
                params, sub, config.gamma, config.reg_mode, config.eps, config.weighting
            )
            if not np.isfinite(breakdown.total):
                raise DivergenceError(epoch, config.learning_rate)
            totals.append(breakdown.total)
            optimizer.step(arrays, grads.arrays())
        epoch_loss = float(np.mean(totals))
        history.append(epoch_loss)
        if config.patience is not None:
            if epoch_loss < best:
                best, since_best = epoch_loss, 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    log.info("early stop at epoch %d", epoch)
                    break
    return TrainedModel(
        params,
        config,
        stats,
        history,
        "mlp",
        covariate_model,
        train_cohort.task.name if train_cohort.task else None,
    )


def train_logreg_baseline(
    train_cohort: Cohort,
    l2: float = 0.0,
    epochs: int = 500,
    learning_rate: Optional[float] = None,
    seed: int = 0,
    stats: Optional[FeatureStats] = None,
    covariate_model: Optional[CovariateModel] = None,
) -> TrainedModel:
    """Logistic regression by full-batch gradient descent, optional L2 on w.

    When ``learning_rate`` is None the step is 1/L with L the Lipschitz bound of
    the gradient, so the loss never increases between epochs.
    """
    batch = SubjectBatch.from_cohort(train_cohort)
    X, y = batch.features, batch.labels
    n, d = X.shape
    if learning_rate is None:
        Xa = np.column_stack([X, np.ones(n)])
        lipschitz = 0.25 * np.linalg.eigvalsh(Xa.T @ Xa / n)[-1] + l2
        learning_rate = 1.0 / lipschitz
    config = TrainConfig(
        gamma=0.0, epochs=epochs, learning_rate=float(learning_rate), optimizer="sgd",
        seed=seed, hidden=(), l2=l2, subjects_per_batch="all",
    )
    params = net.MlpParams([np.zeros((1, d))], [np.zeros(1)], "relu", seed)
    w, b = params.weights[0][0], params.biases[0]
    history = []
    for epoch in range(epochs):
        z = X @ w + b[0]
        loss, dz = bce_loss(z, y)
        loss += 0.5 * l2 * float(w @ w)
        if not np.isfinite(loss):
            raise DivergenceError(epoch, learning_rate)
        history.append(loss)
        w -= learning_rate * (dz @ X + l2 * w)
        b -= learning_rate * dz.sum()
    return TrainedModel(
        params, config, stats, history, "logreg", covariate_model,
        train_cohort.task.name if train_cohort.task else None,
    )


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """What to fit in each fold: an MLP (any gamma) or the linear baseline."""

    kind: str = "mlp"
    config: TrainConfig = TrainConfig()
    logreg_l2: float = 0.0
    logreg_epochs: int = 500
    residualize: bool = False

    def __post_init__(self):
        if self.kind not in ("mlp", "logreg"):
            raise ConfigError(f"unknown model kind {self.kind!r}")


def fit_model(
    train_raw: Cohort,
    spec: ModelSpec,
    seed: Optional[int] = None,
    covariate_model: Optional[CovariateModel] = None,
) -> TrainedModel:
    """Preprocess on the training subjects only, then train.

    A given ``covariate_model`` is used as is; otherwise, when the spec asks
    for residualization, one is fit on the training subjects' baseline HC visits.
    """
    cov = covariate_model
    if cov is None and spec.residualize:
        cov = fit_covariate_model(train_raw)
    cohort = cov.apply(train_raw) if cov is not None else train_raw
    cohort, stats = standardize(cohort)
    config = spec.config if seed is None else replace(spec.config, seed=seed)
    if spec.kind == "logreg":
        return train_logreg_baseline(
            cohort, spec.logreg_l2, spec.logreg_epochs, seed=config.seed, stats=stats, covariate_model=cov
        )
    return train(cohort, config, stats, cov)


def check_partition(parts, all_ids=None) -> None:
    """Raise ProtocolError unless the id sets are pairwise disjoint (and cover ``all_ids``)."""
    seen: dict = {}
    for index, ids in enumerate(parts):
        for sid in ids:
            if sid in seen:
                raise ProtocolError(f"subject {sid!r} appears in partitions {seen[sid]} and {index}")
            seen[sid] = index
    if all_ids is not None and set(seen) != set(all_ids):
        raise ProtocolError("partition does not cover the cohort")


@dataclass(eq=False)
class CVResult:
    fold_reports: list
    test_report: MetricsReport
    split: Split
    kind: str = "mlp"

    def fold_mean(self, key: str) -> float:
        return float(np.mean([getattr(r, key) for r in self.fold_reports]))


def cross_validate(
    cohort: Cohort,
    plan: SplitPlan,
    spec: ModelSpec = ModelSpec(),
    covariate_model: Optional[CovariateModel] = None,
) -> CVResult:
    """Subject-level CV over the non-test subjects, then a held-out test fit.

    Fold ``f`` trains with seed ``spec.config.seed + f``; the final fit on all
    folds uses ``spec.config.seed + n_folds``. Subject disjointness is checked
    on every partition before any training happens.
    """
    if plan.n_folds < 2:
        raise ConfigError("cross-validation needs at least 2 folds")
    split = split_subjects(cohort, plan)
    check_partition([split.test.ids] + [f.ids for f in split.folds], cohort.ids)
    base_seed = spec.config.seed
    reports = []
    for f, eval_fold in enumerate(split.folds):
        train_raw = merge_cohorts([c for j, c in enumerate(split.folds) if j != f])
        check_partition([train_raw.ids, eval_fold.ids, split.test.ids])
        try:
            model = fit_model(train_raw, spec, base_seed + f, covariate_model)
        except DivergenceError as exc:
            raise DivergenceError(exc.epoch, exc.learning_rate, f"fold {f}: {exc}") from exc
        reports.append(evaluate(model, eval_fold))
    train_all = merge_cohorts(split.folds)
    check_partition([train_all.ids, split.test.ids])
    try:
        final = fit_model(train_all, spec, base_seed + plan.n_folds, covariate_model)
    except DivergenceError as exc:
        raise DivergenceError(exc.epoch, exc.learning_rate, f"final fit: {exc}") from exc
    return CVResult(reports, evaluate(final, split.test), split, spec.kind)
