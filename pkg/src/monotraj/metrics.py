"""Accuracy and trajectory-monotonicity metrics for any scorer.

A *violation* is a pair of visits (k1 < k2) of one subject whose later score
is strictly lower than the earlier one. Ties are not violations.

* violation ratio ``r``: per subject, violating pairs / all pairs; averaged
  over subjects with at least two visits.
* normalized violation gap ``omega``: per subject, the sum of score drops over
  violating pairs divided by the largest drop in the same pair set; averaged
  over subjects with at least two visits. Subjects without any drop add 0.

``neighbor`` mode uses consecutive visits, ``complete`` mode all pairs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .cohort import Cohort
from .errors import ContractError, CorrelationUndefinedError, DimensionError, IntegrityError, ParseError

MODES = ("neighbor", "complete")
REPORT_KEYS = (
    "accuracy",
    "r_nb",
    "r_cp",
    "omega_nb",
    "omega_cp",
    "n_subjects_scored",
    "n_multi_visit_subjects",
)


@dataclass(frozen=True, eq=False)
class SubjectTrajectory:
    subject_id: str
    ages: np.ndarray
    scores: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        ages = np.asarray(self.ages, dtype=np.float64)
        scores = np.asarray(self.scores, dtype=np.float64)
        if ages.shape != scores.shape or ages.ndim != 1:
            raise ContractError(f"subject {self.subject_id!r}: ages and scores must align")
        if np.any(np.diff(ages) <= 0):
            raise IntegrityError(f"subject {self.subject_id!r}: ages must strictly increase")
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "scores", scores)
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    def __len__(self):
        return self.scores.shape[0]


def _drops(scores: np.ndarray, mode: str) -> np.ndarray:
    """Earlier-minus-later score for every pair in the mode's pair set."""
    if mode == "neighbor":
        return scores[:-1] - scores[1:]
    if mode == "complete":
        k1, k2 = np.triu_indices(scores.shape[0], k=1)
        return scores[k1] - scores[k2]
    raise ContractError(f"unknown mode {mode!r}")


def _multi(trajectories):
    return [t for t in trajectories if len(t) >= 2]


def subject_violation_ratio(scores, mode: str) -> float:
    drops = _drops(np.asarray(scores, dtype=np.float64), mode)
    return float(np.count_nonzero(drops > 0)) / drops.size


def subject_violation_gap(scores, mode: str) -> float:
    drops = _drops(np.asarray(scores, dtype=np.float64), mode)
    top = drops.max()
    if not top > 0:
        return 0.0
    return float(drops[drops > 0].sum() / top)


def violation_ratio(trajectories: Sequence[SubjectTrajectory], mode: str = "complete") -> float:
    multi = _multi(trajectories)
    if mode not in MODES:
        raise ContractError(f"unknown mode {mode!r}")
    if not multi:
        return 0.0
    return float(np.mean([subject_violation_ratio(t.scores, mode) for t in multi]))


def violation_gap(trajectories: Sequence[SubjectTrajectory], mode: str = "complete") -> float:
    multi = _multi(trajectories)
    if mode not in MODES:
        raise ContractError(f"unknown mode {mode!r}")
    if not multi:
        return 0.0
    return float(np.mean([subject_violation_gap(t.scores, mode) for t in multi]))


def accuracy(scores, labels) -> float:
    """Fraction of visits where ``score > 0`` matches the label."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ContractError("scores and labels must be aligned vectors")
    if s.size == 0:
        raise ContractError("accuracy of an empty set is undefined")
    return float(np.mean((s > 0).astype(np.int64) == y.astype(np.int64)))


def ratio_gap_correlation(points, n_permutations: int = 10_000, seed: int = 0):
    """Pearson correlation of (r, omega) points with a permutation p-value.

    The p-value is two-sided: the share of seeded shuffles of the second
    coordinate whose |correlation| reaches the observed one, counting the
    observed arrangement itself.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ContractError("need at least 3 (r, omega) points")
    x, y = pts[:, 0] - pts[:, 0].mean(), pts[:, 1] - pts[:, 1].mean()
    sx, sy = np.sqrt(x @ x), np.sqrt(y @ y)
    if sx == 0 or sy == 0:
        raise CorrelationUndefinedError("correlation undefined: a coordinate has zero variance")
    r = float(np.clip((x @ y) / (sx * sy), -1.0, 1.0))
    rng = np.random.default_rng(seed)
    perms = np.argsort(rng.random((n_permutations, y.size)), axis=1)
    r_perm = (y[perms] @ x) / (sx * sy)
    hits = np.count_nonzero(np.abs(r_perm) >= abs(r) - 1e-12)
    return r, float((hits + 1) / (n_permutations + 1))


@dataclass(frozen=True, eq=False)
class MetricsReport:
    accuracy: Optional[float]
    r_nb: float
    r_cp: float
    omega_nb: float
    omega_cp: float
    n_subjects_scored: int
    n_multi_visit_subjects: int
    trajectories: list = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in REPORT_KEYS}
        if self.accuracy is None:
            del out["accuracy"]
        return out

    def write(self, path) -> None:
        lines = [f"{k}={v!r}" for k, v in self.as_dict().items()]
        Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        out[key] = int(value) if key.startswith("n_") else float(value)
    return out


def report_from_trajectories(trajectories: Sequence[SubjectTrajectory]) -> MetricsReport:
    trajectories = list(trajectories)
    acc = None
    if trajectories and all(t.labels is not None for t in trajectories):
        acc = accuracy(
            np.concatenate([t.scores for t in trajectories]),
            np.concatenate([t.labels for t in trajectories]),
        )
    return MetricsReport(
        accuracy=acc,
        r_nb=violation_ratio(trajectories, "neighbor"),
        r_cp=violation_ratio(trajectories, "complete"),
        omega_nb=violation_gap(trajectories, "neighbor"),
        omega_cp=violation_gap(trajectories, "complete"),
        n_subjects_scored=len(trajectories),
        n_multi_visit_subjects=len(_multi(trajectories)),
        trajectories=trajectories,
    )


def trajectories_from_scores(cohort: Cohort, scores) -> list:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (cohort.n_visits,):
        raise DimensionError(f"{scores.shape[0]} scores for {cohort.n_visits} visits")
    out = []
    offsets = cohort.offsets()
    for i, s in enumerate(cohort.subjects):
        labels = [v.label for v in s.visits]
        out.append(
            SubjectTrajectory(
                s.id,
                s.ages,
                scores[offsets[i] : offsets[i + 1]],
                None if any(lab is None for lab in labels) else labels,
            )
        )
    return out


def evaluate_scorer(scorer: Callable[[np.ndarray], np.ndarray], cohort: Cohort) -> MetricsReport:
    """Score every visit of ``cohort`` with ``scorer`` (n, d) -> (n,) and report."""
    return report_from_trajectories(trajectories_from_scores(cohort, scorer(cohort.features())))


def evaluate(model, cohort: Cohort) -> MetricsReport:
    """Report for a trained model on a raw (unstandardized) cohort.

    The model's covariate adjustment and standardization are applied here.
    """
    if cohort.n_features != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, cohort has {cohort.n_features}")
    cohort = model.prepare(cohort)
    return evaluate_scorer(model.score, cohort)


# ---------------------------------------------------------------------------
# Trajectory files
# ---------------------------------------------------------------------------


def export_trajectories(report: MetricsReport, path) -> None:
    """Write ``subject_id,age,score,label`` rows sorted by subject then age."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "age", "score", "label"])
        for t in sorted(report.trajectories, key=lambda t: t.subject_id):
            labels = t.labels if t.labels is not None else [None] * len(t)
            for a, s, lab in zip(t.ages, t.scores, labels):
                writer.writerow([t.subject_id, repr(float(a)), repr(float(s)), "" if lab is None else int(lab)])


def read_trajectories(path) -> list:
    """Read ``subject_id,age,score[,label]`` rows.

    Rows of a subject must appear in strictly ascending age order; an empty
    or absent label column leaves labels unset.
    """
    grouped: dict = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for col in ("subject_id", "age", "score"):
            if col not in fields:
                raise ParseError(f"{path}: missing column {col!r}")
        has_label = "label" in fields
        for row_number, row in enumerate(reader, start=2):
            try:
                age, sc = float(row["age"]), float(row["score"])
            except (TypeError, ValueError):
                raise ParseError(f"row {row_number}: age/score not numeric") from None
            label = row.get("label") if has_label else None
            entry = grouped.setdefault(row["subject_id"], ([], [], []))
            if entry[0] and not age > entry[0][-1]:
                raise IntegrityError(
                    f"row {row_number}: subject {row['subject_id']!r} ages not strictly ascending"
                )
            entry[0].append(age)
            entry[1].append(sc)
            entry[2].append(None if label in (None, "") else int(label))
    out = []
    for sid, (ages, scores, labels) in grouped.items():
        lab = None if any(x is None for x in labels) else labels
        out.append(SubjectTrajectory(sid, ages, scores, lab))
    return out
