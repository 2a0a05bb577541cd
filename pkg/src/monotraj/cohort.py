"""Longitudinal cohort model, file ingestion and preprocessing.

A cohort is a set of subjects, each an age-ordered sequence of visits. Every
visit carries a stage label on the HC < EMCI < LMCI < AD continuum and a
feature vector of fixed width. Loading enforces the irreversibility rule: a
subject whose diagnosis ever moves back down the continuum is rejected.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    EmptyTaskError,
    DataError,
    IntegrityError,
    LabelError,
    ParseError,
    RankError,
    SchemaError,
    SplitError,
)


class Stage(enum.IntEnum):
    HC = 0
    EMCI = 1
    LMCI = 2
    AD = 3

    @classmethod
    def parse(cls, token: str) -> "Stage":
        try:
            return cls[token]
        except KeyError:
            raise LabelError(
                f"unknown stage label {token!r}; expected one of HC|EMCI|LMCI|AD"
            ) from None


@dataclass(frozen=True)
class Covariates:
    age: float
    gender: float
    education: float
    icv: Optional[float] = None


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Visit:
    age: float
    stage: Stage
    features: np.ndarray
    covariates: Optional[Covariates] = None
    label: Optional[int] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1 or feats.size == 0:
            raise DimensionError("visit features must be a non-empty vector")
        if not np.all(np.isfinite(feats)):
            raise DataError("visit features must be finite")
        if not (math.isfinite(self.age) and self.age > 0):
            raise DataError(f"visit age must be positive and finite, got {self.age!r}")
        if feats is not self.features or feats.flags.writeable:
            object.__setattr__(self, "features", _frozen_array(feats))
        object.__setattr__(self, "stage", Stage(self.stage))


@dataclass(frozen=True, eq=False)
class Subject:
    id: str
    visits: tuple

    def __post_init__(self):
        visits = tuple(self.visits)
        if not visits:
            raise IntegrityError(f"subject {self.id!r} has no visits")
        for prev, cur in zip(visits, visits[1:]):
            if not cur.age > prev.age:
                raise IntegrityError(
                    f"subject {self.id!r}: visit ages must strictly increase "
                    f"({prev.age!r} then {cur.age!r})"
                )
            if cur.stage < prev.stage:
                raise IntegrityError(
                    f"subject {self.id!r}: stage reversal {prev.stage.name} -> "
                    f"{cur.stage.name}"
                )
            if prev.label is not None and cur.label is not None and cur.label < prev.label:
                raise IntegrityError(f"subject {self.id!r}: label sequence decreases")
        object.__setattr__(self, "visits", visits)

    @property
    def n_visits(self) -> int:
        return len(self.visits)

    @property
    def ages(self) -> np.ndarray:
        return np.array([v.age for v in self.visits])


@dataclass(frozen=True)
class TaskSpec:
    negative_stage: Stage
    positive_stage: Stage

    def __post_init__(self):
        object.__setattr__(self, "negative_stage", Stage(self.negative_stage))
        object.__setattr__(self, "positive_stage", Stage(self.positive_stage))
        if not self.negative_stage < self.positive_stage:
            raise ConfigError(
                f"task negative stage {self.negative_stage.name} must precede "
                f"positive stage {self.positive_stage.name}"
            )

    @property
    def name(self) -> str:
        return f"{self.negative_stage.name}_{self.positive_stage.name}"

    @classmethod
    def parse(cls, text: str) -> "TaskSpec":
        parts = text.replace("/", "_").split("_")
        if len(parts) != 2:
            raise ConfigError(f"task must look like HC_EMCI, got {text!r}")
        try:
            return cls(Stage[parts[0]], Stage[parts[1]])
        except KeyError:
            raise ConfigError(f"unknown stage in task {text!r}") from None


PRESET_TASKS = (
    TaskSpec(Stage.HC, Stage.EMCI),
    TaskSpec(Stage.EMCI, Stage.LMCI),
    TaskSpec(Stage.LMCI, Stage.AD),
    TaskSpec(Stage.HC, Stage.AD),
)


@dataclass(frozen=True, eq=False)
class Cohort:
    subjects: tuple
    feature_names: tuple
    modality_tag: str = ""
    task: Optional[TaskSpec] = None

    def __post_init__(self):
        subjects = tuple(self.subjects)
        names = tuple(self.feature_names)
        seen = set()
        for s in subjects:
            if s.id in seen:
                raise IntegrityError(f"duplicate subject id {s.id!r}")
            seen.add(s.id)
            for v in s.visits:
                if v.features.shape[0] != len(names):
                    raise DimensionError(
                        f"subject {s.id!r} has {v.features.shape[0]} features, "
                        f"cohort declares {len(names)}"
                    )
        object.__setattr__(self, "subjects", subjects)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_visits(self) -> int:
        return sum(s.n_visits for s in self.subjects)

    @property
    def ids(self) -> list:
        return [s.id for s in self.subjects]

    def features(self) -> np.ndarray:
        """All visits stacked subject by subject, shape (n_visits, d)."""
        if not self.subjects:
            return np.empty((0, self.n_features))
        return np.vstack([v.features for s in self.subjects for v in s.visits])

    def ages(self) -> np.ndarray:
        return np.array([v.age for s in self.subjects for v in s.visits], dtype=np.float64)

    def labels(self) -> Optional[np.ndarray]:
        labels = [v.label for s in self.subjects for v in s.visits]
        if any(lab is None for lab in labels):
            return None
        return np.array(labels, dtype=np.float64)

    def offsets(self) -> np.ndarray:
        """Row offsets so subject ``i`` owns rows ``offsets[i]:offsets[i+1]``."""
        return np.concatenate([[0], np.cumsum([s.n_visits for s in self.subjects])]).astype(np.intp)

    def subset(self, ids: Iterable[str]) -> "Cohort":
        by_id = {s.id: s for s in self.subjects}
        return replace(self, subjects=tuple(by_id[i] for i in ids))

    def with_features(self, matrix: np.ndarray) -> "Cohort":
        """Copy of the cohort with the stacked feature matrix replaced."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (self.n_visits, self.n_features):
            raise DimensionError(
                f"feature matrix shape {matrix.shape} != {(self.n_visits, self.n_features)}"
            )
        subjects = []
        row = 0
        for s in self.subjects:
            visits = []
            for v in s.visits:
                visits.append(replace(v, features=matrix[row]))
                row += 1
            subjects.append(Subject(s.id, tuple(visits)))
        return replace(self, subjects=tuple(subjects))


def merge_cohorts(cohorts: Sequence[Cohort]) -> Cohort:
    if not cohorts:
        raise DataError("nothing to merge")
    first = cohorts[0]
    for c in cohorts[1:]:
        if c.feature_names != first.feature_names:
            raise DimensionError("cannot merge cohorts with different feature sets")
    subjects = tuple(s for c in cohorts for s in c.subjects)
    return replace(first, subjects=subjects)


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schema:
    """Column names of the long-format cohort file.

    ``features`` of ``None`` means every column not claimed by another field.
    """

    subject_id: str = "subject_id"
    age: str = "age"
    stage: str = "stage"
    gender: str = "gender"
    education: str = "educ"
    icv: str = "icv"
    features: Optional[tuple] = None
    delimiter: str = ","

    def reserved(self) -> set:
        return {self.subject_id, self.age, self.stage, self.gender, self.education, self.icv}


def _parse_float(cell: str, column: str, row_number: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row_number}: column {column!r} is not numeric: {cell!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"row {row_number}: column {column!r} is not finite: {cell!r}")
    return value


def load_cohort(path, schema: Schema = Schema(), modality_tag: str = "") -> Cohort:
    """Read a long-format cohort file, one visit per row.

    Rows are grouped by subject id and sorted by age. Row numbers in error
    messages count the header as row 1.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        index = {name: i for i, name in enumerate(header)}
        for col in (schema.subject_id, schema.age, schema.stage):
            if col not in index:
                raise SchemaError(f"{path}: missing required column {col!r}")
        if schema.features is not None:
            feature_names = tuple(schema.features)
            for col in feature_names:
                if col not in index:
                    raise SchemaError(f"{path}: missing feature column {col!r}")
        else:
            reserved = schema.reserved()
            feature_names = tuple(h for h in header if h not in reserved)
        if not feature_names:
            raise SchemaError(f"{path}: no feature columns")
        has_cov = schema.gender in index and schema.education in index
        has_icv = has_cov and schema.icv in index
        feat_idx = [index[c] for c in feature_names]

        rows: dict = {}
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"row {row_number}: expected {len(header)} cells, got {len(row)}"
                )
            sid = row[index[schema.subject_id]].strip()
            age = _parse_float(row[index[schema.age]], schema.age, row_number)
            stage = Stage.parse(row[index[schema.stage]].strip())
            feats = [_parse_float(row[i], header[i], row_number) for i in feat_idx]
            cov = None
            if has_cov:
                cov = Covariates(
                    age=age,
                    gender=_parse_float(row[index[schema.gender]], schema.gender, row_number),
                    education=_parse_float(
                        row[index[schema.education]], schema.education, row_number
                    ),
                    icv=(
                        _parse_float(row[index[schema.icv]], schema.icv, row_number)
                        if has_icv
                        else None
                    ),
                )
            try:
                visit = Visit(age=age, stage=stage, features=feats, covariates=cov)
            except DataError as exc:
                raise ParseError(f"row {row_number}: {exc}") from None
            rows.setdefault(sid, []).append(visit)

    subjects = []
    for sid, visits in rows.items():
        visits.sort(key=lambda v: v.age)
        subjects.append(Subject(sid, tuple(visits)))
    return Cohort(tuple(subjects), feature_names, modality_tag)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_cohort(cohort: Cohort, path, schema: Schema = Schema()) -> None:
    """Write ``cohort`` in the format :func:`load_cohort` reads."""
    has_cov = all(v.covariates is not None for s in cohort.subjects for v in s.visits)
    has_icv = has_cov and all(
        v.covariates.icv is not None for s in cohort.subjects for v in s.visits
    )
    header = [schema.subject_id, schema.age, schema.stage]
    if has_cov:
        header += [schema.gender, schema.education]
        if has_icv:
            header.append(schema.icv)
    header += list(cohort.feature_names)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=schema.delimiter, lineterminator="\n")
        writer.writerow(header)
        for s in cohort.subjects:
            for v in s.visits:
                row = [s.id, _fmt(v.age), v.stage.name]
                if has_cov:
                    row += [_fmt(v.covariates.gender), _fmt(v.covariates.education)]
                    if has_icv:
                        row.append(_fmt(v.covariates.icv))
                row += [_fmt(x) for x in v.features]
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeatureStats:
    """Per-feature location and scale. ``std == 0`` marks a constant feature."""

    names: tuple
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std == 0

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[-1] != len(self.names):
            raise DimensionError(
                f"stats cover {len(self.names)} features, data has {matrix.shape[-1]}"
            )
        const = self.constant
        center = np.where(const, 0.0, self.mean)
        scale = np.where(const, 1.0, self.std)
        return (matrix - center) / scale

    def save(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["name", "mean", "std"])
            for name, m, s in zip(self.names, self.mean, self.std):
                writer.writerow([name, _fmt(m), _fmt(s)])

    @classmethod
    def load(cls, path) -> "FeatureStats":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["name", "mean", "std"]:
            raise SchemaError(f"{path}: expected header name,mean,std")
        body = rows[1:]
        return cls(
            tuple(r[0] for r in body),
            np.array([float(r[1]) for r in body]),
            np.array([float(r[2]) for r in body]),
        )

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureStats":
        return cls(tuple(data["names"]), np.array(data["mean"], float), np.array(data["std"], float))


def fit_stats(cohort: Cohort) -> FeatureStats:
    if cohort.n_visits == 0:
        raise DataError("cannot fit standardization on an empty cohort")
    X = cohort.features()
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population convention (1/n)
    # Constant columns can leave a rounding-level std; treat them as exactly constant.
    const = np.all(X == X[0], axis=0)
    std = np.where(const, 0.0, std)
    return FeatureStats(cohort.feature_names, mean, std)


def standardize(cohort: Cohort, stats: Optional[FeatureStats] = None):
    """Scale every feature to zero mean and unit (population) std.

    Fits the statistics on ``cohort`` when ``stats`` is None, otherwise applies
    the given ones (test-time use). Constant features pass through unchanged.

    Returns:
        (standardized cohort, stats used)
    """
    if stats is None:
        stats = fit_stats(cohort)
    elif len(stats.names) != cohort.n_features:
        raise DimensionError(
            f"stats cover {len(stats.names)} features, cohort has {cohort.n_features}"
        )
    if cohort.n_visits == 0:
        return cohort, stats
    return cohort.with_features(stats.apply(cohort.features())), stats


# ---------------------------------------------------------------------------
# Covariate residualization
# ---------------------------------------------------------------------------


def baseline_hc(subject: Subject, visit: Visit) -> bool:
    """Default reference set: first visits of subjects who start healthy."""
    return visit is subject.visits[0] and visit.stage == Stage.HC


COVARIATE_NAMES = ("age", "gender", "education", "icv")


def _covariate_matrix(visits: Sequence[Visit], use_icv: bool) -> np.ndarray:
    rows = []
    for v in visits:
        c = v.covariates
        if c is None:
            raise DataError("visit is missing its covariate record")
        row = [c.age, c.gender, c.education]
        if use_icv:
            if c.icv is None:
                raise DataError("visit is missing the icv covariate")
            row.append(c.icv)
        rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(len(rows), 4 if use_icv else 3)


@dataclass(frozen=True, eq=False)
class CovariateModel:
    """Per-feature OLS fit of features on covariates.

    ``coef`` has shape (1 + n_covariates, d): intercept row first, then one row
    per name in ``covariates``. Covariates constant on the reference set are
    dropped and absorbed by the intercept.
    """

    covariates: tuple
    coef: np.ndarray
    use_icv: bool

    def predict(self, visits: Sequence[Visit]) -> np.ndarray:
        Z = _covariate_matrix(visits, self.use_icv)
        cols = [COVARIATE_NAMES.index(name) for name in self.covariates]
        design = np.column_stack([np.ones(len(visits)), Z[:, cols]])
        return design @ self.coef

    def apply(self, cohort: Cohort) -> Cohort:
        visits = [v for s in cohort.subjects for v in s.visits]
        if not visits:
            return cohort
        return cohort.with_features(cohort.features() - self.predict(visits))

    def to_dict(self) -> dict:
        return {
            "covariates": list(self.covariates),
            "coef": self.coef.tolist(),
            "use_icv": self.use_icv,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CovariateModel":
        return cls(tuple(data["covariates"]), np.array(data["coef"], float), bool(data["use_icv"]))


def fit_covariate_model(
    cohort: Cohort,
    reference_filter: Callable[[Subject, Visit], bool] = baseline_hc,
) -> CovariateModel:
    ref = [v for s in cohort.subjects for v in s.visits if reference_filter(s, v)]
    all_visits = [v for s in cohort.subjects for v in s.visits]
    if any(v.covariates is None for v in all_visits):
        raise DataError("residualization needs covariates on every visit")
    use_icv = all(v.covariates.icv is not None for v in all_visits)
    names = COVARIATE_NAMES[: 4 if use_icv else 3]
    if len(ref) <= len(names):
        raise DataError(
            f"reference set has {len(ref)} visits; need more than {len(names)} covariates"
        )
    Z = _covariate_matrix(ref, use_icv)
    keep = [j for j in range(Z.shape[1]) if np.ptp(Z[:, j]) > 0]
    kept_names = tuple(names[j] for j in keep)
    design = np.column_stack([np.ones(len(ref)), Z[:, keep]])

    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        collinear = []
        for j in range(1, design.shape[1]):
            if np.linalg.matrix_rank(design[:, : j + 1]) <= np.linalg.matrix_rank(design[:, :j]):
                collinear.append(kept_names[j - 1])
        raise RankError(f"singular covariate design; collinear covariates: {', '.join(collinear)}")

    Y = np.vstack([v.features for v in ref])
    coef, *_ = np.linalg.lstsq(design, Y, rcond=None)
    return CovariateModel(kept_names, coef, use_icv)


def residualize(
    cohort: Cohort,
    reference_filter: Callable[[Subject, Visit], bool] = baseline_hc,
) -> Cohort:
    """Remove covariate effects fit on a reference subset from every visit."""
    return fit_covariate_model(cohort, reference_filter).apply(cohort)


# ---------------------------------------------------------------------------
# Binary tasks and subject-level splits
# ---------------------------------------------------------------------------


def select_task(cohort: Cohort, task: TaskSpec) -> Cohort:
    """Keep visits of the two task stages, labelled 0 (negative) and 1 (positive).

    Raises EmptyTaskError when either stage has no visits, since a one-class
    task cannot be trained or scored for accuracy.
    """
    subjects = []
    for s in cohort.subjects:
        visits = tuple(
            replace(v, label=int(v.stage == task.positive_stage))
            for v in s.visits
            if v.stage in (task.negative_stage, task.positive_stage)
        )
        if visits:
            subjects.append(Subject(s.id, visits))
    if not subjects:
        raise EmptyTaskError(f"no visits with stages {task.name.replace('_', '/')} in cohort")
    present = {v.stage for s in subjects for v in s.visits}
    missing = [st.name for st in (task.negative_stage, task.positive_stage) if st not in present]
    if missing:
        raise EmptyTaskError(f"task {task.name}: no {' or '.join(missing)} visits in cohort")
    return replace(cohort, subjects=tuple(subjects), task=task)


@dataclass(frozen=True)
class SplitPlan:
    test_fraction: float = 0.2
    n_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.n_folds < 1:
            raise ConfigError(f"n_folds must be positive, got {self.n_folds}")


@dataclass(frozen=True, eq=False)
class Split:
    test: Cohort
    folds: list = field(default_factory=list)


def split_subjects(cohort: Cohort, plan: SplitPlan) -> Split:
    """Hold out a test set and deal the rest round-robin into folds.

    Subjects are ordered by id before the seeded shuffle so the assignment does
    not depend on file row order.
    """
    M = cohort.n_subjects
    if M < plan.n_folds + 1:
        raise SplitError(f"{M} subjects cannot fill a test set and {plan.n_folds} folds")
    n_test = int(math.floor(plan.test_fraction * M + 0.5))
    n_test = max(n_test, 1)
    if M - n_test < plan.n_folds:
        raise SplitError(
            f"{M} subjects leave {M - n_test} for {plan.n_folds} folds after the test hold-out"
        )
    ids = sorted(cohort.ids)
    order = np.random.default_rng(plan.seed).permutation(M)
    shuffled = [ids[i] for i in order]
    test_ids = shuffled[:n_test]
    rest = shuffled[n_test:]
    fold_ids = [rest[f :: plan.n_folds] for f in range(plan.n_folds)]
    return Split(cohort.subset(test_ids), [cohort.subset(f) for f in fold_ids])
