"""Synthetic longitudinal cohorts with irreversible latent progression.

Each subject follows a latent disease score that rises linearly with age at a
subject-specific positive rate. Stages come from thresholding the latent score;
features are a seeded linear mixture of monotone (logistic) responses to the
latent score plus Gaussian noise. Because the latent score is known, the
generator doubles as an oracle for the violation metrics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .cohort import Cohort, Covariates, Stage, Subject, Visit, write_cohort
from .errors import ConfigError

MIN_RATE = 0.01  # years^-1; floor that keeps every latent path strictly increasing


@dataclass(frozen=True)
class GenConfig:
    n_subjects: int = 400
    d: int = 40
    visits_per_subject: tuple = (1, 4)
    visit_spacing_years: float = 1.0
    spacing_jitter: float = 0.25
    latent_rate: tuple = (0.25, 0.1)
    baseline_latent: tuple = (-0.5, 3.5)
    noise_std: float = 0.5
    subject_effect_std: float = 0.0
    reliability_spread: float = 0.0
    stage_thresholds: tuple = (0.5, 1.5, 2.5)
    n_factors: Optional[int] = None
    link: str = "logistic"
    link_width: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ConfigError("n_subjects must be positive")
        if self.d < 1:
            raise ConfigError("d must be positive")
        lo, hi = self.visits_per_subject
        if lo < 1 or lo > hi:
            raise ConfigError(f"visits_per_subject must satisfy 1 <= min <= max, got {lo}..{hi}")
        if not self.visit_spacing_years > 0:
            raise ConfigError("visit_spacing_years must be positive")
        if not 0 <= self.spacing_jitter < 1:
            raise ConfigError("spacing_jitter must lie in [0, 1)")
        if self.latent_rate[1] < 0:
            raise ConfigError("latent_rate std must be non-negative")
        if not self.noise_std >= 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        t = self.stage_thresholds
        if len(t) != 3 or not (t[0] < t[1] < t[2]):
            raise ConfigError(f"stage_thresholds must be 3 strictly increasing values, got {t}")
        if not self.subject_effect_std >= 0:
            raise ConfigError(f"subject_effect_std must be >= 0, got {self.subject_effect_std}")
        if not self.reliability_spread >= 0:
            raise ConfigError("reliability_spread must be >= 0")
        if self.n_factors is not None and self.n_factors < 1:
            raise ConfigError("n_factors must be positive")
        if self.link not in ("logistic", "identity"):
            raise ConfigError(f"unknown link {self.link!r}")
        if not self.link_width > 0:
            raise ConfigError("link_width must be positive")

    @property
    def q(self) -> int:
        return self.n_factors if self.n_factors is not None else min(8, self.d)


@dataclass(frozen=True, eq=False)
class SyntheticCohort:
    cohort: Cohort
    latent: dict = field(default_factory=dict)  # subject id -> latent score per visit
    loadings: Optional[np.ndarray] = None
    clean_features: Optional[np.ndarray] = None  # A m(s) per visit, before noise


def stage_of(latent: np.ndarray, thresholds) -> np.ndarray:
    """Stage index per latent value: HC below the first threshold, AD at/above the last."""
    return np.searchsorted(np.asarray(thresholds, dtype=np.float64), latent, side="right")


def link_midpoints(config: GenConfig) -> np.ndarray:
    lo, hi = config.stage_thresholds[0] - 0.5, config.stage_thresholds[-1] + 0.5
    return np.linspace(lo, hi, config.q)


def monotone_link(latent: np.ndarray, config: GenConfig) -> np.ndarray:
    """(n, q) responses, each nondecreasing in the latent score."""
    latent = np.asarray(latent, dtype=np.float64)[:, None]
    if config.link == "identity":
        return np.repeat(latent, config.q, axis=1)
    z = (latent - link_midpoints(config)[None, :]) / config.link_width
    return 1.0 / (1.0 + np.exp(-z))


def reliability_scales(d: int, spread: float, rng: np.random.Generator):
    """Per-feature multipliers for visit noise and for the stable subject offset.

    A feature with low visit noise gets a large subject offset and vice versa,
    so features differ in test-retest reliability while looking alike
    cross-sectionally. Both multiplier vectors have root-mean-square 1.
    """
    a = spread * (rng.uniform(size=d) - 0.5)
    noise, effect = np.exp(a), np.exp(-a)
    return noise / np.sqrt(np.mean(noise**2)), effect / np.sqrt(np.mean(effect**2))


def generate(config: GenConfig, loadings: Optional[np.ndarray] = None) -> SyntheticCohort:
    """Draw a cohort and its ground-truth latent scores.

    Args:
        config: generator settings; the same config always yields the same data.
        loadings: optional fixed (d, q) mixing matrix overriding the seeded one.
    """
    rng = np.random.default_rng(config.seed)
    d, q = config.d, config.q
    if loadings is None:
        A = rng.normal(0.0, 1.0, size=(d, q)) / np.sqrt(q)
    else:
        A = np.asarray(loadings, dtype=np.float64).reshape(d, q)
        rng.normal(size=(d, q))  # keep the draw sequence independent of the override

    noise_scale, effect_scale = reliability_scales(d, config.reliability_spread, rng)

    lo, hi = config.visits_per_subject
    width = len(str(config.n_subjects))
    subjects, latents, clean_rows = [], {}, []
    for i in range(config.n_subjects):
        sid = f"S{i + 1:0{max(width, 4)}d}"
        n_visits = int(rng.integers(lo, hi + 1))
        t0 = rng.uniform(60.0, 85.0)
        gaps = config.visit_spacing_years * rng.uniform(
            1 - config.spacing_jitter, 1 + config.spacing_jitter, size=n_visits - 1
        )
        ages = t0 + np.concatenate([[0.0], np.cumsum(gaps)])
        s0 = rng.uniform(*config.baseline_latent)
        rate = max(rng.normal(*config.latent_rate), MIN_RATE)
        latent = s0 + rate * (ages - t0)
        offset = config.subject_effect_std * effect_scale * rng.normal(size=d)
        clean = monotone_link(latent, config) @ A.T + offset
        noise = noise_scale * rng.normal(0.0, config.noise_std, size=clean.shape) if config.noise_std > 0 else 0.0
        feats = clean + noise
        stages = stage_of(latent, config.stage_thresholds)
        gender = float(rng.integers(0, 2))
        educ = float(np.clip(np.round(rng.normal(16.0, 2.7)), 6, 22))
        icv = float(rng.normal(1500.0, 150.0))
        visits = tuple(
            Visit(
                age=float(ages[k]),
                stage=Stage(int(stages[k])),
                features=feats[k],
                covariates=Covariates(float(ages[k]), gender, educ, icv),
            )
            for k in range(n_visits)
        )
        subjects.append(Subject(sid, visits))
        latents[sid] = latent
        clean_rows.append(clean)

    names = tuple(f"f{j:03d}" for j in range(d))
    cohort = Cohort(tuple(subjects), names, modality_tag="synthetic")
    return SyntheticCohort(cohort, latents, A, np.vstack(clean_rows))


def write_latent_sidecar(synth: SyntheticCohort, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "age", "latent"])
        for s in synth.cohort.subjects:
            for v, z in zip(s.visits, synth.latent[s.id]):
                writer.writerow([s.id, repr(float(v.age)), repr(float(z))])


def read_latent_sidecar(path) -> dict:
    """Subject id -> list of (age, latent) in file order."""
    out: dict = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["subject_id"], []).append((float(row["age"]), float(row["latent"])))
    return out


def write_synthetic(synth: SyntheticCohort, cohort_path, latent_path) -> None:
    write_cohort(synth.cohort, cohort_path)
    write_latent_sidecar(synth, latent_path)
