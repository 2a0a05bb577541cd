import numpy as np
import pytest

from monotraj.cohort import Cohort, Covariates, Stage, Subject, Visit


def central_difference(func, x0, step=1e-5):
    """Central finite-difference gradient of scalar ``func`` at ``x0``."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    x = x0.copy()
    for j in range(x0.size):
        x[j] = x0[j] + step
        fplus = func(x)
        x[j] = x0[j] - step
        fminus = func(x)
        x[j] = x0[j]
        grad[j] = (fplus - fminus) / (2 * step)
    return grad


def max_rel_error(analytic, numeric):
    a, n = np.asarray(analytic), np.asarray(numeric)
    return float(np.max(np.abs(a - n) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))))


def make_subject(sid, ages, stages, features, with_cov=False, labels=None):
    visits = []
    for k, (a, st, f) in enumerate(zip(ages, stages, features)):
        cov = Covariates(a, 0.0, 16.0, None) if with_cov else None
        visits.append(
            Visit(age=a, stage=Stage[st] if isinstance(st, str) else st, features=f,
                  covariates=cov, label=None if labels is None else labels[k])
        )
    return Subject(sid, tuple(visits))


@pytest.fixture
def toy_cohort():
    s1 = make_subject("s1", [70.0, 71.0, 72.5], ["HC", "HC", "EMCI"], [[0.0, 1.0], [0.5, 1.5], [1.0, 3.0]])
    s2 = make_subject("s2", [65.0], ["AD"], [[2.0, -1.0]])
    s3 = make_subject("s3", [80.0, 82.0], ["LMCI", "AD"], [[1.0, 0.0], [3.0, 0.0]])
    return Cohort((s1, s2, s3), ("a", "b"), "toy")


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects (criterion, passed, detail) for the end-of-run summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
