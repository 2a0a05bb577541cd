"""Command line: generate, train, evaluate, audit, experiment.

Every command accepts ``--config FILE`` holding flat ``key=value`` lines whose
keys are flag names (``noise-std=0.3`` or ``noise_std=0.3``); flags given on
the command line win. Outputs land in ``--out-dir``, which defaults to
``$MONOTRAJ_OUTPUT_DIR`` or the working directory. Each run ends by writing a
``<command>.manifest.json`` with the resolved settings and output checksums;
``monotraj rerun MANIFEST`` replays it.

Exit codes: 0 success, 2 usage or configuration, 3 data or integrity,
4 numeric divergence, 5 I/O.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, metrics, synthgen, trainer
from .cohort import (
    PRESET_TASKS, Cohort, SplitPlan, TaskSpec, fit_covariate_model, load_cohort, select_task,
)
from .errors import ConfigError, DataError, DivergenceError, MonotrajError
from .trainer import PAPER_GAMMA, ModelSpec, TrainConfig, TrainedModel

log = logging.getLogger("monotraj")

OUTPUT_DIR_ENV = "MONOTRAJ_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGENCE, EXIT_IO = 0, 2, 3, 4, 5
SUMMARY_COLUMNS = ("task", "model", "accuracy", "r_nb", "r_cp", "omega_nb", "omega_cp")
MODEL_NAMES = ("logreg", "mlp", "rmlp")


class UsageError(ConfigError):
    """Bad flag value or flag combination."""


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return value


def _real(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return value


def _nonneg(text):
    value = _real(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value:g}")
    return value


def _positive(text):
    value = _real(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value:g}")
    return value


def _fraction(text):
    value = _real(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value:g}")
    return value


def _int_list(text):
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"widths must be positive, got {text!r}")
    return values


def _real_triple(text):
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(values) != 3 or not (values[0] < values[1] < values[2]):
        raise argparse.ArgumentTypeError(f"expected three strictly increasing numbers, got {text!r}")
    return values


def _batch(text):
    if text == "all":
        return "all"
    return _positive_int(text)


def _task(text):
    try:
        return TaskSpec.parse(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _task_list(text):
    return tuple(_task(t) for t in text.split(",") if t.strip())


def _model_list(text):
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [n for n in names if n not in MODEL_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"models must be drawn from {','.join(MODEL_NAMES)}, got {text!r}")
    return names


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", metavar="FILE", help="flat key=value file; command-line flags override it")
    p.add_argument("--out-dir", metavar="DIR", help=f"output directory (default: ${OUTPUT_DIR_ENV} or .)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_generator_flags(p, required):
    req = " (required)" if required else ""
    p.add_argument("--subjects", type=_positive_int, help=f"number of subjects{req}")
    p.add_argument("--features", type=_positive_int, help=f"feature dimension d{req}")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--min-visits", type=_positive_int, default=1)
    p.add_argument("--max-visits", type=_positive_int, default=4)
    p.add_argument("--visit-spacing", type=_positive, default=1.0, help="mean years between visits")
    p.add_argument("--rate-mean", type=_real, default=0.25, help="mean latent progression per year")
    p.add_argument("--rate-std", type=_nonneg, default=0.1)
    p.add_argument("--noise-std", type=_nonneg, default=0.5, help="visit noise standard deviation")
    p.add_argument("--subject-effect-std", type=_nonneg, default=0.0, help="stable per-subject feature offset")
    p.add_argument("--reliability-spread", type=_nonneg, default=0.0)
    p.add_argument("--thresholds", type=_real_triple, default=(0.5, 1.5, 2.5), help="three stage cut points")
    p.add_argument("--factors", type=_positive_int, default=None, help="latent factor count q")
    p.add_argument("--link", choices=("logistic", "identity"), default="logistic")


def _add_train_flags(p):
    p.add_argument("--gamma", type=_nonneg, default=PAPER_GAMMA, help="regularizer weight; 0 gives the plain MLP")
    p.add_argument("--reg-mode", choices=("neighbor", "complete"), default="complete")
    p.add_argument("--weighting", choices=("years", "mean1", "unit"), default="years")
    p.add_argument("--epochs", type=_positive_int, default=None, help="default 300 (mlp) or 500 (logreg)")
    p.add_argument("--batch", type=_batch, default=None, help="subjects per batch or 'all'")
    p.add_argument("--lr", type=_positive, default=1e-3, help="learning rate")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--hidden", type=_int_list, default=(64, 64, 64, 32, 32, 32), help="comma-separated widths")
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.add_argument("--patience", type=_positive_int, default=None)
    p.add_argument("--l2", type=_nonneg, default=0.0, help="L2 penalty for the logistic baseline")
    p.add_argument("--residualize", action="store_true", help="regress out covariates fit on baseline HC visits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monotraj", description="Monotone risk trajectories for longitudinal cohorts.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    g = sub.add_parser("generate", help="draw a synthetic cohort and its latent sidecar")
    _add_common(g)
    _add_generator_flags(g, required=True)
    g.add_argument("--name", default="cohort", help="file stem for <name>.csv and <name>_latent.csv")

    t = sub.add_parser("train", help="fit a model on one task")
    _add_common(t)
    t.add_argument("--cohort", metavar="CSV", help="cohort file (required)")
    t.add_argument("--task", type=_task, help="e.g. HC_EMCI (required)")
    t.add_argument("--model", choices=("mlp", "logreg"), default="mlp")
    t.add_argument("--seed", type=_seed, default=0)
    _add_train_flags(t)
    t.add_argument("--output", metavar="JSON", help="checkpoint path (default: <out-dir>/model.json)")

    e = sub.add_parser("evaluate", help="score a cohort with a checkpoint or the latent oracle")
    _add_common(e)
    e.add_argument("--cohort", metavar="CSV", help="cohort file (required)")
    e.add_argument("--model", metavar="JSON", help="checkpoint from 'train'")
    e.add_argument("--oracle-latent", metavar="CSV", help="latent sidecar; scores visits by ground truth")
    e.add_argument("--task", type=_task, help="task filter (default: the checkpoint's task)")
    e.add_argument("--name", default="eval", help="file stem for <name>_report.txt and <name>_trajectories.csv")

    a = sub.add_parser("audit", help="violation metrics of external predictions")
    _add_common(a)
    a.add_argument("--input", metavar="CSV", help="subject_id,age,score[,label] file (required)")
    a.add_argument("--name", default="audit")

    x = sub.add_parser("experiment", help="split, cross-validate and compare models on all tasks")
    _add_common(x)
    _add_generator_flags(x, required=False)
    x.set_defaults(subjects=400, features=40)
    x.add_argument("--cohort", metavar="CSV", help="use this cohort instead of generating one")
    x.add_argument("--tasks", type=_task_list, default=PRESET_TASKS)
    x.add_argument("--models", type=_model_list, default=MODEL_NAMES)
    x.add_argument("--test-fraction", type=_fraction, default=0.2)
    x.add_argument("--folds", type=_positive_int, default=5)
    x.add_argument("--permutations", type=_positive_int, default=10_000)
    _add_train_flags(x)

    r = sub.add_parser("rerun", help="replay a run manifest")
    r.add_argument("manifest", metavar="MANIFEST")
    parser.subcommands = sub.choices
    return parser


def _read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"--config {path}, line {number}: expected key=value, got {raw!r}")
        out[key.strip().replace("_", "-")] = value.strip()
    return out


def _apply_config_file(parser, argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` fill in flags not given explicitly."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    sub = parser.subcommands[args.command]
    actions = {a.option_strings[-1].lstrip("-"): a for a in sub._actions if a.option_strings}
    extra = []
    for key, value in _read_config_file(args.config).items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            sub.error(f"--config: unknown key {key!r}")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                extra.append(action.option_strings[0])
            elif value.lower() not in ("0", "false", "no", "off"):
                sub.error(f"--config: {key} expects true or false, got {value!r}")
        else:
            extra += [action.option_strings[0], value]
    # file values first, so later command-line flags override them
    return parser.parse_args([args.command] + extra + list(argv[1:]))


# ---------------------------------------------------------------------------
# Run bookkeeping
# ---------------------------------------------------------------------------


def _out_dir(args) -> Path:
    base = args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _jsonable(value):
    if isinstance(value, TaskSpec):
        return value.name
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    return value


@dataclass
class RunManifest:
    command: str
    argv: list
    settings: dict
    seeds: dict
    inputs: dict
    outputs: dict
    duration_s: float

    def write(self, path) -> None:
        body = {
            "format": "monotraj-manifest",
            "version": __version__,
            "command": self.command,
            "argv": self.argv,
            "settings": self.settings,
            "seeds": self.seeds,
            "inputs": {k: {"path": str(p), "sha256": sha256_of(p)} for k, p in self.inputs.items()},
            "outputs": {k: {"path": str(p), "sha256": sha256_of(p)} for k, p in self.outputs.items()},
            "duration_s": round(self.duration_s, 3),
        }
        atomic_write_text(path, json.dumps(body, indent=2, sort_keys=True) + "\n")


def _finish(args, argv, started, seeds, inputs, outputs) -> Path:
    settings = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    manifest = RunManifest(args.command, list(argv), settings, seeds, inputs, outputs, time.monotonic() - started)
    path = _out_dir(args) / f"{args.command}.manifest.json"
    manifest.write(path)
    return path


def _require(parser, args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            parser.error(f"the following argument is required: --{name}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def gen_config_from_args(args) -> synthgen.GenConfig:
    if args.min_visits > args.max_visits:
        raise UsageError(f"--min-visits ({args.min_visits}) exceeds --max-visits ({args.max_visits})")
    return synthgen.GenConfig(
        n_subjects=args.subjects,
        d=args.features,
        visits_per_subject=(args.min_visits, args.max_visits),
        visit_spacing_years=args.visit_spacing,
        latent_rate=(args.rate_mean, args.rate_std),
        noise_std=args.noise_std,
        subject_effect_std=args.subject_effect_std,
        reliability_spread=args.reliability_spread,
        stage_thresholds=tuple(args.thresholds),
        n_factors=args.factors,
        link=args.link,
        seed=args.seed,
    )


def model_spec_from_args(args, kind: str, gamma: Optional[float] = None, seed: int = 0) -> ModelSpec:
    default_epochs = 500 if kind == "logreg" else 300
    epochs = args.epochs or default_epochs
    config = TrainConfig(
        gamma=args.gamma if gamma is None else gamma,
        reg_mode=args.reg_mode,
        epochs=epochs,
        subjects_per_batch=args.batch,
        learning_rate=args.lr,
        optimizer=args.optimizer,
        seed=seed,
        hidden=tuple(args.hidden),
        activation=args.activation,
        weighting=args.weighting,
        patience=args.patience,
    )
    return ModelSpec(kind, config, logreg_l2=args.l2, logreg_epochs=epochs, residualize=args.residualize)


def cmd_generate(args, parser, argv, started) -> int:
    _require(parser, args, "subjects", "features")
    config = gen_config_from_args(args)
    out = _out_dir(args)
    synth = synthgen.generate(config)
    cohort_path, latent_path = out / f"{args.name}.csv", out / f"{args.name}_latent.csv"
    synthgen.write_synthetic(synth, cohort_path, latent_path)
    _finish(args, argv, started, {"generator": config.seed}, {}, {"cohort": cohort_path, "latent": latent_path})
    print(f"wrote {cohort_path} ({synth.cohort.n_subjects} subjects, {synth.cohort.n_visits} visits)")
    return EXIT_OK


def cmd_train(args, parser, argv, started) -> int:
    _require(parser, args, "cohort", "task")
    spec = model_spec_from_args(args, args.model, seed=args.seed)
    full = load_cohort(args.cohort)
    cov = fit_covariate_model(full) if args.residualize else None
    model = trainer.fit_model(select_task(full, args.task), spec, covariate_model=cov)
    out = _out_dir(args)
    path = Path(args.output) if args.output else out / "model.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(path, json.dumps(model.to_dict()))
    _finish(args, argv, started, {"train": args.seed}, {"cohort": args.cohort}, {"checkpoint": path})
    print(f"wrote {path} (final loss {model.loss_history[-1]:.6g})")
    return EXIT_OK


def _oracle_scores(cohort: Cohort, sidecar) -> np.ndarray:
    table = synthgen.read_latent_sidecar(sidecar)
    scores = []
    for s in cohort.subjects:
        rows = dict(table.get(s.id, []))
        for v in s.visits:
            if v.age not in rows:
                raise DataError(f"latent sidecar has no entry for subject {s.id!r} at age {v.age!r}")
            scores.append(rows[v.age])
    return np.asarray(scores, dtype=np.float64)


def cmd_evaluate(args, parser, argv, started) -> int:
    _require(parser, args, "cohort")
    if (args.model is None) == (args.oracle_latent is None):
        parser.error("exactly one of --model and --oracle-latent is required")
    cohort = load_cohort(args.cohort)
    inputs = {"cohort": args.cohort}
    if args.model is not None:
        model = TrainedModel.load(args.model)
        inputs["model"] = args.model
        task = args.task or (TaskSpec.parse(model.task) if model.task else None)
        if task is not None:
            cohort = select_task(cohort, task)
        report = metrics.evaluate(model, cohort)
    else:
        inputs["latent"] = args.oracle_latent
        if args.task is not None:
            cohort = select_task(cohort, args.task)
        report = metrics.report_from_trajectories(
            metrics.trajectories_from_scores(cohort, _oracle_scores(cohort, args.oracle_latent))
        )
    out = _out_dir(args)
    report_path, traj_path = out / f"{args.name}_report.txt", out / f"{args.name}_trajectories.csv"
    report.write(report_path)
    metrics.export_trajectories(report, traj_path)
    _finish(args, argv, started, {}, inputs, {"report": report_path, "trajectories": traj_path})
    sys.stdout.write(report_path.read_text())
    return EXIT_OK


def cmd_audit(args, parser, argv, started) -> int:
    _require(parser, args, "input")
    report = metrics.report_from_trajectories(metrics.read_trajectories(args.input))
    path = _out_dir(args) / f"{args.name}_report.txt"
    report.write(path)
    _finish(args, argv, started, {}, {"input": args.input}, {"report": path})
    sys.stdout.write(path.read_text())
    return EXIT_OK


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


@dataclass
class ExperimentRun:
    task: str
    model: str
    cv: trainer.CVResult

    def summary_row(self) -> dict:
        row = {"task": self.task, "model": self.model}
        for key in SUMMARY_COLUMNS[2:]:
            row[key] = self.cv.fold_mean(key)
        return row

    def heldout_row(self) -> dict:
        row = {"task": self.task, "model": self.model}
        for key in SUMMARY_COLUMNS[2:]:
            row[key] = getattr(self.cv.test_report, key)
        return row


def experiment_specs(args, seed: int) -> dict:
    return {
        "logreg": model_spec_from_args(args, "logreg", gamma=0.0, seed=seed),
        "mlp": model_spec_from_args(args, "mlp", gamma=0.0, seed=seed),
        "rmlp": model_spec_from_args(args, "mlp", gamma=args.gamma, seed=seed),
    }


def run_experiment(cohort: Cohort, tasks, specs: dict, plan: SplitPlan, covariate_model=None) -> list:
    """Cross-validate every (task, model) pair; returns ExperimentRun list in order."""
    runs = []
    for task in tasks:
        task_cohort = select_task(cohort, task)
        for name, spec in specs.items():
            log.info("task %s model %s", task.name, name)
            try:
                cv = trainer.cross_validate(task_cohort, plan, spec, covariate_model)
            except DivergenceError as exc:
                raise DivergenceError(exc.epoch, exc.learning_rate, f"{task.name}/{name}: {exc}") from exc
            except DataError as exc:
                raise type(exc)(f"{task.name}/{name}: {exc}") from exc
            runs.append(ExperimentRun(task.name, name, cv))
    return runs


def write_table(rows: Sequence[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([row["task"], row["model"]] + [repr(float(row[k])) for k in SUMMARY_COLUMNS[2:]])


def correlation_lines(rows: Sequence[dict], n_permutations: int, seed: int) -> list:
    lines = []
    for mode, r_key, w_key in (("neighbor", "r_nb", "omega_nb"), ("complete", "r_cp", "omega_cp")):
        points = [(row[r_key], row[w_key]) for row in rows]
        try:
            r, p = metrics.ratio_gap_correlation(points, n_permutations, seed)
            lines.append(f"{mode}_pearson={r!r}")
            lines.append(f"{mode}_p_value={p!r}")
        except DataError as exc:
            lines.append(f"{mode}_pearson=nan")
            lines.append(f"# {mode}: {exc}")
    lines.append(f"n_runs={len(rows)}")
    return lines


def cmd_experiment(args, parser, argv, started) -> int:
    out = _out_dir(args)
    inputs, seeds = {}, {"master": args.seed, "split": args.seed, "train_base": args.seed}
    if args.cohort:
        cohort = load_cohort(args.cohort)
        inputs["cohort"] = args.cohort
    else:
        config = gen_config_from_args(args)
        cohort = synthgen.generate(config).cohort
        seeds["generator"] = config.seed
    plan = SplitPlan(args.test_fraction, args.folds, args.seed)
    specs = {k: v for k, v in experiment_specs(args, args.seed).items() if k in args.models}
    cov = fit_covariate_model(cohort) if args.residualize else None
    runs = run_experiment(cohort, args.tasks, specs, plan, cov)

    summary_rows = [r.summary_row() for r in runs]
    outputs = {"summary": out / "summary.csv", "heldout": out / "heldout.csv", "correlation": out / "correlation.txt"}
    write_table(summary_rows, outputs["summary"])
    write_table([r.heldout_row() for r in runs], outputs["heldout"])
    atomic_write_text(
        outputs["correlation"], "\n".join(correlation_lines(summary_rows, args.permutations, args.seed)) + "\n"
    )
    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    for r in runs:
        path = traj_dir / f"{r.task}_{r.model}.csv"
        metrics.export_trajectories(r.cv.test_report, path)
        outputs[f"trajectories/{r.task}_{r.model}"] = path
    _finish(args, argv, started, seeds, inputs, outputs)
    sys.stdout.write(outputs["summary"].read_text())
    return EXIT_OK


def cmd_rerun(args, parser, argv, started) -> int:
    try:
        data = json.loads(Path(args.manifest).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.manifest} is not a manifest: {exc}") from None
    if data.get("format") != "monotraj-manifest":
        raise UsageError(f"{args.manifest} is not a monotraj manifest")
    return main(data["argv"])


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "audit": cmd_audit,
    "experiment": cmd_experiment,
    "rerun": cmd_rerun,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"monotraj: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    started = time.monotonic()
    try:
        return COMMANDS[args.command](args, parser.subcommands[args.command], argv, started)
    except SystemExit as exc:
        return int(exc.code or 0)
    except MonotrajError as exc:
        print(f"monotraj: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (EXIT_USAGE, EXIT_DATA, EXIT_DIVERGENCE) else EXIT_DATA
    except OSError as exc:
        print(f"monotraj: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
