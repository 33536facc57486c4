"""Experiment runner.

Parses flags (with per-target presets), executes repeated seeded sampler
runs, and writes the per-iteration, summary, classification, and
figure-data CSVs.  All floats are serialized with ``repr`` so identical
configs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .diagnostics import (
    ClassificationReport,
    classification_report,
    aggregate_summaries,
    ess_per_grad,
    summarize_run,
    write_classification_csv,
    write_summary_csv,
)
from .quasirandom import JitterScheme
from .smc import (
    PROPOSAL_KINDS,
    RunResult,
    SamplerConfig,
    normalize_weights,
    run_smc,
)
from .targets import (
    TargetModel,
    banana_target,
    default_german_credit_path,
    gaussian_target,
    ill_conditioned_target,
    load_german_credit,
    logistic_target,
    split_german_credit,
)

__all__ = ["ExperimentConfig", "UsageError", "parse_config", "run_experiment",
           "emit_figure_data", "main", "PRESETS", "TARGET_NAMES"]

# Per-target step sizes; everything else keeps the global defaults.
PRESETS = {
    "gaussian": {"target": "gaussian", "step_size": 0.1},
    "ill-gauss": {"target": "ill-gauss", "step_size": 0.001},
    "banana": {"target": "banana", "step_size": 0.01},
    "german-credit": {"target": "german-credit", "step_size": 0.001},
}
TARGET_NAMES = tuple(PRESETS)

_DEFAULTS = {
    "proposal": "chees",
    "jitter": "no-jitter",
    "particles": 1000,
    "iterations": 200,
    "burn_in": 100,
    "step_size": 0.1,
    "init_length": 5.0,
    "max_steps": 500,
    "max_depth": 11,
    "adam_lr": 0.025,
    "warmup": 100,
    "repeats": 10,
    "seed": 0,
    "out": ".",
    "sweep": False,
}


class UsageError(ValueError):
    """Invalid or conflicting command-line input."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description."""

    target: str
    proposal: str = "chees"
    jitter: str = "no-jitter"
    particles: int = 1000
    iterations: int = 200
    burn_in: int = 100
    step_size: float = 0.1
    init_length: float = 5.0
    max_steps: int = 500
    max_depth: int = 11
    adam_lr: float = 0.025
    warmup: int = 100
    repeats: int = 10
    seed: int = 0
    out: str = "."
    sweep: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="quasismc",
        description="Run a particle sampler benchmark and write CSV results.",
        allow_abbrev=False)
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="named experiment with its published step size")
    parser.add_argument("--target", choices=TARGET_NAMES)
    parser.add_argument("--proposal", choices=PROPOSAL_KINDS)
    parser.add_argument("--jitter",
                        choices=[scheme.value for scheme in JitterScheme])
    parser.add_argument("--particles", type=int)
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--burn-in", dest="burn_in", type=int)
    parser.add_argument("--step-size", dest="step_size", type=float)
    parser.add_argument("--init-L", dest="init_length", type=float)
    parser.add_argument("--max-steps", dest="max_steps", type=int)
    parser.add_argument("--max-depth", dest="max_depth", type=int)
    parser.add_argument("--adam-lr", dest="adam_lr", type=float)
    parser.add_argument("--warmup", type=int)
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory (created if missing)")
    parser.add_argument("--sweep", action="store_true", default=None,
                        help="run NUTS plus every jitter scheme with the "
                             "chees proposal")
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> ExperimentConfig:
    """Resolve flags over preset values over defaults, then validate."""
    namespace = _build_parser().parse_args(argv)
    preset = PRESETS.get(namespace.preset, {}) if namespace.preset else {}

    resolved = {}
    for key, default in _DEFAULTS.items():
        flag_value = getattr(namespace, key)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in preset:
            resolved[key] = preset[key]
        else:
            resolved[key] = default
    target = namespace.target or preset.get("target")
    if target is None:
        raise UsageError("one of --preset or --target is required")

    config = ExperimentConfig(target=target, **resolved)
    _validate(config)
    return config


def _validate(config: ExperimentConfig) -> None:
    if config.particles < 2:
        raise UsageError(f"particles must be >= 2, got {config.particles}")
    if config.iterations < 1:
        raise UsageError(f"iterations must be >= 1, got {config.iterations}")
    if not 0 <= config.burn_in < config.iterations:
        raise UsageError(f"burn-in must lie in [0, iterations), "
                         f"got {config.burn_in}")
    if config.step_size <= 0 and config.proposal != "rw":
        raise UsageError(f"step-size must be positive, got {config.step_size}")
    if config.init_length <= 0:
        raise UsageError(f"init-L must be positive, got {config.init_length}")
    if config.max_steps < 1:
        raise UsageError(f"max-steps must be >= 1, got {config.max_steps}")
    if config.max_depth < 0:
        raise UsageError(f"max-depth must be >= 0, got {config.max_depth}")
    if config.adam_lr <= 0:
        raise UsageError(f"adam-lr must be positive, got {config.adam_lr}")
    if config.warmup < 1:
        raise UsageError(f"warmup must be >= 1, got {config.warmup}")
    if config.repeats < 1:
        raise UsageError(f"repeats must be >= 1, got {config.repeats}")


def _make_target(config: ExperimentConfig):
    """Target model plus, for the credit task, the held-out evaluation split."""
    if config.target == "gaussian":
        return gaussian_target(), None
    if config.target == "ill-gauss":
        return ill_conditioned_target(seed=0), None
    if config.target == "banana":
        return banana_target(), None
    dataset = load_german_credit(default_german_credit_path())
    train, test = split_german_credit(dataset)
    return logistic_target(train), test


def _method_list(config: ExperimentConfig) -> list[tuple[str, str, str]]:
    """(label, proposal, jitter) triples; the sweep reproduces the full
    method table: NUTS plus the chees proposal under all 13 schemes."""
    if config.sweep:
        methods = [("nuts", "nuts", "no-jitter")]
        methods += [(scheme.value, "chees", scheme.value)
                    for scheme in JitterScheme]
        return methods
    label = config.jitter if config.proposal == "chees" else config.proposal
    return [(label, config.proposal, config.jitter)]


def _sampler_config(config: ExperimentConfig, proposal: str, jitter: str,
                    run_index: int) -> SamplerConfig:
    return SamplerConfig(
        n_particles=config.particles,
        n_iterations=config.iterations,
        burn_in=config.burn_in,
        proposal=proposal,
        jitter=jitter,
        step_size=config.step_size,
        init_length=config.init_length,
        max_steps=config.max_steps,
        max_depth=config.max_depth,
        adam_learning_rate=config.adam_lr,
        warmup=config.warmup,
        seed=config.seed + run_index,
    )


def _format_float(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def write_iterations_csv(path: Path, result: RunResult) -> None:
    """One row per iteration with scalar diagnostics then moment columns."""
    dim = result.ensemble.dimension
    header = ["iteration", "j_eff", "grad_evals", "cumulative_grad_evals",
              "resampled", "current_length", "mse_mean", "mse_var"]
    header += [f"mean_{d}" for d in range(dim)]
    header += [f"var_{d}" for d in range(dim)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for diag in result.iterations:
            row = [str(diag.iteration), repr(diag.j_eff),
                   str(diag.grad_evals), str(diag.cumulative_grad_evals),
                   str(int(diag.resampled)), repr(diag.current_length),
                   _format_float(diag.mse_mean), _format_float(diag.mse_var)]
            row += [repr(float(v)) for v in diag.est_mean]
            row += [repr(float(v)) for v in diag.est_var]
            writer.writerow(row)


def _mean_report(reports: Sequence[ClassificationReport]) -> ClassificationReport:
    return ClassificationReport(*(
        float(np.mean([getattr(r, f.name) for r in reports]))
        for f in fields(ClassificationReport)))


def emit_figure_data(out_dir: Path,
                     method_runs: dict[str, list[RunResult]],
                     written: list[Path]) -> None:
    """Write the figure-source CSVs next to the summary.

    ``neff_per_grad.csv`` and the two MSE files hold per-iteration values
    averaged across repeats, long-form (iteration, method, value); the
    scatter file holds the last 20 iterations' particle positions of each
    method's first run and is only written for 2-d targets.
    """
    some_runs = next(iter(method_runs.values()))
    n_iterations = len(some_runs[0].iterations)

    def write_long_form(name: str, per_iteration_value) -> None:
        path = out_dir / name
        written.append(path)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["iteration", "method", "value"])
            for method, runs in method_runs.items():
                for k in range(n_iterations):
                    values = [per_iteration_value(run.iterations[k])
                              for run in runs]
                    writer.writerow([str(k + 1), method,
                                     repr(float(np.mean(values)))])

    write_long_form("neff_per_grad.csv",
                    lambda diag: ess_per_grad(diag.j_eff, diag.grad_evals))
    has_mse = all(run.iterations[0].mse_mean is not None
                  for runs in method_runs.values() for run in runs)
    if has_mse:
        write_long_form("mse_mean.csv", lambda diag: diag.mse_mean)
        write_long_form("mse_var.csv", lambda diag: diag.mse_var)

    if some_runs[0].ensemble.dimension == 2:
        path = out_dir / "banana_samples.csv"
        written.append(path)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["method", "x", "y"])
            for method, runs in method_runs.items():
                for _, positions in runs[0].recent_positions:
                    for x, y in positions:
                        writer.writerow([method, repr(float(x)),
                                         repr(float(y))])


def run_experiment(config: ExperimentConfig) -> int:
    """Execute every (method, repeat) run and write all outputs.

    Any failure removes files already written so no partial result set
    survives.
    """
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        target, test_split = _make_target(config)
        methods = _method_list(config)
        multi_method = len(methods) > 1

        summary_rows = []
        classification_rows = []
        method_runs: dict[str, list[RunResult]] = {}
        for label, proposal, jitter in methods:
            runs = []
            for r in range(1, config.repeats + 1):
                result = run_smc(_sampler_config(config, proposal, jitter, r),
                                 target)
                runs.append(result)
                name = f"iterations_run{r}.csv"
                if multi_method:
                    method_dir = out_dir / label
                    method_dir.mkdir(exist_ok=True)
                    path = method_dir / name
                else:
                    path = out_dir / name
                written.append(path)
                write_iterations_csv(path, result)
            method_runs[label] = runs
            summary_rows.append((label, aggregate_summaries(
                [summarize_run(run.iterations, config.particles)
                 for run in runs])))
            if test_split is not None:
                classification_rows.append((label, _mean_report([
                    classification_report(
                        run.ensemble.positions, normalize_weights(run.ensemble),
                        test_split.features, test_split.labels)
                    for run in runs])))

        summary_path = out_dir / "summary.csv"
        written.append(summary_path)
        write_summary_csv(summary_path, summary_rows)

        json_path = out_dir / "summary.json"
        written.append(json_path)
        with open(json_path, "w") as handle:
            json.dump({label: {"grad_evals_per_sample": s.grad_evals_per_sample,
                               "ess_per_grad": None
                               if math.isnan(s.ess_per_grad)
                               else s.ess_per_grad}
                       for label, s in summary_rows},
                      handle, indent=2, sort_keys=True)
            handle.write("\n")

        if classification_rows:
            classification_path = out_dir / "classification.csv"
            written.append(classification_path)
            write_classification_csv(classification_path, classification_rows)

        emit_figure_data(out_dir, method_runs, written)
        return 0
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return run_experiment(config)
    except Exception as exc:  # module errors surface as runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
