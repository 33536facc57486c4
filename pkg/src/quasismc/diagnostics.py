"""Reported metrics: gradient-evaluation accounting, moment-MSE trajectories,
run summaries, and classification metrics from the logistic-regression
posterior."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .targets import design_matrix, sigmoid

__all__ = [
    "IterationDiagnostics",
    "ClassificationReport",
    "RunSummary",
    "ess_per_grad",
    "moment_mse",
    "midranks",
    "auroc_from_scores",
    "classification_report",
    "summarize_run",
    "aggregate_summaries",
    "SUMMARY_HEADER",
    "CLASSIFICATION_HEADER",
    "write_summary_csv",
    "write_classification_csv",
]

SUMMARY_HEADER = ("method", "grad_evals_per_sample", "ess_per_grad")
CLASSIFICATION_HEADER = ("method", "accuracy", "precision", "recall", "f1",
                         "specificity", "auroc")


@dataclass(frozen=True)
class IterationDiagnostics:
    """One sampler iteration's record.

    ``j_eff`` is the effective sample size measured before the resampling
    decision (the value that decision is made on).  Moment estimates come
    from the weights after the iteration's reweighting.  ``mse_mean`` and
    ``mse_var`` are present only when the target publishes true moments.
    ``current_length`` is the trajectory length in force for length-based
    proposals and 0.0 for proposals without one.
    """

    iteration: int
    j_eff: float
    grad_evals: int
    cumulative_grad_evals: int
    est_mean: np.ndarray
    est_var: np.ndarray
    mse_mean: Optional[float]
    mse_var: Optional[float]
    resampled: bool
    current_length: float


@dataclass(frozen=True)
class ClassificationReport:
    """Hard-threshold confusion metrics plus the ranking AUROC."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    auroc: float


@dataclass(frozen=True)
class RunSummary:
    """Per-run averages of the two efficiency metrics."""

    grad_evals_per_sample: float
    ess_per_grad: float


def ess_per_grad(j_eff: float, grad_evals: int) -> float:
    """Effective samples per gradient evaluation for one iteration.

    A gradient-free iteration (random walk) has no meaningful value and
    returns NaN, the not-applicable sentinel excluded from averages.
    """
    if grad_evals < 0:
        raise ValueError("gradient evaluations cannot be negative")
    if grad_evals == 0:
        return math.nan
    return j_eff / grad_evals


def moment_mse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Mean over dimensions of the squared estimation error."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    diff = estimate - truth
    return float(np.mean(diff * diff))


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the average of their rank range."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    ranks = np.empty(values.shape[0], dtype=float)
    i = 0
    while i < sorted_vals.shape[0]:
        j = i
        while j + 1 < sorted_vals.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc_from_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum statistic with midranks."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC is undefined when only one class is present")
    ranks = midranks(scores)
    rank_sum = float(np.sum(ranks[labels == 1]))
    u_statistic = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u_statistic / (n_pos * n_neg)


def _safe_ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else 0.0


def classification_report(
    positions: np.ndarray,
    normalized_weights: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    threshold: float = 0.5,
) -> ClassificationReport:
    """Score a weighted coefficient ensemble on a labelled dataset.

    The predictive probability for each point is the weighted posterior
    predictive mean sum_j w_j sigmoid(theta_j . x); probabilities at or
    above the threshold predict the positive class ("bad credit", label 1).
    """
    design = design_matrix(features)
    probabilities = sigmoid(design @ np.asarray(positions).T) @ normalized_weights
    predicted = probabilities >= threshold
    actual = np.asarray(labels) == 1

    tp = float(np.sum(predicted & actual))
    fp = float(np.sum(predicted & ~actual))
    fn = float(np.sum(~predicted & actual))
    tn = float(np.sum(~predicted & ~actual))

    precision = _safe_ratio(tp, tp + fp)
    recall = _safe_ratio(tp, tp + fn)
    return ClassificationReport(
        accuracy=_safe_ratio(tp + tn, tp + fp + fn + tn),
        precision=precision,
        recall=recall,
        f1=_safe_ratio(2.0 * precision * recall, precision + recall),
        specificity=_safe_ratio(tn, tn + fp),
        auroc=auroc_from_scores(probabilities, labels),
    )


def summarize_run(iterations: Sequence[IterationDiagnostics],
                  n_particles: int) -> RunSummary:
    """Average the two efficiency metrics over every iteration of one run.

    Both averages run over all iterations (burn-in included); iterations
    without gradient evaluations are excluded from the ESS-per-gradient
    average via the NaN sentinel.
    """
    if not iterations:
        raise ValueError("cannot summarize an empty diagnostics stream")
    grads_per_sample = [it.grad_evals / n_particles for it in iterations]
    ratios = [ess_per_grad(it.j_eff, it.grad_evals) for it in iterations]
    finite = [r for r in ratios if not math.isnan(r)]
    return RunSummary(
        grad_evals_per_sample=float(np.mean(grads_per_sample)),
        ess_per_grad=float(np.mean(finite)) if finite else math.nan,
    )


def aggregate_summaries(summaries: Sequence[RunSummary]) -> RunSummary:
    """Mean of per-run summaries across repeats."""
    if not summaries:
        raise ValueError("no run summaries to aggregate")
    ess_values = [s.ess_per_grad for s in summaries
                  if not math.isnan(s.ess_per_grad)]
    return RunSummary(
        grad_evals_per_sample=float(
            np.mean([s.grad_evals_per_sample for s in summaries])),
        ess_per_grad=float(np.mean(ess_values)) if ess_values else math.nan,
    )


def write_summary_csv(path, rows: Iterable[tuple[str, RunSummary]]) -> None:
    """One row per method: method, grad_evals_per_sample, ess_per_grad."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_HEADER)
        for method, summary in rows:
            writer.writerow([method, repr(summary.grad_evals_per_sample),
                             repr(summary.ess_per_grad)])


def write_classification_csv(path,
                             rows: Iterable[tuple[str, ClassificationReport]]
                             ) -> None:
    """One row per method with the six classification metrics."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CLASSIFICATION_HEADER)
        for method, report in rows:
            writer.writerow([
                method, repr(report.accuracy), repr(report.precision),
                repr(report.recall), repr(report.f1),
                repr(report.specificity), repr(report.auroc),
            ])
