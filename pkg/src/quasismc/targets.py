"""Benchmark posteriors: log-densities, analytic gradients, and data loading.

Four unnormalized targets are provided: a 5-d diagonal Gaussian, a 100-d
ill-conditioned Gaussian, the 2-d banana density, and Bayesian logistic
regression on the numeric German-credit data.  Every density and gradient is
vectorized over leading axes: ``log_density`` maps shape (..., D) to (...)
and ``grad_log_density`` maps (..., D) to (..., D).
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

__all__ = [
    "TargetModel",
    "GermanCreditDataset",
    "IllConditionedSpec",
    "gaussian_target",
    "ill_conditioned_target",
    "banana_target",
    "load_german_credit",
    "default_german_credit_path",
    "split_german_credit",
    "logistic_target",
    "sigmoid",
    "sample_prior",
]

#: Env var pointing at a real ``german.data-numeric`` file; when unset the
#: bundled synthetic stand-in with the same layout is used.
GERMAN_CREDIT_ENV_VAR = "GERMAN_CREDIT_PATH"

_PRIOR_STREAM = 11
_SPLIT_STREAM = 13
_ILL_COND_STREAM = 17


@dataclass(frozen=True)
class TargetModel:
    """An unnormalized target density with its analytic gradient.

    Parameters
    ----------
    name : str
        CLI identifier (``gaussian``, ``ill-gauss``, ``banana``,
        ``german-credit``).
    dimension : int
        Dimensionality D of the parameter space.
    log_density, grad_log_density : callable
        Vectorized over leading axes; additive constants are dropped.
    true_mean, true_variance : ndarray or None
        Per-coordinate ground-truth moments where known analytically.
    """

    name: str
    dimension: int
    log_density: Callable[[np.ndarray], np.ndarray]
    grad_log_density: Callable[[np.ndarray], np.ndarray]
    true_mean: np.ndarray | None = None
    true_variance: np.ndarray | None = None
    #: Optional fused evaluation returning (log_density, gradient) in one
    #: pass; hot loops use it when present, else fall back to two calls.
    log_density_and_grad: Callable[[np.ndarray], tuple] | None = None

    def density_and_grad(self, theta: np.ndarray) -> tuple:
        if self.log_density_and_grad is not None:
            return self.log_density_and_grad(theta)
        return self.log_density(theta), self.grad_log_density(theta)


@dataclass(frozen=True)
class GermanCreditDataset:
    """Standardized design matrix and binary labels (0 = good, 1 = bad)."""

    features: np.ndarray
    labels: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class IllConditionedSpec:
    """Covariance factors of the 100-d ill-conditioned Gaussian."""

    seed: int
    eigenvalues: np.ndarray
    rotation: np.ndarray  # orthogonal Q; covariance = Q diag(eigenvalues) Q^T

    @property
    def covariance(self) -> np.ndarray:
        return (self.rotation * self.eigenvalues) @ self.rotation.T

    @property
    def condition_number(self) -> float:
        return float(self.eigenvalues.max() / self.eigenvalues.min())


def gaussian_target() -> TargetModel:
    """5-d Gaussian, mean (-4,-2,0,2,4), diagonal covariance (1,1.5,2,2.5,3)."""
    mu = np.array([-4.0, -2.0, 0.0, 2.0, 4.0])
    var = np.array([1.0, 1.5, 2.0, 2.5, 3.0])

    def log_density(theta):
        theta = np.asarray(theta, dtype=np.float64)
        return -0.5 * np.sum((theta - mu) ** 2 / var, axis=-1)

    def grad_log_density(theta):
        theta = np.asarray(theta, dtype=np.float64)
        return -(theta - mu) / var

    def log_density_and_grad(theta):
        theta = np.asarray(theta, dtype=np.float64)
        diff = theta - mu
        grad = -diff / var
        return 0.5 * np.sum(diff * grad, axis=-1), grad

    return TargetModel(
        name="gaussian",
        dimension=5,
        log_density=log_density,
        grad_log_density=grad_log_density,
        true_mean=mu,
        true_variance=var,
        log_density_and_grad=log_density_and_grad,
    )


def make_ill_conditioned_spec(seed: int, dimension: int = 100) -> IllConditionedSpec:
    """Draw the rotation and eigenvalues of the ill-conditioned covariance.

    The rotation is Haar-distributed: QR of a standard-normal matrix with the
    sign convention diag(R) > 0.  Eigenvalues are i.i.d. Gamma(0.5, 1),
    floored at 1e-8 so the covariance is never numerically singular.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, _ILL_COND_STREAM)))
    normal = rng.standard_normal((dimension, dimension))
    q, r = np.linalg.qr(normal)
    q = q * np.sign(np.diag(r))
    lam = np.maximum(rng.gamma(shape=0.5, scale=1.0, size=dimension), 1e-8)
    return IllConditionedSpec(seed=seed, eigenvalues=lam, rotation=q)


def ill_conditioned_target(seed: int = 0) -> TargetModel:
    """100-d zero-mean Gaussian with a random rotated ill-conditioned covariance."""
    spec = make_ill_conditioned_spec(seed)
    q = spec.rotation
    lam = spec.eigenvalues

    # With covariance Q diag(lam) Q^T, the precision is Q diag(1/lam) Q^T:
    # rotate into the eigenbasis once and work coordinate-wise there.
    def log_density(theta):
        y = np.asarray(theta, dtype=np.float64) @ q
        return -0.5 * np.sum(y * y / lam, axis=-1)

    def grad_log_density(theta):
        y = np.asarray(theta, dtype=np.float64) @ q
        return -(y / lam) @ q.T

    def log_density_and_grad(theta):
        y = np.asarray(theta, dtype=np.float64) @ q
        scaled = y / lam
        return -0.5 * np.sum(y * scaled, axis=-1), -scaled @ q.T

    variance = np.sum(q * q * lam, axis=1)
    return TargetModel(
        name="ill-gauss",
        dimension=spec.eigenvalues.size,
        log_density=log_density,
        grad_log_density=grad_log_density,
        true_mean=np.zeros(spec.eigenvalues.size),
        true_variance=variance,
        log_density_and_grad=log_density_and_grad,
    )


def banana_target() -> TargetModel:
    """2-d banana density: theta_1 ~ N(0, 10), theta_2 | theta_1 ~ N(0.03(theta_1^2 - 100), 1)."""
    curvature = 0.03

    def _residual(theta):
        return theta[..., 1] - curvature * (theta[..., 0] ** 2 - 100.0)

    def log_density(theta):
        theta = np.asarray(theta, dtype=np.float64)
        r = _residual(theta)
        return -theta[..., 0] ** 2 / 20.0 - 0.5 * r * r

    def grad_log_density(theta):
        theta = np.asarray(theta, dtype=np.float64)
        r = _residual(theta)
        grad = np.empty_like(theta)
        grad[..., 0] = -theta[..., 0] / 10.0 + 2.0 * curvature * theta[..., 0] * r
        grad[..., 1] = -r
        return grad

    def log_density_and_grad(theta):
        theta = np.asarray(theta, dtype=np.float64)
        r = _residual(theta)
        grad = np.empty_like(theta)
        grad[..., 0] = -theta[..., 0] / 10.0 + 2.0 * curvature * theta[..., 0] * r
        grad[..., 1] = -r
        return -theta[..., 0] ** 2 / 20.0 - 0.5 * r * r, grad

    # E[theta_2] = 0.03 (E[theta_1^2] - 100); Var(theta_2) adds the
    # propagated Var(theta_1^2) = 2 * 10^2 term to the unit noise.
    true_mean = np.array([0.0, curvature * (10.0 - 100.0)])
    true_variance = np.array([10.0, 1.0 + curvature ** 2 * 200.0])
    return TargetModel(
        name="banana",
        dimension=2,
        log_density=log_density,
        grad_log_density=grad_log_density,
        true_mean=true_mean,
        true_variance=true_variance,
        log_density_and_grad=log_density_and_grad,
    )


def default_german_credit_path() -> str:
    """Path from $GERMAN_CREDIT_PATH, else the bundled synthetic stand-in."""
    override = os.environ.get(GERMAN_CREDIT_ENV_VAR)
    if override:
        return override
    return str(resources.files("quasismc") / "data" / "german_synthetic.data-numeric")


def load_german_credit(path: str | None = None) -> GermanCreditDataset:
    """Load a file in UCI ``german.data-numeric`` layout.

    Expects 1000 whitespace-separated integer rows: 24 feature columns plus
    one label column in {1, 2}.  Labels are remapped 1 -> 0 (good credit) and
    2 -> 1 (bad credit); feature columns are z-scored (sample std, ddof=1).
    Constant columns standardize with divisor 1 and a warning.
    """
    if path is None:
        path = default_german_credit_path()
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IOError(f"cannot read German-credit data file {path!r}: {exc}") from exc

    rows = []
    labels = []
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 25:
            raise ValueError(
                f"{path}:{lineno}: expected 24 feature columns + 1 label, "
                f"got {len(parts)} fields")
        try:
            values = [int(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-integer field: {exc}") from exc
        if values[-1] not in (1, 2):
            raise ValueError(
                f"{path}:{lineno}: label must be 1 or 2, got {values[-1]}")
        rows.append(values[:-1])
        labels.append(values[-1] - 1)

    if len(rows) != 1000:
        raise ValueError(f"{path}: expected 1000 data rows, got {len(rows)}")

    features = np.asarray(rows, dtype=np.float64)
    labels_arr = np.asarray(labels, dtype=np.int64)
    if labels_arr.min() == labels_arr.max():
        raise ValueError(f"{path}: labels contain a single class")

    mean = features.mean(axis=0)
    std = features.std(axis=0, ddof=1)
    constant = std == 0.0
    if np.any(constant):
        warnings.warn(
            f"constant feature column(s) {np.flatnonzero(constant).tolist()} "
            "left unscaled", stacklevel=2)
        std = np.where(constant, 1.0, std)
    features = (features - mean) / std
    return GermanCreditDataset(features=features, labels=labels_arr)


def split_german_credit(
    dataset: GermanCreditDataset, test_fraction: float = 0.2, seed: int = 0,
) -> tuple[GermanCreditDataset, GermanCreditDataset]:
    """Seeded row split into (train, held-out test) datasets."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _SPLIT_STREAM)))
    n = dataset.n_rows
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    make = lambda idx: GermanCreditDataset(  # noqa: E731
        features=dataset.features[idx], labels=dataset.labels[idx])
    return make(train_idx), make(test_idx)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def design_matrix(dataset: "GermanCreditDataset | np.ndarray") -> np.ndarray:
    """Feature rows with an appended intercept column of ones.

    Accepts either a dataset object or a bare (rows, features) array.
    """
    features = dataset if isinstance(dataset, np.ndarray) else dataset.features
    features = np.asarray(features, dtype=np.float64)
    return np.hstack([features, np.ones((features.shape[0], 1))])


def logistic_target(dataset: GermanCreditDataset) -> TargetModel:
    """Bayesian logistic regression with a standard-normal coefficient prior.

    log pi(theta) = sum_n [y_n log s(x_n . theta) + (1 - y_n) log(1 - s(...))]
                    - ||theta||^2 / 2,
    with the log-sigmoids evaluated through logaddexp for stability.
    """
    x = design_matrix(dataset)
    y = dataset.labels.astype(np.float64)
    dim = x.shape[1]

    def log_density(theta):
        theta = np.asarray(theta, dtype=np.float64)
        z = theta @ x.T  # (..., N)
        loglik = -(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z))
        return np.sum(loglik, axis=-1) - 0.5 * np.sum(theta * theta, axis=-1)

    def grad_log_density(theta):
        theta = np.asarray(theta, dtype=np.float64)
        z = theta @ x.T
        return (y - sigmoid(z)) @ x - theta

    def log_density_and_grad(theta):
        theta = np.asarray(theta, dtype=np.float64)
        z = theta @ x.T
        loglik = -(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z))
        logp = np.sum(loglik, axis=-1) - 0.5 * np.sum(theta * theta, axis=-1)
        return logp, (y - sigmoid(z)) @ x - theta

    return TargetModel(
        name="german-credit",
        dimension=dim,
        log_density=log_density,
        grad_log_density=grad_log_density,
        log_density_and_grad=log_density_and_grad,
    )


def sample_prior(dimension: int, n_samples: int, seed: int) -> np.ndarray:
    """n_samples x dimension matrix of i.i.d. standard-normal draws.

    This N(0, I) distribution initializes the particle cloud for every
    target and doubles as the importance-weighting reference q0.
    """
    if dimension < 1 or n_samples < 1:
        raise ValueError("dimension and n_samples must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, _PRIOR_STREAM)))
    return rng.standard_normal((n_samples, dimension))


def prior_log_density(theta: np.ndarray) -> np.ndarray:
    """Unnormalized standard-normal log-density, matching sample_prior."""
    theta = np.asarray(theta, dtype=np.float64)
    return -0.5 * np.sum(theta * theta, axis=-1)
