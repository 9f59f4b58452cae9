"""Exact (quadratic-cost) t-SNE for two-component embedding plots.

Input affinities use per-point Gaussian kernels whose bandwidths are
calibrated by binary search so every point sees the same effective
neighbor count (the perplexity). The low-dimensional layout minimizes
KL(P || Q) where Q is a Student-t kernel, by gradient descent with
momentum and an early exaggeration phase.

No tree or interpolation approximations: desk-scale inputs (n up to a
few thousand) keep the O(n^2) computation cheap and make the analytic
gradient directly checkable against finite differences.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationWarning, ConfigError

MACHINE_EPSILON = np.finfo(np.float64).eps
CALIBRATION_TOL = 1e-5
CALIBRATION_REFINE = 1e-8  # keep bisecting well past the declared tolerance
CALIBRATION_MAX_ITER = 200
DUPLICATE_JITTER = 1e-10


@dataclass(frozen=True)
class TsneConfig:
    """Optimizer settings for run_tsne.

    The momentum term switches from `momentum_start` to `momentum_final`
    at iteration `momentum_switch`; affinities are multiplied by
    `early_exaggeration` for the first `exaggeration_until` iterations.
    Output dimensionality is fixed at 2.
    """

    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 4.0
    exaggeration_until: int = 100
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    init_std: float = 1e-4
    seed: int = 0
    output_dim: int = 2

    def __post_init__(self):
        if self.output_dim != 2:
            raise ConfigError("output_dim is fixed at 2", field="output_dim")
        if self.perplexity <= 1.0:
            raise ConfigError("perplexity must exceed 1", field="perplexity")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1", field="iterations")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive", field="learning_rate")
        if self.early_exaggeration < 1.0:
            raise ConfigError(
                "early_exaggeration must be >= 1", field="early_exaggeration"
            )
        if not 0.0 <= self.momentum_start < 1.0 or not 0.0 <= self.momentum_final < 1.0:
            raise ConfigError("momentum terms must lie in [0, 1)", field="momentum")
        if self.init_std <= 0:
            raise ConfigError("init_std must be positive", field="init_std")


@dataclass
class AffinityMatrix:
    """Symmetric joint probabilities P plus the calibrated bandwidths."""

    P: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.sigmas = np.asarray(self.sigmas, dtype=np.float64)


def _row_entropy_bits(sq_row: np.ndarray, beta: float):
    """Shannon entropy (bits) and conditional probabilities of the
    Gaussian row kernel exp(-beta * d^2), computed with a shifted
    exponent for stability."""
    shifted = sq_row - sq_row.min()
    w = np.exp(-beta * shifted)
    sum_w = w.sum()
    p = w / sum_w
    # H = ln(sum_w) + beta * E[d^2], then converted from nats to bits
    h_nats = np.log(sum_w) + beta * float(np.dot(sq_row - sq_row.min(), p))
    return h_nats / np.log(2.0), p


def row_affinities(sq_distances_row, sigma: float) -> np.ndarray:
    """Conditional probabilities of one point's Gaussian kernel at a
    given bandwidth (diagonal entry already excluded from the row)."""
    row = np.asarray(sq_distances_row, dtype=np.float64)
    beta = 0.5 / (sigma * sigma)
    _, p = _row_entropy_bits(row, beta)
    return p


def calibrate_sigma(sq_distances_row, target_perplexity: float) -> float:
    """Bandwidth whose row kernel has the target perplexity.

    Binary search on the precision beta = 1/(2 sigma^2) until
    |log2(achieved perplexity) - log2(target)| < 1e-5, at most 200
    iterations. If the target is unreachable (e.g. all neighbors
    equidistant), the best sigma found is returned under a
    CalibrationWarning.
    """
    row = np.asarray(sq_distances_row, dtype=np.float64)
    if row.ndim != 1 or row.size < 2 or not np.all(np.isfinite(row)):
        raise ConfigError("distance row needs >= 2 finite entries")
    if target_perplexity >= row.size:
        raise ConfigError(
            f"target perplexity {target_perplexity} must be below "
            f"the row length {row.size}"
        )
    if target_perplexity <= 1.0:
        raise ConfigError("target perplexity must exceed 1")

    goal = np.log2(target_perplexity)
    beta = 1.0
    beta_lo, beta_hi = 0.0, np.inf
    best_beta, best_err = beta, np.inf
    for _ in range(CALIBRATION_MAX_ITER):
        h_bits, _ = _row_entropy_bits(row, beta)
        err = h_bits - goal
        if abs(err) < best_err:
            best_err, best_beta = abs(err), beta
        if abs(err) < CALIBRATION_REFINE:
            return float(np.sqrt(0.5 / beta))
        if err > 0:
            # entropy too high -> kernel too wide -> raise beta
            beta_lo = beta
            beta = beta * 2.0 if beta_hi == np.inf else 0.5 * (beta_lo + beta_hi)
        else:
            beta_hi = beta
            beta = 0.5 * (beta_lo + beta_hi)

    if best_err < CALIBRATION_TOL:
        return float(np.sqrt(0.5 / best_beta))
    warnings.warn(
        f"perplexity {target_perplexity} unreachable after "
        f"{CALIBRATION_MAX_ITER} iterations (residual {best_err:.3g} in log2); "
        "returning best sigma",
        CalibrationWarning,
    )
    return float(np.sqrt(0.5 / best_beta))


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def joint_affinities(X, perplexity: float) -> AffinityMatrix:
    """Symmetrized joint probabilities p_ij = (p_{j|i} + p_{i|j}) / (2n).

    Perplexity is clamped to (n-1)/3 with a warning when the input is
    too small for the requested value. Duplicate points are jittered by
    1e-10 (seeded, deterministic) so calibration stays solvable.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 4:
        raise ConfigError("joint_affinities needs at least 4 points")
    n = X.shape[0]
    if perplexity <= 1.0:
        raise ConfigError("perplexity must exceed 1", field="perplexity")

    # clamp floor keeps the target valid (> 1) for the smallest inputs
    limit = max((n - 1) / 3.0, 1.5)
    if perplexity > limit:
        warnings.warn(
            f"perplexity {perplexity} too large for n={n}; clamped to {limit}",
            UserWarning,
        )
        perplexity = limit

    d2 = _pairwise_sq_dists(X)
    off_diag = d2 + np.diag(np.full(n, np.inf))
    if np.any(off_diag == 0.0):
        warnings.warn(
            "duplicate points detected; applying 1e-10 jitter", UserWarning
        )
        jitter_rng = np.random.default_rng(0)
        X = X + jitter_rng.normal(0.0, DUPLICATE_JITTER, size=X.shape)
        d2 = _pairwise_sq_dists(X)

    cond = np.zeros((n, n), dtype=np.float64)
    sigmas = np.zeros(n, dtype=np.float64)
    idx = np.arange(n)
    for i in range(n):
        row = d2[i, idx != i]
        sigma = calibrate_sigma(row, perplexity)
        sigmas[i] = sigma
        cond[i, idx != i] = row_affinities(row, sigma)

    P = (cond + cond.T) / (2.0 * n)
    return AffinityMatrix(P, sigmas)


def _student_q(Y: np.ndarray):
    """Student-t kernel weights and normalized Q for a 2-D layout."""
    d2 = _pairwise_sq_dists(Y)
    w = 1.0 / (1.0 + d2)
    np.fill_diagonal(w, 0.0)
    total = w.sum()
    Q = np.maximum(w / total, MACHINE_EPSILON)
    return w, Q


def kl_divergence(P, Y) -> float:
    """KL(P || Q(Y)) where Q is the Student-t kernel of the layout.

    Defined for any n >= 2; with n = 2 both distributions are forced to
    (1/2, 1/2) and the divergence is exactly zero.
    """
    P = np.asarray(P, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    _, Q = _student_q(Y)
    mask = P > 0.0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def kl_gradient(P, Y) -> np.ndarray:
    """Analytic layout gradient of KL(P || Q):

        dKL/dy_i = 4 * sum_j (p_ij - q_ij) * (1 + |y_i - y_j|^2)^-1 * (y_i - y_j)
    """
    P = np.asarray(P, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    w, Q = _student_q(Y)
    coeff = (P - Q) * w
    # sum_j coeff_ij (y_i - y_j) = rowsum(coeff) y_i - coeff @ Y
    grad = 4.0 * (coeff.sum(axis=1)[:, None] * Y - coeff @ Y)
    return grad


def run_tsne(X, cfg: TsneConfig):
    """Gradient descent on KL(P || Q) for a 2-D layout.

    Returns (Y, kl_trace) where kl_trace[k] is the divergence against
    the true (unexaggerated) P after iteration k+1. Deterministic for a
    fixed config.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 4:
        raise ConfigError("run_tsne needs at least 4 points")
    n = X.shape[0]

    affinity = joint_affinities(X, cfg.perplexity)
    P = affinity.P

    rng = np.random.default_rng(cfg.seed)
    Y = rng.normal(0.0, cfg.init_std, size=(n, cfg.output_dim))
    velocity = np.zeros_like(Y)
    kl_trace = np.zeros(cfg.iterations, dtype=np.float64)

    for it in range(cfg.iterations):
        P_eff = P * cfg.early_exaggeration if it < cfg.exaggeration_until else P
        grad = kl_gradient(P_eff, Y)
        momentum = (
            cfg.momentum_start if it < cfg.momentum_switch else cfg.momentum_final
        )
        velocity = momentum * velocity - cfg.learning_rate * grad
        Y = Y + velocity
        kl_trace[it] = kl_divergence(P, Y)

    return Y, kl_trace


def layout_to_csv(Y, records) -> str:
    """Serialize a layout and its source records as
    `x,y,subject,realness,method` CSV (one row per point)."""
    from .embeddings import METHOD_NAMES

    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape[0] != len(records):
        raise ConfigError("layout and record count differ")
    lines = ["x,y,subject,realness,method"]
    for row, rec in zip(Y, records):
        # same byte convention as the EMB1 format: 0 real, 1 fake
        realness = 1 if rec.fake else 0
        lines.append(
            f"{float(row[0])!r},{float(row[1])!r},"
            f"{rec.subject_id},{realness},{METHOD_NAMES[rec.method]}"
        )
    return "\n".join(lines) + "\n"


def kl_trace_to_csv(kl_trace) -> str:
    """Serialize a KL trace as `iteration,kl` CSV (iterations 1-based)."""
    lines = ["iteration,kl"]
    for k, value in enumerate(np.asarray(kl_trace, dtype=np.float64), start=1):
        lines.append(f"{k},{float(value)!r}")
    return "\n".join(lines) + "\n"


__all__ = [
    "TsneConfig",
    "AffinityMatrix",
    "calibrate_sigma",
    "row_affinities",
    "joint_affinities",
    "kl_divergence",
    "kl_gradient",
    "run_tsne",
    "layout_to_csv",
    "kl_trace_to_csv",
    "MACHINE_EPSILON",
]
