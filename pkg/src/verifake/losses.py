"""Margin-based embedding losses with hand-derived gradients.

The unified margin family modifies the target-class logit of a cosine
classifier to cos(m1*theta + m2) - m3, scaled by s, and covers ArcFace,
CosFace, SphereFace and the combined margin as presets. Plain softmax
(unnormalized logits with bias) and an angular triplet loss complete the
six training objectives.

Inputs to the margin and triplet losses must be unit-norm; they are
renormalized exactly inside the loss so every gradient is taken through
the normalization map (tangential projection). That makes the analytic
gradients agree with central finite differences applied to the forward.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LabelError, NormalizationError

ARCCOS_EPS = 1e-7
# Gate for "approximately unit" inputs; loose enough that finite-difference
# probes (h ~ 1e-5) of a unit vector still pass.
INPUT_NORM_TOL = 1e-3

DEFAULT_SCALE = 64.0

LOSS_NAMES = ("softmax", "arcface", "cosface", "sphereface", "combined", "triplet")


@dataclass(frozen=True)
class MarginConfig:
    """Hyper-parameters of the combined margin family.

    m1: multiplicative angular margin, m2: additive angular margin in
    radians, m3: additive cosine margin, s: logit scale. s = 0 is allowed
    and degenerates the loss to the constant ln(C).
    """

    m1: float = 1.0
    m2: float = 0.0
    m3: float = 0.0
    s: float = DEFAULT_SCALE

    def __post_init__(self):
        if self.m1 < 1.0:
            raise ConfigError(f"m1 must be >= 1, got {self.m1}")
        if not 0.0 <= self.m2 < math.pi:
            raise ConfigError(f"m2 must be in [0, pi), got {self.m2}")
        if not 0.0 <= self.m3 < 1.0:
            raise ConfigError(f"m3 must be in [0, 1), got {self.m3}")
        if self.s < 0.0:
            raise ConfigError(f"s must be >= 0, got {self.s}")


# (m1, m2, m3) presets; the combined values are the ones used throughout,
# the rest follow the conventions of the works each loss comes from.
MARGIN_PRESETS = {
    "arcface": (1.0, 0.5, 0.0),
    "cosface": (1.0, 0.0, 0.35),
    "sphereface": (1.35, 0.0, 0.0),
    "combined": (1.0, 0.3, 0.2),
}


def margin_preset(name: str, s: float = DEFAULT_SCALE) -> MarginConfig:
    """Return the MarginConfig for a named preset (arcface, cosface,
    sphereface, combined)."""
    try:
        m1, m2, m3 = MARGIN_PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown margin preset {name!r}, expected one of {sorted(MARGIN_PRESETS)}"
        ) from None
    return MarginConfig(m1, m2, m3, s)


@dataclass(frozen=True)
class TripletConfig:
    """Angular triplet loss margin, in radians."""

    margin: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.margin < math.pi:
            raise ConfigError(f"triplet margin must be in (0, pi), got {self.margin}")


@dataclass
class ClassHead:
    """Class-center weights W (d x C, one column per class) plus bias b.

    The bias is only used by plain softmax; margin losses normalize the
    columns and ignore b.
    """

    W: np.ndarray
    b: np.ndarray = None

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2:
            raise ConfigError(f"W must be d x C, got shape {self.W.shape}")
        if self.b is None:
            self.b = np.zeros(self.W.shape[1])
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.b.shape != (self.W.shape[1],):
            raise ConfigError(
                f"b must have shape ({self.W.shape[1]},), got {self.b.shape}"
            )

    @property
    def num_classes(self) -> int:
        return self.W.shape[1]

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @staticmethod
    def initialized(dim: int, num_classes: int, rng: np.random.Generator) -> "ClassHead":
        """Random head with unit-norm columns and zero bias."""
        W = rng.normal(size=(dim, num_classes))
        W /= np.linalg.norm(W, axis=0, keepdims=True)
        return ClassHead(W)


def target_logit(cos_theta: float, cfg: MarginConfig) -> float:
    """Margin-penalized target logit psi = cos(m1*theta + m2) - m3.

    cos_theta is clamped to [-1 + 1e-7, 1 - 1e-7] before arccos, and for
    m1*theta + m2 beyond pi the value continues linearly with slope -m1
    in theta, keeping psi monotone and its gradient finite.  With m1 = 1
    and m2 = 0 the angular map is the identity, so psi is computed
    directly as cos_theta - m3 without the arccos round trip.
    """
    if cfg.m1 == 1.0 and cfg.m2 == 0.0:
        return float(cos_theta) - cfg.m3
    a = min(1.0 - ARCCOS_EPS, max(-1.0 + ARCCOS_EPS, float(cos_theta)))
    u = cfg.m1 * math.acos(a) + cfg.m2
    if u <= math.pi:
        return math.cos(u) - cfg.m3
    return -1.0 - cfg.m3 - (u - math.pi)


def _unit_rows(X, what):
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    if np.any(np.abs(norms - 1.0) > INPUT_NORM_TOL):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise NormalizationError(f"{what} rows must be unit-norm (max |norm-1| = {worst:.3e})")
    return X / norms[:, None], norms


def _unit_cols(W, what):
    W = np.asarray(W, dtype=np.float64)
    norms = np.linalg.norm(W, axis=0)
    if np.any(np.abs(norms - 1.0) > INPUT_NORM_TOL):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise NormalizationError(f"{what} columns must be unit-norm (max |norm-1| = {worst:.3e})")
    return W / norms[None, :], norms


def _check_labels(labels, num_classes):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise LabelError(f"labels must be a vector, got shape {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= num_classes):
        raise LabelError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    return labels


def _margin_pieces(X, labels, head: ClassHead, cfg: MarginConfig):
    """Shared forward computation for the margin loss and its gradient."""
    if head.num_classes < 2:
        raise ConfigError("margin losses require at least 2 classes")
    labels = _check_labels(labels, head.num_classes)
    Xh, xnorms = _unit_rows(X, "input")
    Wh, wnorms = _unit_cols(head.W, "class-center")
    if Xh.shape[0] != labels.shape[0]:
        raise LabelError("batch size and label count differ")

    cosines = Xh @ Wh  # (N, C)
    n = np.arange(labels.shape[0])
    raw_target = cosines[n, labels]
    identity_map = cfg.m1 == 1.0 and cfg.m2 == 0.0
    interior = np.abs(raw_target) < 1.0 - ARCCOS_EPS  # arccos clamp not engaged
    a = np.clip(raw_target, -1.0 + ARCCOS_EPS, 1.0 - ARCCOS_EPS)
    theta = np.arccos(a)
    u = cfg.m1 * theta + cfg.m2
    in_range = u <= math.pi
    if identity_map:
        # trivial angular map: stay exact at cosines of +-1 and keep the
        # gradient free of the clamp's dead zone
        psi = raw_target - cfg.m3
    else:
        psi = np.where(in_range, np.cos(u) - cfg.m3, -1.0 - cfg.m3 - (u - math.pi))

    logits = cfg.s * cosines
    logits[n, labels] = cfg.s * psi

    zmax = logits.max(axis=1, keepdims=True)
    expz = np.exp(logits - zmax)
    sumexp = expz.sum(axis=1, keepdims=True)
    ce = (zmax[:, 0] + np.log(sumexp[:, 0])) - logits[n, labels]
    loss = float(ce.mean())

    return {
        "labels": labels,
        "Xh": Xh,
        "xnorms": xnorms,
        "Wh": Wh,
        "wnorms": wnorms,
        "a": a,
        "u": u,
        "in_range": in_range,
        "interior": interior,
        "identity_map": identity_map,
        "softmax": expz / sumexp,
        "logits": logits,
        "loss": loss,
    }


def margin_loss_forward(X, labels, head: ClassHead, cfg: MarginConfig):
    """Mean margin-softmax cross-entropy over a batch.

    X: (N, d) unit-norm embeddings, labels: (N,) class indices. Returns
    (loss, logits) where logits is the scaled, margin-penalized (N, C)
    matrix the softmax was taken over.
    """
    pieces = _margin_pieces(X, labels, head, cfg)
    return pieces["loss"], pieces["logits"]


def margin_loss_backward(X, labels, head: ClassHead, cfg: MarginConfig):
    """Gradients (dX, dW) of the mean margin loss.

    Gradients are taken with respect to the raw inputs, i.e. through the
    internal renormalization: components along each vector are projected
    out and the result is divided by the input's norm.
    """
    p = _margin_pieces(X, labels, head, cfg)
    labels_, Xh, Wh = p["labels"], p["Xh"], p["Wh"]
    N = labels_.shape[0]
    n = np.arange(N)

    # d(mean CE)/d(logit)
    G = p["softmax"].copy()
    G[n, labels_] -= 1.0
    G /= N

    # d(logit)/d(cosine): s off target, s * dpsi/da on target (0 where the
    # arccos clamp was engaged).
    if p["identity_map"]:
        dpsi_da = np.ones_like(p["a"])
    else:
        sin_u = np.sin(p["u"])
        root = np.sqrt(1.0 - p["a"] ** 2)
        dpsi_da = np.where(p["in_range"], cfg.m1 * sin_u / root, cfg.m1 / root)
        dpsi_da = np.where(p["interior"], dpsi_da, 0.0)

    dC = G * cfg.s
    dC[n, labels_] = G[n, labels_] * cfg.s * dpsi_da

    dXh = dC @ Wh.T
    dWh = Xh.T @ dC

    # chain through row/column normalization
    dX = (dXh - (dXh * Xh).sum(axis=1, keepdims=True) * Xh) / p["xnorms"][:, None]
    dW = (dWh - (dWh * Wh).sum(axis=0, keepdims=True) * Wh) / p["wnorms"][None, :]
    return dX, dW


def plain_softmax_loss(X, labels, head: ClassHead):
    """Plain softmax cross-entropy over unnormalized logits W^T x + b.

    No normalization, margin, or scale. Returns (loss, dX, dW, db).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = _check_labels(labels, head.num_classes)
    if X.shape[0] != labels.shape[0]:
        raise LabelError("batch size and label count differ")

    Z = X @ head.W + head.b
    zmax = Z.max(axis=1, keepdims=True)
    expz = np.exp(Z - zmax)
    sumexp = expz.sum(axis=1, keepdims=True)
    n = np.arange(labels.shape[0])
    ce = (zmax[:, 0] + np.log(sumexp[:, 0])) - Z[n, labels]
    loss = float(ce.mean())

    dZ = expz / sumexp
    dZ[n, labels] -= 1.0
    dZ /= labels.shape[0]
    dX = dZ @ head.W.T
    dW = X.T @ dZ
    db = dZ.sum(axis=0)
    return loss, dX, dW, db


def triplet_loss(anchor, positive, negative, cfg: TripletConfig):
    """Angular triplet hinge max(0, theta(a,p) - theta(a,n) + margin).

    All three vectors must be unit-norm. Returns (loss, (da, dp, dn));
    gradients are zero when the hinge is inactive and, as for the margin
    loss, are taken through the internal renormalization.
    """
    A, na = _unit_rows(np.asarray(anchor, dtype=np.float64)[None, :], "anchor")
    P, npos = _unit_rows(np.asarray(positive, dtype=np.float64)[None, :], "positive")
    Ng, nneg = _unit_rows(np.asarray(negative, dtype=np.float64)[None, :], "negative")
    a, p, ng = A[0], P[0], Ng[0]
    if not (a.shape == p.shape == ng.shape):
        raise NormalizationError("triplet vectors must share one dimension")

    cap_raw = float(a @ p)
    can_raw = float(a @ ng)
    cap = min(1.0 - ARCCOS_EPS, max(-1.0 + ARCCOS_EPS, cap_raw))
    can = min(1.0 - ARCCOS_EPS, max(-1.0 + ARCCOS_EPS, can_raw))
    loss = math.acos(cap) - math.acos(can) + cfg.margin

    zeros = np.zeros_like(a)
    if loss <= 0.0:
        return 0.0, (zeros, zeros.copy(), zeros.copy())

    # dtheta/dcos = -1/sqrt(1-c^2); zero where the clamp was engaged
    dcap = -1.0 / math.sqrt(1.0 - cap * cap) if abs(cap_raw) < 1.0 - ARCCOS_EPS else 0.0
    dcan = 1.0 / math.sqrt(1.0 - can * can) if abs(can_raw) < 1.0 - ARCCOS_EPS else 0.0

    da_hat = dcap * p + dcan * ng
    dp_hat = dcap * a
    dn_hat = dcan * a

    def through_norm(g, unit, norm):
        return (g - float(g @ unit) * unit) / norm

    da = through_norm(da_hat, a, na[0])
    dp = through_norm(dp_hat, p, npos[0])
    dn = through_norm(dn_hat, ng, nneg[0])
    return float(loss), (da, dp, dn)
