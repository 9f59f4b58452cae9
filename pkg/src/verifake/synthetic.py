"""Synthetic identity clusters and embedding-space deepfake simulators.

Identities are unit mean directions drawn uniformly on the sphere; the
samples of an identity are its mean plus isotropic Gaussian noise scaled
by 1/concentration, renormalized. Fakes are built directly in embedding
space: an identity swap blends a donor embedding into a host embedding,
an expression swap perturbs a host embedding in place.
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import (
    IDENTITY_SWAP_METHODS,
    EXPRESSION_SWAP_METHODS,
    LabeledEmbedding,
    Method,
    l2_normalize,
)
from .errors import ConfigError, SimulationError

DEFAULT_ALPHA = 0.8
DEFAULT_NOISE_SIGMA = 0.05


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic identity generator."""

    num_identities: int
    samples_per_identity: int
    raw_dim: int
    concentration: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.num_identities < 2:
            raise ConfigError("need at least 2 identities", field="num_identities")
        if self.samples_per_identity < 1:
            raise ConfigError(
                "need at least 1 sample per identity", field="samples_per_identity"
            )
        if self.raw_dim < 2:
            raise ConfigError("raw_dim must be >= 2", field="raw_dim")
        if self.concentration <= 0:
            raise ConfigError("concentration must be positive", field="concentration")


@dataclass(frozen=True)
class SwapSpec:
    """Blend weight and noise level of the identity-swap simulator."""

    alpha: float = DEFAULT_ALPHA
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]", field="alpha")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0", field="noise_sigma")


@dataclass
class RawDataset:
    """Labeled raw feature vectors plus the true identity means.

    features: (n, raw_dim) unit rows; labels: (n,) identity indices;
    means: (num_identities, raw_dim) unit rows.
    """

    features: np.ndarray
    labels: np.ndarray
    means: np.ndarray

    def __len__(self):
        return self.features.shape[0]

    @property
    def num_identities(self) -> int:
        return self.means.shape[0]

    @property
    def raw_dim(self) -> int:
        return self.features.shape[1]

    def features_of(self, label: int) -> np.ndarray:
        return self.features[self.labels == label]


def generate_identities(spec: SyntheticSpec) -> RawDataset:
    """Sample the synthetic identity clusters described by `spec`.

    Draw order is fixed (means first, then all sample noise in one
    block) so outputs are bit-identical for a fixed seed.
    """
    rng = np.random.default_rng(spec.seed)
    k, s, d = spec.num_identities, spec.samples_per_identity, spec.raw_dim

    means = rng.normal(size=(k, d))
    means /= np.linalg.norm(means, axis=1, keepdims=True)

    noise = rng.normal(size=(k, s, d)) / spec.concentration
    samples = means[:, None, :] + noise
    samples /= np.linalg.norm(samples, axis=2, keepdims=True)

    features = samples.reshape(k * s, d)
    labels = np.repeat(np.arange(k, dtype=np.int64), s)
    return RawDataset(features, labels, means)


def _resolve_rng(seed, rng):
    if rng is not None:
        return rng
    return np.random.default_rng(seed)


def _noise(gen: np.random.Generator, sigma: float, dim: int) -> np.ndarray:
    # isotropic Gaussian whose expected total magnitude is sigma (the
    # per-component std is sigma/sqrt(d)), so the perturbation strength
    # does not grow with the embedding dimension
    return gen.normal(0.0, sigma / np.sqrt(dim), size=dim)


def simulate_identity_swap(
    donor_sample,
    donor_id: int,
    host_sample,
    host_id: int,
    spec: SwapSpec,
    method: Method = Method.FACESWAP,
    rng: np.random.Generator | None = None,
) -> LabeledEmbedding:
    """Blend a donor embedding onto a host: the fake carries the donor's
    identity features but is matched against the HOST gallery.

        fake = normalize(alpha * donor + (1 - alpha) * host + noise)

    Noise is isotropic Gaussian with total magnitude ~ spec.noise_sigma.
    Pass a shared rng to draw many distinct fakes; otherwise spec.seed
    is used.
    """
    if donor_id == host_id:
        raise SimulationError("identity swap needs distinct donor and host")
    if Method(method) not in IDENTITY_SWAP_METHODS:
        raise ConfigError(f"{method!r} is not an identity-swap method")
    donor = np.asarray(donor_sample, dtype=np.float64)
    host = np.asarray(host_sample, dtype=np.float64)

    if spec.noise_sigma == 0.0 and spec.alpha in (0.0, 1.0):
        # degenerate blends reproduce the source sample bit-for-bit
        blended = donor if spec.alpha == 1.0 else host
    else:
        gen = _resolve_rng(spec.seed, rng)
        noise = _noise(gen, spec.noise_sigma, donor.shape[0])
        blended = l2_normalize(
            spec.alpha * donor + (1.0 - spec.alpha) * host + noise
        )
    return LabeledEmbedding(donor_id, host_id, True, method, blended)


def simulate_expression_swap(
    host_sample,
    host_id: int,
    noise_sigma: float,
    seed: int = 0,
    method: Method = Method.NEURALTEXTURES,
    rng: np.random.Generator | None = None,
) -> LabeledEmbedding:
    """Perturb a host embedding in place, keeping its identity:

        fake = normalize(host + sigma * noise)

    Models manipulations that reanimate expression while leaving the
    identity features intact, so scores against the host gallery stay
    close to genuine.
    """
    if noise_sigma < 0:
        raise ConfigError("noise_sigma must be >= 0", field="noise_sigma")
    if Method(method) not in EXPRESSION_SWAP_METHODS:
        raise ConfigError(f"{method!r} is not an expression-swap method")
    host = np.asarray(host_sample, dtype=np.float64)

    if noise_sigma == 0.0:
        vector = host
    else:
        gen = _resolve_rng(seed, rng)
        vector = l2_normalize(host + _noise(gen, noise_sigma, host.shape[0]))
    return LabeledEmbedding(host_id, host_id, True, method, vector)


__all__ = [
    "SyntheticSpec",
    "SwapSpec",
    "RawDataset",
    "generate_identities",
    "simulate_identity_swap",
    "simulate_expression_swap",
    "DEFAULT_ALPHA",
    "DEFAULT_NOISE_SIGMA",
]
