"""Embedding vector primitives and labeled-embedding datasets.

Embeddings are unit-norm float32 vectors; all other modules consume the
types defined here. Vectors are stored float32 so that file round-trips
are bit-exact; score arithmetic upcasts to float64.
"""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import DegenerateVector, DimensionMismatch

MIN_DIM = 2
NORM_TOL = 1e-6


class Method(IntEnum):
    """Manipulation-method tags and their wire codes."""

    NONE = 0
    FACESWAP = 1
    FACE2FACE = 2
    FACESHIFTER = 3
    NEURALTEXTURES = 4
    DEEPFAKES = 5
    FACESWAP_K = 6


METHOD_NAMES = {
    Method.NONE: "none",
    Method.FACESWAP: "FaceSwap",
    Method.FACE2FACE: "Face2Face",
    Method.FACESHIFTER: "FaceShifter",
    Method.NEURALTEXTURES: "NeuralTextures",
    Method.DEEPFAKES: "Deepfakes",
    Method.FACESWAP_K: "FaceSwap-K",
}
METHOD_BY_NAME = {name: code for code, name in METHOD_NAMES.items()}

# Identity swaps replace the face (corrupting identity features);
# expression swaps reanimate expression only (identity kept intact).
IDENTITY_SWAP_METHODS = frozenset(
    {Method.FACESWAP, Method.FACESHIFTER, Method.DEEPFAKES, Method.FACESWAP_K}
)
EXPRESSION_SWAP_METHODS = frozenset({Method.FACE2FACE, Method.NEURALTEXTURES})


def method_group(method: Method) -> str:
    """Return 'identity-swap' or 'expression-swap' for a fake method tag."""
    if method in IDENTITY_SWAP_METHODS:
        return "identity-swap"
    if method in EXPRESSION_SWAP_METHODS:
        return "expression-swap"
    raise ValueError(f"method {method!r} is not a manipulation method")


def l2_normalize(v) -> np.ndarray:
    """Scale `v` to unit L2 norm, preserving direction.

    Raises DegenerateVector when the norm is at or below 1e-12.
    """
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= 1e-12:
        raise DegenerateVector(f"cannot normalize vector with norm {norm:.3e}")
    return v / norm


def cosine_similarity(u, v) -> float:
    """Cosine similarity of two unit-norm vectors, clamped to [-1, 1].

    The computation is order-symmetric: cosine_similarity(u, v) and
    cosine_similarity(v, u) are bitwise equal.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"shapes {u.shape} and {v.shape} differ")
    return float(min(1.0, max(-1.0, float(np.dot(u, v)))))


@dataclass(eq=False)
class LabeledEmbedding:
    """One embedding with its identity label and manipulation tag.

    For real records the method is NONE and host_subject_id equals
    subject_id. For fakes, host_subject_id is the target identity whose
    gallery the record is matched against; identity swaps carry the
    donor identity in subject_id.
    """

    subject_id: int
    host_subject_id: int
    fake: bool
    method: Method
    vector: np.ndarray

    def __post_init__(self):
        self.method = Method(self.method)
        self.vector = np.ascontiguousarray(self.vector, dtype=np.float32)
        if self.vector.ndim != 1 or self.vector.shape[0] < MIN_DIM:
            raise DimensionMismatch(
                f"embedding must be a vector of dim >= {MIN_DIM}, "
                f"got shape {self.vector.shape}"
            )
        if not self.fake:
            if self.method != Method.NONE:
                raise ValueError("real records must carry method 'none'")
            if self.host_subject_id != self.subject_id:
                raise ValueError("real records must have host == subject")
        elif self.method == Method.NONE:
            raise ValueError("fake records must carry a manipulation method")

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LabeledEmbedding):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.host_subject_id == other.host_subject_id
            and self.fake == other.fake
            and self.method == other.method
            and self.vector.shape == other.vector.shape
            and bool(np.all(self.vector.view(np.uint32) == other.vector.view(np.uint32)))
        )


def real_record(subject_id: int, vector) -> LabeledEmbedding:
    """Convenience constructor for a real (genuine) record."""
    return LabeledEmbedding(subject_id, subject_id, False, Method.NONE, vector)


@dataclass(eq=False)
class EmbeddingDataset:
    """Ordered collection of LabeledEmbedding records sharing one dim."""

    dim: int
    records: list = field(default_factory=list)

    def __post_init__(self):
        if self.dim < MIN_DIM:
            raise DimensionMismatch(f"dataset dim must be >= {MIN_DIM}")
        for i, rec in enumerate(self.records):
            if rec.dim != self.dim:
                raise DimensionMismatch(
                    f"record {i} has dim {rec.dim}, dataset dim is {self.dim}"
                )

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingDataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and len(self.records) == len(other.records)
            and all(a == b for a, b in zip(self.records, other.records))
        )

    def subject_ids(self) -> set:
        return {rec.subject_id for rec in self.records}

    def real_records(self) -> list:
        return [rec for rec in self.records if not rec.fake]

    def fake_records(self) -> list:
        return [rec for rec in self.records if rec.fake]

    def matrix(self) -> np.ndarray:
        """Stack all vectors into an (n, dim) float64 matrix."""
        if not self.records:
            return np.zeros((0, self.dim))
        return np.stack([rec.vector for rec in self.records]).astype(np.float64)


def subject_centers(dataset: EmbeddingDataset) -> dict:
    """Normalized mean direction of each subject's real records."""
    sums: dict = {}
    for rec in dataset.real_records():
        acc = sums.setdefault(rec.subject_id, np.zeros(dataset.dim))
        acc += rec.vector.astype(np.float64)
    return {sid: l2_normalize(acc) for sid, acc in sorted(sums.items())}


def within_identity_cosine(dataset: EmbeddingDataset) -> float:
    """Mean cosine over all within-subject pairs of real records,
    averaged per subject first so small subjects count equally."""
    by_subject: dict = {}
    for rec in dataset.real_records():
        by_subject.setdefault(rec.subject_id, []).append(
            rec.vector.astype(np.float64)
        )
    per_subject = []
    for sid in sorted(by_subject):
        vecs = by_subject[sid]
        if len(vecs) < 2:
            continue
        M = np.stack(vecs)
        C = M @ M.T
        iu = np.triu_indices(len(vecs), k=1)
        per_subject.append(float(C[iu].mean()))
    if not per_subject:
        raise DegenerateVector("no subject has two or more real records")
    return float(np.mean(per_subject))


def between_center_cosine(dataset: EmbeddingDataset) -> float:
    """Mean pairwise cosine between the subjects' center directions."""
    centers = subject_centers(dataset)
    if len(centers) < 2:
        raise DegenerateVector("need at least two subjects for center spread")
    M = np.stack([centers[sid] for sid in sorted(centers)])
    C = M @ M.T
    iu = np.triu_indices(M.shape[0], k=1)
    return float(C[iu].mean())
