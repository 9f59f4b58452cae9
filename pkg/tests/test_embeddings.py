"""Vector primitives, labeled records, and dataset invariants."""

import numpy as np
import pytest

from verifake.embeddings import (
    EXPRESSION_SWAP_METHODS,
    IDENTITY_SWAP_METHODS,
    METHOD_BY_NAME,
    METHOD_NAMES,
    EmbeddingDataset,
    LabeledEmbedding,
    Method,
    between_center_cosine,
    cosine_similarity,
    l2_normalize,
    method_group,
    real_record,
    subject_centers,
    within_identity_cosine,
)
from verifake.errors import DegenerateVector, DimensionMismatch


def test_l2_normalize_pythagorean():
    out = l2_normalize([3.0, 4.0])
    assert np.allclose(out, [0.6, 0.8], atol=0, rtol=0)


def test_l2_normalize_identity():
    out = l2_normalize([1.0, 0.0, 0.0])
    assert np.array_equal(out, [1.0, 0.0, 0.0])


def test_l2_normalize_zero_vector():
    with pytest.raises(DegenerateVector):
        l2_normalize([0.0, 0.0])


def test_l2_normalize_unit_norm_tolerance():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.normal(size=8) * 10.0 ** rng.integers(-3, 4)
        out = l2_normalize(v)
        assert abs(np.linalg.norm(out) - 1.0) <= 1e-6


def test_cosine_identity_orthogonal_antipodal():
    assert cosine_similarity([1.0, 0.0], [1.0, 0.0]) == 1.0
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine_similarity([1.0, 0.0], [-1.0, 0.0]) == -1.0


def test_cosine_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])


def test_cosine_scale_invariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = rng.normal(size=6)
        w = l2_normalize(rng.normal(size=6))
        a = float(rng.uniform(0.1, 100.0))
        c1 = cosine_similarity(l2_normalize(a * v), w)
        c2 = cosine_similarity(l2_normalize(v), w)
        assert abs(c1 - c2) <= 1e-9


def test_cosine_order_symmetric_bitwise():
    rng = np.random.default_rng(2)
    for _ in range(50):
        u = l2_normalize(rng.normal(size=5))
        v = l2_normalize(rng.normal(size=5))
        assert cosine_similarity(u, v) == cosine_similarity(v, u)


def test_cosine_clamped():
    # numerically slightly-over-unit dot products must clamp into range
    v = np.ones(4) / 2.0
    assert -1.0 <= cosine_similarity(v, v) <= 1.0


def test_real_record_invariants():
    rec = real_record(3, [1.0, 0.0])
    assert not rec.fake
    assert rec.method == Method.NONE
    assert rec.host_subject_id == rec.subject_id == 3

    with pytest.raises(ValueError):
        LabeledEmbedding(1, 1, False, Method.FACESWAP, [1.0, 0.0])
    with pytest.raises(ValueError):
        LabeledEmbedding(1, 2, False, Method.NONE, [1.0, 0.0])
    with pytest.raises(ValueError):
        LabeledEmbedding(1, 2, True, Method.NONE, [1.0, 0.0])


def test_fake_record_host_association():
    rec = LabeledEmbedding(5, 9, True, Method.FACESWAP, [0.0, 1.0])
    assert rec.fake and rec.subject_id == 5 and rec.host_subject_id == 9


def test_vector_stored_float32():
    rec = real_record(0, [0.1, 0.2, 0.3])
    assert rec.vector.dtype == np.float32


def test_record_equality_is_bitwise():
    a = real_record(0, [0.1, 0.2])
    b = real_record(0, [0.1, 0.2])
    c = real_record(0, [0.1, np.nextafter(np.float32(0.2), 1.0)])
    assert a == b
    assert a != c


def test_min_dim_enforced():
    with pytest.raises(DimensionMismatch):
        real_record(0, [1.0])


def test_dataset_dim_consistency():
    recs = [real_record(0, [1.0, 0.0]), real_record(1, [0.0, 1.0, 0.0])]
    with pytest.raises(DimensionMismatch):
        EmbeddingDataset(2, recs)


def test_dataset_accessors():
    recs = [
        real_record(0, [1.0, 0.0]),
        real_record(1, [0.0, 1.0]),
        LabeledEmbedding(0, 1, True, Method.DEEPFAKES, [1.0, 1.0]),
    ]
    ds = EmbeddingDataset(2, recs)
    assert len(ds) == 3
    assert len(ds.real_records()) == 2
    assert len(ds.fake_records()) == 1
    assert ds.subject_ids() == {0, 1}
    assert ds.matrix().shape == (3, 2)
    assert ds.matrix().dtype == np.float64


def test_method_tables_round_trip():
    for code, name in METHOD_NAMES.items():
        assert METHOD_BY_NAME[name] == code
    assert Method.NONE == 0 and Method.FACESWAP == 1 and Method.FACESWAP_K == 6


def test_method_groups_partition():
    fakes = set(Method) - {Method.NONE}
    assert IDENTITY_SWAP_METHODS | EXPRESSION_SWAP_METHODS == fakes
    assert not IDENTITY_SWAP_METHODS & EXPRESSION_SWAP_METHODS
    assert method_group(Method.FACESWAP) == "identity-swap"
    assert method_group(Method.NEURALTEXTURES) == "expression-swap"
    with pytest.raises(ValueError):
        method_group(Method.NONE)


def test_subject_centers_and_spread_stats():
    e0, e1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    recs = [
        real_record(0, e0),
        real_record(0, e0),
        real_record(1, e1),
        real_record(1, e1),
    ]
    ds = EmbeddingDataset(2, recs)
    centers = subject_centers(ds)
    assert np.allclose(centers[0], e0) and np.allclose(centers[1], e1)
    assert within_identity_cosine(ds) == pytest.approx(1.0)
    assert between_center_cosine(ds) == pytest.approx(0.0, abs=1e-12)


def test_within_identity_needs_pairs():
    ds = EmbeddingDataset(2, [real_record(0, [1.0, 0.0])])
    with pytest.raises(DegenerateVector):
        within_identity_cosine(ds)


def test_between_center_needs_two_subjects():
    ds = EmbeddingDataset(2, [real_record(0, [1.0, 0.0]), real_record(0, [1.0, 0.0])])
    with pytest.raises(DegenerateVector):
        between_center_cosine(ds)
