"""Perplexity calibration, joint affinities, and the t-SNE optimizer."""

import warnings

import numpy as np
import pytest
from helpers import fd_grad, rel_err

from verifake.embeddings import LabeledEmbedding, Method, real_record
from verifake.errors import CalibrationWarning, ConfigError
from verifake.tsne import (
    AffinityMatrix,
    TsneConfig,
    calibrate_sigma,
    joint_affinities,
    kl_divergence,
    kl_gradient,
    kl_trace_to_csv,
    layout_to_csv,
    row_affinities,
    run_tsne,
)


def three_clusters(seed=5, per=8, spread=0.05):
    g = np.random.default_rng(seed)
    centers = np.array([[4.0, 0, 0], [0, 4.0, 0], [0, 0, 4.0]])
    pts, labs = [], []
    for c, ctr in enumerate(centers):
        pts.append(ctr + g.normal(0, spread, size=(per, 3)))
        labs += [c] * per
    return np.vstack(pts), np.array(labs)


# ------------------------------------------------------------ calibration


def test_equidistant_pair_is_uniform_for_any_sigma():
    row = np.array([1.0, 1.0])
    # entropy is pinned at 1 bit, so the target is unreachable and the
    # search hands back its best sigma under a warning
    with pytest.warns(CalibrationWarning):
        sigma = calibrate_sigma(row, 1.9)
    assert row_affinities(row, sigma) == pytest.approx((0.5, 0.5), abs=1e-12)
    assert row_affinities(row, 0.3) == pytest.approx((0.5, 0.5), abs=1e-12)
    assert row_affinities(row, 3.0) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_calibration_hits_target_perplexity():
    row = np.random.default_rng(42).uniform(0.2, 4.0, size=20)
    sigma = calibrate_sigma(row, 5.0)
    p = row_affinities(row, sigma)
    achieved = 2.0 ** (-np.sum(p * np.log2(p)))
    assert abs(achieved - 5.0) < 1e-5


def test_calibration_target_bounds():
    row = np.random.default_rng(0).uniform(0.5, 2.0, size=10)
    with pytest.raises(ConfigError):
        calibrate_sigma(row, 10.0)  # target == row length
    with pytest.raises(ConfigError):
        calibrate_sigma(row, 11.0)
    with pytest.raises(ConfigError):
        calibrate_sigma(row, 1.0)


def test_calibration_rejects_bad_rows():
    with pytest.raises(ConfigError):
        calibrate_sigma(np.array([1.0]), 1.5)
    with pytest.raises(ConfigError):
        calibrate_sigma(np.array([1.0, np.inf, 2.0]), 2.0)


# ------------------------------------------------------------- affinities


def test_joint_affinities_invariants():
    X = np.random.default_rng(1).normal(size=(12, 5))
    aff = joint_affinities(X, 3.0)
    assert isinstance(aff, AffinityMatrix)
    P = aff.P
    assert np.abs(P - P.T).max() < 1e-12
    assert abs(P.sum() - 1.0) < 1e-9
    assert np.all(np.diag(P) == 0.0)
    assert np.all(P >= 0.0)
    assert aff.sigmas.shape == (12,)
    assert np.all(aff.sigmas > 0)


def test_simplex_gives_uniform_affinities():
    # all pairwise distances equal, so symmetry forces p_ij = 1/12
    X = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]
    )
    with pytest.warns(UserWarning):
        aff = joint_affinities(X, 2.0)
    off = aff.P[~np.eye(4, dtype=bool)]
    assert np.abs(off - 1.0 / 12.0).max() < 1e-12
    assert np.all(np.diag(aff.P) == 0.0)


def test_small_n_perplexity_clamped_with_warning():
    X = np.random.default_rng(2).normal(size=(7, 3))
    with pytest.warns(UserWarning, match="clamped"):
        aff = joint_affinities(X, 30.0)
    assert abs(aff.P.sum() - 1.0) < 1e-9


def test_duplicate_points_jittered():
    X = np.random.default_rng(3).normal(size=(6, 3))
    X[4] = X[1]
    with pytest.warns(UserWarning, match="jitter"):
        aff = joint_affinities(X, 1.6)
    assert np.all(np.isfinite(aff.P))
    assert abs(aff.P.sum() - 1.0) < 1e-9


def test_affinities_need_four_points():
    with pytest.raises(ConfigError):
        joint_affinities(np.zeros((3, 2)), 1.5)


# --------------------------------------------------------------- KL / opt


def test_two_point_kl_is_zero():
    # both P and Q collapse to (1/2, 1/2) regardless of the layout
    P = np.array([[0.0, 0.5], [0.5, 0.0]])
    for seed in (0, 1, 2):
        Y = np.random.default_rng(seed).normal(size=(2, 2))
        assert kl_divergence(P, Y) == 0.0


def test_kl_nonnegative():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(9, 4))
    P = joint_affinities(X, 2.5).P
    for seed in range(5):
        Y = np.random.default_rng(seed).normal(size=(9, 2))
        assert kl_divergence(P, Y) >= 0.0


def test_kl_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(10, 4))
    P = joint_affinities(X, 2.5).P
    Y = rng.normal(size=(10, 2))
    analytic = kl_gradient(P, Y)
    numeric = fd_grad(lambda: kl_divergence(P, Y), Y)
    assert rel_err(analytic, numeric) < 1e-4


def test_gradient_rotation_equivariance():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(8, 3))
    P = joint_affinities(X, 2.0).P
    Y = rng.normal(size=(8, 2))
    theta = 0.7
    R = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    g_base = kl_gradient(P, Y)
    g_rot = kl_gradient(P, Y @ R.T)
    assert np.allclose(g_rot, g_base @ R.T, atol=1e-12)
    assert np.linalg.norm(g_rot) == pytest.approx(np.linalg.norm(g_base), abs=1e-12)


def test_run_tsne_deterministic():
    X, _ = three_clusters(per=5)
    cfg = TsneConfig(perplexity=3, iterations=50, seed=7)
    Y1, t1 = run_tsne(X, cfg)
    Y2, t2 = run_tsne(X, cfg)
    assert np.array_equal(Y1, Y2)
    assert np.array_equal(t1, t2)


def test_run_tsne_trace_decreases_and_separates_clusters():
    X, labs = three_clusters()
    Y, trace = run_tsne(X, TsneConfig(perplexity=5, iterations=500, seed=0))
    assert Y.shape == (24, 2)
    assert trace.shape == (500,)
    assert np.all(trace >= 0.0)
    assert trace[-1] < trace[99]

    within, between = [], []
    for i in range(len(Y)):
        for j in range(i + 1, len(Y)):
            d = float(np.linalg.norm(Y[i] - Y[j]))
            (within if labs[i] == labs[j] else between).append(d)
    assert np.mean(within) < np.mean(between)


def test_run_tsne_needs_four_points():
    with pytest.raises(ConfigError):
        run_tsne(np.zeros((2, 3)), TsneConfig(perplexity=1.5, iterations=5))


def test_config_validation():
    with pytest.raises(ConfigError):
        TsneConfig(output_dim=3)
    with pytest.raises(ConfigError):
        TsneConfig(perplexity=1.0)
    with pytest.raises(ConfigError):
        TsneConfig(iterations=0)
    with pytest.raises(ConfigError):
        TsneConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TsneConfig(early_exaggeration=0.5)
    with pytest.raises(ConfigError):
        TsneConfig(momentum_final=1.0)


# -------------------------------------------------------------------- csv


def test_layout_csv_format():
    Y = np.array([[0.5, -1.25], [2.0, 3.0]])
    records = [
        real_record(3, np.array([1.0, 0.0])),
        LabeledEmbedding(1, 4, True, Method.FACESWAP, np.array([0.0, 1.0])),
    ]
    text = layout_to_csv(Y, records)
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,subject,realness,method"
    assert lines[1] == "0.5,-1.25,3,0,none"
    assert lines[2] == "2.0,3.0,1,1,FaceSwap"


def test_layout_csv_count_mismatch():
    with pytest.raises(ConfigError):
        layout_to_csv(np.zeros((2, 2)), [real_record(0, np.array([1.0, 0.0]))])


def test_kl_trace_csv_one_based():
    text = kl_trace_to_csv(np.array([0.5, 0.25]))
    assert text == "iteration,kl\n1,0.5\n2,0.25\n"
