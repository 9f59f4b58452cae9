"""End-to-end pipeline stages and artifact writing."""

import dataclasses
import json

import numpy as np
import pytest

from verifake.config import child_seed, parse_config
from verifake.embeddings import (
    EXPRESSION_SWAP_METHODS,
    IDENTITY_SWAP_METHODS,
    Method,
)
from verifake.dataset_io import read_dataset
from verifake.errors import InsufficientEnrollment
from verifake.pipeline import (
    StageFailure,
    evaluate_dataset,
    run_pipeline,
    simulate_fakes,
    synth_embedding_dataset,
    synth_stage,
)

PIPE_CFG = """
run.seed = 11
run.loss = cosface

synth.train_identities = 6
synth.eval_identities = 4
synth.samples_per_identity = 14
synth.raw_dim = 16
synth.concentration = 8

train.batch_size = 32
train.epochs = 2
train.embed_dim = 16
train.hidden = 32

protocol.gallery_size = 8
protocol.probe_cap = 50

tsne.perplexity = 8
tsne.iterations = 60
tsne.max_points = 80

swap.FaceSwap.alpha = 0.8
swap.FaceSwap.per_subject = 10
swap.NeuralTextures.sigma = 0.05
swap.NeuralTextures.per_subject = 10
"""

EXPECTED_FILES = [
    "train_curve.csv",
    "embeddings.emb1",
    "scores.csv",
    "report.json",
    "report.txt",
    "roc.csv",
    "histograms.csv",
    "tsne.csv",
    "kl_trace.csv",
    "manifest.json",
]


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    cfg = parse_config(PIPE_CFG)
    out = tmp_path_factory.mktemp("run")
    return cfg, run_pipeline(cfg, out)


def test_artifacts_written(run):
    _, result = run
    for name in EXPECTED_FILES:
        assert (result.out_dir / name).is_file(), name
    assert set(result.artifacts) == set(EXPECTED_FILES)


def test_manifest_contents(run):
    cfg, result = run
    manifest = json.loads((result.out_dir / "manifest.json").read_text())
    assert manifest["seed"] == 11
    assert manifest["config_sha256"] == cfg.config_hash()
    assert manifest["tool"]["name"] == "verifake"
    assert manifest["format_versions"]["emb1"] == 1
    listed = set(manifest["artifacts"])
    assert listed == set(EXPECTED_FILES) - {"manifest.json"}
    assert manifest["artifacts"] == sorted(manifest["artifacts"])


def test_report_covers_both_methods(run):
    _, result = run
    methods = {row.method for row in result.report.rows}
    assert methods == {"FaceSwap", "NeuralTextures"}
    groups = {row.group for row in result.report.rows}
    assert groups == {"identity-swap", "expression-swap"}


def test_counts_match_dataset(run):
    cfg, result = run
    reals = cfg.eval_identities * cfg.samples_per_identity
    fakes = cfg.eval_identities * sum(s.per_subject for s in cfg.swaps)
    assert len(result.dataset) == reals + fakes
    genuine = cfg.eval_identities * (cfg.samples_per_identity - cfg.gallery_size)
    assert result.report.counts["genuine"] == genuine
    assert result.report.counts["imposter"] == fakes


def test_curve_csv_shape(run):
    cfg, result = run
    lines = (result.out_dir / "train_curve.csv").read_text().strip().split("\n")
    assert lines[0] == "epoch,loss"
    assert len(lines) == 1 + cfg.epochs


def test_tsne_subsample_respected(run):
    cfg, result = run
    lines = (result.out_dir / "tsne.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + cfg.tsne_max_points
    kl_lines = (result.out_dir / "kl_trace.csv").read_text().strip().split("\n")
    assert len(kl_lines) == 1 + cfg.tsne_iterations


def test_written_embeddings_load_back(run):
    _, result = run
    ds = read_dataset(result.out_dir / "embeddings.emb1")
    assert ds.records == result.dataset.records


def test_rerun_is_byte_identical(run, tmp_path):
    cfg, result = run
    again = run_pipeline(cfg, tmp_path / "again")
    for name in ("report.json", "scores.csv", "embeddings.emb1", "tsne.csv"):
        assert (result.out_dir / name).read_bytes() == (
            again.out_dir / name
        ).read_bytes(), name


def test_insufficient_enrollment_is_a_stage_failure(tmp_path):
    cfg = parse_config(PIPE_CFG)
    cfg = dataclasses.replace(cfg, gallery_size=20)
    with pytest.raises(StageFailure) as info:
        run_pipeline(cfg, tmp_path / "fail")
    assert info.value.stage == "protocol"
    assert isinstance(info.value.cause, InsufficientEnrollment)
    # eval subjects are offset past the 6 training identities
    assert info.value.cause.subjects == [6, 7, 8, 9]


def test_synth_stage_keeps_id_ranges_disjoint():
    cfg = parse_config(PIPE_CFG)
    train_raw, eval_raw = synth_stage(cfg)
    train_ids = set(train_raw.labels.tolist())
    eval_ids = set(eval_raw.labels.tolist())
    assert train_ids == set(range(6))
    assert eval_ids == set(range(6, 10))


def test_evaluate_dataset_matches_pipeline_report(run):
    cfg, result = run
    report, scores = evaluate_dataset(
        result.dataset,
        g=cfg.gallery_size,
        seed=child_seed(cfg.seed, "gallery"),
        aggregation=cfg.aggregation,
        probe_cap=cfg.probe_cap,
    )
    assert scores == result.scores
    assert report.rows == result.report.rows
    assert report.counts == result.report.counts


def test_simulate_fakes_labeling(run):
    cfg, result = run
    fakes = [rec for rec in result.dataset.records if rec.fake]
    for rec in fakes:
        if rec.method in IDENTITY_SWAP_METHODS:
            assert rec.subject_id != rec.host_subject_id
        else:
            assert rec.method in EXPRESSION_SWAP_METHODS
            assert rec.subject_id == rec.host_subject_id


def test_simulate_fakes_deterministic(run):
    cfg, result = run
    reals = type(result.dataset)(
        result.dataset.dim, [r for r in result.dataset.records if not r.fake]
    )
    f1 = simulate_fakes(reals, cfg.swaps, cfg.seed)
    f2 = simulate_fakes(reals, cfg.swaps, cfg.seed)
    assert f1 == f2
    assert f1 == [rec for rec in result.dataset.records if rec.fake]


def test_training_free_dataset():
    cfg = parse_config(PIPE_CFG)
    ds1 = synth_embedding_dataset(cfg)
    ds2 = synth_embedding_dataset(cfg)
    assert ds1.records == ds2.records
    reals = [r for r in ds1.records if not r.fake]
    fakes = [r for r in ds1.records if r.fake]
    assert len(reals) == cfg.eval_identities * cfg.samples_per_identity
    assert len(fakes) == cfg.eval_identities * sum(s.per_subject for s in cfg.swaps)
    assert ds1.dim == cfg.raw_dim
    norms = np.linalg.norm(ds1.matrix(), axis=1)
    assert np.abs(norms - 1.0).max() < 1e-5


def test_tsne_disabled_skips_files(tmp_path):
    cfg = parse_config(PIPE_CFG + "tsne.enabled = false\n")
    result = run_pipeline(cfg, tmp_path / "no_tsne")
    assert not (result.out_dir / "tsne.csv").exists()
    assert not (result.out_dir / "kl_trace.csv").exists()
    manifest = json.loads((result.out_dir / "manifest.json").read_text())
    assert "tsne.csv" not in manifest["artifacts"]
