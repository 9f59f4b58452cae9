"""End-to-end pipeline: synthesize -> train -> embed -> score -> report.

Training and evaluation identities are generated separately and kept
subject-disjoint (evaluation subject ids are offset past the training
ids); the embedder never sees an evaluation identity. Fakes are
simulated in embedding space from the held-out subjects' real
embeddings, then everything flows through the gallery/probe protocol
into the metric report and an optional t-SNE layout.

Every stage draws its randomness from a child seed derived from the
global run seed and the stage name, so a config + seed pair pins every
artifact byte for byte.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import FORMAT_VERSIONS, PipelineConfig, child_seed
from .dataset_io import write_dataset
from .embeddings import (
    IDENTITY_SWAP_METHODS,
    METHOD_NAMES,
    EmbeddingDataset,
    Method,
    real_record,
)
from .errors import ConfigError, VerifakeError
from .metrics import (
    EvalReport,
    build_report,
    histograms_to_csv,
    roc_curve,
    roc_to_csv,
)
from .protocol import (
    assert_subject_disjoint,
    build_gallery,
    run_protocol,
    scores_to_csv,
)
from .synthetic import (
    RawDataset,
    SwapSpec,
    SyntheticSpec,
    generate_identities,
    simulate_expression_swap,
    simulate_identity_swap,
)
from .trainer import TrainConfig, extract_embeddings, train_embedder
from .tsne import TsneConfig, kl_trace_to_csv, layout_to_csv, run_tsne


@dataclass
class RunResult:
    """Artifacts of one pipeline run, keyed by file name."""

    out_dir: Path
    report: EvalReport
    scores: list
    dataset: EmbeddingDataset
    curve: np.ndarray
    artifacts: dict = field(default_factory=dict)


class StageFailure(VerifakeError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def _run_stage(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except VerifakeError as exc:
        raise StageFailure(stage, exc) from exc


def synth_stage(cfg: PipelineConfig):
    """Generate disjoint training and evaluation identity clusters.

    Evaluation labels are offset by the training identity count so the
    two id ranges never collide.
    """
    train_spec = SyntheticSpec(
        cfg.train_identities,
        cfg.samples_per_identity,
        cfg.raw_dim,
        cfg.concentration,
        child_seed(cfg.seed, "synth:train"),
    )
    eval_spec = SyntheticSpec(
        cfg.eval_identities,
        cfg.samples_per_identity,
        cfg.raw_dim,
        cfg.concentration,
        child_seed(cfg.seed, "synth:eval"),
    )
    train_raw = generate_identities(train_spec)
    eval_raw = generate_identities(eval_spec)
    eval_raw = RawDataset(
        eval_raw.features, eval_raw.labels + cfg.train_identities, eval_raw.means
    )
    assert_subject_disjoint(
        set(train_raw.labels.tolist()), set(eval_raw.labels.tolist())
    )
    return train_raw, eval_raw


def train_stage(cfg: PipelineConfig, train_raw: RawDataset):
    train_cfg = TrainConfig(
        batch_size=cfg.batch_size,
        epochs=cfg.epochs,
        lr=cfg.lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
        lr_marks=cfg.lr_marks,
        seed=child_seed(cfg.seed, "train"),
    )
    return train_embedder(
        train_raw,
        cfg.loss_name,
        train_cfg,
        embed_dim=cfg.embed_dim,
        hidden_dims=cfg.hidden_dims,
        margin=cfg.resolved_margin(),
        triplet=cfg.triplet,
    )


def simulate_fakes(real_ds: EmbeddingDataset, swaps, seed: int) -> list:
    """Apply every configured simulator to the real records.

    For identity swaps the donor is a seeded pick among the OTHER
    subjects; the host record and donor record are seeded picks among
    each subject's real embeddings.
    """
    by_subject: dict = {}
    for rec in real_ds.real_records():
        by_subject.setdefault(rec.subject_id, []).append(rec)
    subjects = sorted(by_subject)

    fakes = []
    for settings in swaps:
        method = Method(settings.method)
        rng = np.random.default_rng(
            child_seed(seed, f"swap:{METHOD_NAMES[method]}")
        )
        identity_swap = method in IDENTITY_SWAP_METHODS
        if identity_swap and len(subjects) < 2:
            raise ConfigError("identity swaps need at least 2 subjects")
        spec = SwapSpec(alpha=settings.alpha, noise_sigma=settings.sigma)
        for host in subjects:
            host_pool = by_subject[host]
            for _ in range(settings.per_subject):
                host_rec = host_pool[rng.integers(len(host_pool))]
                if identity_swap:
                    donor = subjects[rng.integers(len(subjects))]
                    while donor == host:
                        donor = subjects[rng.integers(len(subjects))]
                    donor_pool = by_subject[donor]
                    donor_rec = donor_pool[rng.integers(len(donor_pool))]
                    fakes.append(
                        simulate_identity_swap(
                            donor_rec.vector.astype(np.float64),
                            donor,
                            host_rec.vector.astype(np.float64),
                            host,
                            spec,
                            method=method,
                            rng=rng,
                        )
                    )
                else:
                    fakes.append(
                        simulate_expression_swap(
                            host_rec.vector.astype(np.float64),
                            host,
                            settings.sigma,
                            method=method,
                            rng=rng,
                        )
                    )
    return fakes


def embed_stage(cfg: PipelineConfig, network, eval_raw: RawDataset) -> EmbeddingDataset:
    real_ds = extract_embeddings(network, eval_raw.features, eval_raw.labels)
    fakes = simulate_fakes(real_ds, cfg.swaps, cfg.seed)
    return EmbeddingDataset(real_ds.dim, real_ds.records + fakes)


def protocol_stage(cfg: PipelineConfig, dataset: EmbeddingDataset):
    gallery, probes = build_gallery(
        dataset,
        g=cfg.gallery_size,
        seed=child_seed(cfg.seed, "gallery"),
        probe_cap=cfg.probe_cap,
    )
    scores = run_protocol(gallery, probes, cfg.aggregation)
    return gallery, probes, scores


def report_stage(cfg: PipelineConfig, scores) -> EvalReport:
    metadata = {
        "aggregation": cfg.aggregation,
        "gallery_size": cfg.gallery_size,
        "loss": cfg.loss_name,
        "seed": cfg.seed,
    }
    return build_report(scores, metadata)


def tsne_stage(cfg: PipelineConfig, dataset: EmbeddingDataset):
    """Seeded subsample (if needed) plus the 2-D layout and KL trace."""
    records = list(dataset.records)
    rng = np.random.default_rng(child_seed(cfg.seed, "tsne"))
    if len(records) > cfg.tsne_max_points:
        chosen = rng.choice(len(records), size=cfg.tsne_max_points, replace=False)
        records = [records[i] for i in sorted(int(c) for c in chosen)]
    X = np.stack([rec.vector.astype(np.float64) for rec in records])
    tsne_cfg = TsneConfig(
        perplexity=cfg.tsne_perplexity,
        iterations=cfg.tsne_iterations,
        learning_rate=cfg.tsne_learning_rate,
        seed=child_seed(cfg.seed, "tsne"),
    )
    Y, trace = run_tsne(X, tsne_cfg)
    return records, Y, trace


def curve_to_csv(curve) -> str:
    lines = ["epoch,loss"]
    for epoch, loss in enumerate(np.asarray(curve, dtype=np.float64), start=1):
        lines.append(f"{epoch},{float(loss)!r}")
    return "\n".join(lines) + "\n"


def _write_text(out_dir: Path, name: str, text: str, artifacts: dict) -> None:
    path = out_dir / name
    path.write_text(text, encoding="utf-8", newline="")
    artifacts[name] = path


def _roc_csv_from_scores(scores) -> str:
    genuine = [r.score for r in scores if r.kind == "genuine"]
    curves = {}
    for method in sorted({r.method for r in scores if r.kind == "imposter"}):
        imposter = [
            r.score for r in scores if r.kind == "imposter" and r.method == method
        ]
        curves[METHOD_NAMES[method]] = roc_curve(genuine, imposter)
    return roc_to_csv(curves)


def write_manifest(cfg: PipelineConfig, out_dir: Path, artifacts: dict) -> Path:
    manifest = {
        "artifacts": sorted(artifacts),
        "config_sha256": cfg.config_hash(),
        "format_versions": FORMAT_VERSIONS,
        "seed": cfg.seed,
        "tool": {"name": "verifake", "version": __version__},
    }
    path = out_dir / "manifest.json"
    path.write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    artifacts["manifest.json"] = path
    return path


def run_pipeline(cfg: PipelineConfig, out_dir=None) -> RunResult:
    """Execute every stage and write all artifacts under out_dir."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts: dict = {}

    train_raw, eval_raw = _run_stage("synth", synth_stage, cfg)
    network, curve = _run_stage("train", train_stage, cfg, train_raw)
    _write_text(out, "train_curve.csv", curve_to_csv(curve), artifacts)

    dataset = _run_stage("embed", embed_stage, cfg, network, eval_raw)
    emb_name = "embeddings.emb1" if cfg.file_format == "emb1" else "embeddings.csv"
    write_dataset(out / emb_name, dataset, fmt=cfg.file_format)
    artifacts[emb_name] = out / emb_name

    _, _, scores = _run_stage("protocol", protocol_stage, cfg, dataset)
    _write_text(out, "scores.csv", scores_to_csv(scores), artifacts)

    report = _run_stage("report", report_stage, cfg, scores)
    _write_text(out, "report.json", report.to_json(), artifacts)
    _write_text(out, "report.txt", report.format_table(), artifacts)
    _write_text(out, "roc.csv", _roc_csv_from_scores(scores), artifacts)
    _write_text(out, "histograms.csv", histograms_to_csv(report), artifacts)

    if cfg.tsne_enabled:
        records, Y, trace = _run_stage("tsne", tsne_stage, cfg, dataset)
        _write_text(out, "tsne.csv", layout_to_csv(Y, records), artifacts)
        _write_text(out, "kl_trace.csv", kl_trace_to_csv(trace), artifacts)

    write_manifest(cfg, out, artifacts)
    return RunResult(out, report, scores, dataset, curve, artifacts)


def evaluate_dataset(
    dataset: EmbeddingDataset,
    g: int,
    seed: int,
    aggregation: str = "mean",
    probe_cap: int = 1000,
    metadata: dict | None = None,
):
    """Protocol + report for an externally supplied embedding dataset
    (no training stage)."""
    gallery, probes = build_gallery(dataset, g=g, seed=seed, probe_cap=probe_cap)
    scores = run_protocol(gallery, probes, aggregation)
    meta = {"aggregation": aggregation, "gallery_size": g, "seed": seed}
    meta.update(metadata or {})
    return build_report(scores, meta), scores


def synth_embedding_dataset(cfg: PipelineConfig) -> EmbeddingDataset:
    """Training-free dataset: the synthetic clusters are used directly
    as embeddings (they already live on the unit sphere) and the
    configured simulators supply the fakes."""
    spec = SyntheticSpec(
        cfg.eval_identities,
        cfg.samples_per_identity,
        cfg.raw_dim,
        cfg.concentration,
        child_seed(cfg.seed, "synth:eval"),
    )
    raw = generate_identities(spec)
    records = []
    for row, label in zip(raw.features, raw.labels):
        records.append(real_record(int(label), row))
    real_ds = EmbeddingDataset(raw.raw_dim, records)
    fakes = simulate_fakes(real_ds, cfg.swaps, cfg.seed)
    return EmbeddingDataset(real_ds.dim, real_ds.records + fakes)


__all__ = [
    "RunResult",
    "StageFailure",
    "run_pipeline",
    "evaluate_dataset",
    "synth_embedding_dataset",
    "simulate_fakes",
    "synth_stage",
    "train_stage",
    "embed_stage",
    "protocol_stage",
    "report_stage",
    "tsne_stage",
    "curve_to_csv",
    "write_manifest",
]
