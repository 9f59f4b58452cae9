"""Gallery/probe verification protocol.

Each subject enrolls g real embeddings (seeded sampling without
replacement); every remaining record becomes a probe. A real probe is
scored against its own subject's gallery and labeled genuine; a fake
probe is scored against its HOST (target) subject's gallery and labeled
imposter, carrying its manipulation method tag. One probe yields one
score: the mean (or max) of its g gallery cosines.
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import METHOD_BY_NAME, METHOD_NAMES, EmbeddingDataset, Method
from .errors import (
    ConfigError,
    EmptyGallery,
    InsufficientEnrollment,
    SubjectOverlap,
    UnknownSubject,
)

DEFAULT_GALLERY_SIZE = 20
DEFAULT_PROBE_CAP = 1000
AGGREGATIONS = ("mean", "max")


@dataclass
class Gallery:
    """Enrolled real embeddings: subject id -> (g, dim) float64 matrix."""

    size: int
    entries: dict

    def subjects(self) -> set:
        return set(self.entries)

    def templates(self, subject: int) -> np.ndarray:
        if subject not in self.entries:
            raise UnknownSubject(f"subject {subject} is not enrolled")
        return self.entries[subject]


@dataclass
class ProbeSet:
    """Probe records remaining after enrollment, cap applied per host
    subject."""

    records: list
    cap: int

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True)
class ScoreRecord:
    """One probe's match score against its host subject's gallery."""

    score: float
    kind: str
    method: Method
    subject: int

    def __post_init__(self):
        if self.kind not in ("genuine", "imposter"):
            raise ConfigError(f"bad score kind {self.kind!r}")
        if self.kind == "genuine" and self.method != Method.NONE:
            raise ConfigError("genuine records must carry method 'none'")
        if not -1.0 <= self.score <= 1.0:
            raise ConfigError(f"cosine score {self.score} outside [-1, 1]")


def build_gallery(
    dataset: EmbeddingDataset,
    g: int = DEFAULT_GALLERY_SIZE,
    seed: int = 0,
    probe_cap: int = DEFAULT_PROBE_CAP,
):
    """Split a dataset into (Gallery, ProbeSet).

    For every subject, g of its real records are enrolled by seeded
    uniform sampling without replacement; everything else (including all
    fakes) becomes a probe. When a host subject has more than probe_cap
    probe records, a seeded subsample keeps exactly probe_cap of them,
    preserving input order.
    """
    if g < 1:
        raise ConfigError("gallery size must be >= 1", field="gallery_size")
    if probe_cap < 1:
        raise ConfigError("probe cap must be >= 1", field="probe_cap")

    real_by_subject: dict = {}
    for i, rec in enumerate(dataset.records):
        if not rec.fake:
            real_by_subject.setdefault(rec.subject_id, []).append(i)

    short = sorted(s for s, idx in real_by_subject.items() if len(idx) < g)
    if short:
        raise InsufficientEnrollment(short, g)

    rng = np.random.default_rng(seed)
    enrolled: set = set()
    entries = {}
    for subject in sorted(real_by_subject):
        indices = real_by_subject[subject]
        chosen = rng.choice(len(indices), size=g, replace=False)
        chosen_ids = [indices[int(c)] for c in chosen]
        enrolled.update(chosen_ids)
        entries[subject] = np.stack(
            [dataset.records[i].vector.astype(np.float64) for i in sorted(chosen_ids)]
        )

    probe_indices = [i for i in range(len(dataset.records)) if i not in enrolled]

    by_host: dict = {}
    for i in probe_indices:
        by_host.setdefault(dataset.records[i].host_subject_id, []).append(i)
    keep: set = set()
    for host in sorted(by_host):
        idx = by_host[host]
        if len(idx) > probe_cap:
            chosen = rng.choice(len(idx), size=probe_cap, replace=False)
            keep.update(idx[int(c)] for c in chosen)
        else:
            keep.update(idx)

    probes = [dataset.records[i] for i in probe_indices if i in keep]
    return Gallery(g, entries), ProbeSet(probes, probe_cap)


def match_probe(probe, subject_gallery, aggregation: str = "mean") -> float:
    """Aggregate the cosine similarities of one probe against a
    subject's gallery templates."""
    if aggregation not in AGGREGATIONS:
        raise ConfigError(f"aggregation must be one of {AGGREGATIONS}")
    templates = np.asarray(subject_gallery, dtype=np.float64)
    if templates.size == 0:
        raise EmptyGallery("cannot match against an empty gallery")
    if templates.ndim != 2:
        raise EmptyGallery(f"gallery must be a (g, dim) matrix, got {templates.shape}")

    vec = np.asarray(probe, dtype=np.float64)
    cosines = templates @ vec
    value = cosines.mean() if aggregation == "mean" else cosines.max()
    return float(min(1.0, max(-1.0, value)))


def run_protocol(gallery: Gallery, probes, aggregation: str = "mean") -> list:
    """Score every probe against its host subject's gallery.

    Output order equals input order and every probe produces exactly one
    ScoreRecord.
    """
    records = []
    for rec in probes:
        host = rec.host_subject_id
        if host not in gallery.entries:
            raise UnknownSubject(f"probe host subject {host} is not enrolled")
        score = match_probe(
            rec.vector.astype(np.float64), gallery.entries[host], aggregation
        )
        if rec.fake:
            records.append(ScoreRecord(score, "imposter", rec.method, host))
        else:
            records.append(ScoreRecord(score, "genuine", Method.NONE, host))
    return records


def assert_subject_disjoint(training_ids, evaluation_ids) -> None:
    """Raise SubjectOverlap unless the two id sets are disjoint."""
    overlap = set(training_ids) & set(evaluation_ids)
    if overlap:
        raise SubjectOverlap(sorted(overlap))


def scores_to_csv(records) -> str:
    """Serialize ScoreRecords as `score,kind,method,subject` CSV."""
    lines = ["score,kind,method,subject"]
    for r in records:
        lines.append(f"{float(r.score)!r},{r.kind},{METHOD_NAMES[r.method]},{r.subject}")
    return "\n".join(lines) + "\n"


def scores_from_csv(text: str) -> list:
    """Parse the CSV written by scores_to_csv."""
    lines = text.strip().split("\n")
    if not lines or lines[0] != "score,kind,method,subject":
        raise ConfigError("bad score CSV header", line=1)
    records = []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise ConfigError(f"expected 4 fields, got {len(parts)}", line=ln)
        score, kind, method_name, subject = parts
        if method_name not in METHOD_BY_NAME:
            raise ConfigError(f"unknown method {method_name!r}", line=ln)
        try:
            records.append(
                ScoreRecord(
                    float(score), kind, METHOD_BY_NAME[method_name], int(subject)
                )
            )
        except (ValueError, ConfigError) as exc:
            raise ConfigError(str(exc), line=ln) from None
    return records


__all__ = [
    "Gallery",
    "ProbeSet",
    "ScoreRecord",
    "build_gallery",
    "match_probe",
    "run_protocol",
    "assert_subject_disjoint",
    "scores_to_csv",
    "scores_from_csv",
    "DEFAULT_GALLERY_SIZE",
    "DEFAULT_PROBE_CAP",
    "AGGREGATIONS",
]
