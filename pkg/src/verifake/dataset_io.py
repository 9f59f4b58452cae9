"""Readers/writers for the EMB1 binary embedding format and its CSV twin.

EMB1 layout (all little-endian):

    bytes 0..3   magic b"EMB1"
    u32          record count
    u32          dim
    per record:
        u32      subject_id
        u32      host_subject_id
        u8       realness (0 real / 1 fake)
        u8       method code (see embeddings.Method)
        u16      reserved, must be zero
        dim*f32  vector components

The CSV alternative has header `subject,host,realness,method,v0..v{d-1}`,
realness spelled `real`/`fake` and the method by name. Both formats
round-trip datasets bit-exactly (vectors are float32).
"""

import struct

import numpy as np

from .embeddings import (
    EmbeddingDataset,
    LabeledEmbedding,
    Method,
    METHOD_BY_NAME,
    METHOD_NAMES,
    MIN_DIM,
)
from .errors import FormatError

MAGIC = b"EMB1"
_HEADER = struct.Struct("<II")
_REC_FIXED = struct.Struct("<IIBBH")


def write_emb1(path, dataset: EmbeddingDataset) -> None:
    """Write `dataset` to `path` in EMB1 format."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(len(dataset.records), dataset.dim))
        for rec in dataset.records:
            fh.write(
                _REC_FIXED.pack(
                    rec.subject_id,
                    rec.host_subject_id,
                    1 if rec.fake else 0,
                    int(rec.method),
                    0,
                )
            )
            fh.write(rec.vector.astype("<f4", copy=False).tobytes())


def read_emb1(path) -> EmbeddingDataset:
    """Read an EMB1 file, validating structure byte-for-byte."""
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(data) < 4 + _HEADER.size:
        raise FormatError("truncated header", offset=len(data))
    count, dim = _HEADER.unpack_from(data, 4)
    if dim < MIN_DIM:
        raise FormatError(f"dim {dim} below minimum {MIN_DIM}", offset=8)

    rec_size = _REC_FIXED.size + 4 * dim
    offset = 4 + _HEADER.size
    records = []
    for i in range(count):
        if offset + rec_size > len(data):
            raise FormatError(
                f"truncated payload: record {i} of {count} incomplete",
                offset=len(data),
            )
        subject, host, realness, method_code, reserved = _REC_FIXED.unpack_from(
            data, offset
        )
        if realness not in (0, 1):
            raise FormatError(f"invalid realness byte {realness}", offset=offset + 8)
        try:
            method = Method(method_code)
        except ValueError:
            raise FormatError(
                f"unknown method code {method_code}", offset=offset + 9
            ) from None
        if reserved != 0:
            raise FormatError(
                f"reserved field must be zero, got {reserved}", offset=offset + 10
            )
        vec = np.frombuffer(
            data, dtype="<f4", count=dim, offset=offset + _REC_FIXED.size
        )
        try:
            records.append(
                LabeledEmbedding(subject, host, bool(realness), method, vec)
            )
        except ValueError as exc:
            raise FormatError(f"record {i}: {exc}", offset=offset) from None
        offset += rec_size
    if offset != len(data):
        raise FormatError(
            f"{len(data) - offset} trailing bytes after last record", offset=offset
        )
    return EmbeddingDataset(dim, records)


def write_csv(path, dataset: EmbeddingDataset) -> None:
    """Write `dataset` as CSV. Values use full-precision decimal so the
    float32 components round-trip exactly."""
    d = dataset.dim
    header = "subject,host,realness,method," + ",".join(f"v{i}" for i in range(d))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for rec in dataset.records:
            values = ",".join(repr(float(x)) for x in rec.vector)
            fh.write(
                f"{rec.subject_id},{rec.host_subject_id},"
                f"{'fake' if rec.fake else 'real'},"
                f"{METHOD_NAMES[rec.method]},{values}\n"
            )


def read_csv(path) -> EmbeddingDataset:
    """Read the CSV embedding format; FormatError offsets are line numbers."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty file", offset=1)

    cols = lines[0].split(",")
    if cols[:4] != ["subject", "host", "realness", "method"]:
        raise FormatError(f"bad header {lines[0]!r}", offset=1)
    dim = len(cols) - 4
    if dim < MIN_DIM:
        raise FormatError(f"dim {dim} below minimum {MIN_DIM}", offset=1)
    if cols[4:] != [f"v{i}" for i in range(dim)]:
        raise FormatError("value columns must be v0..v{d-1}", offset=1)

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 4 + dim:
            raise FormatError(
                f"expected {4 + dim} fields, got {len(fields)}", offset=lineno
            )
        try:
            subject = int(fields[0])
            host = int(fields[1])
        except ValueError:
            raise FormatError("non-integer subject/host id", offset=lineno) from None
        if fields[2] not in ("real", "fake"):
            raise FormatError(f"invalid realness {fields[2]!r}", offset=lineno)
        if fields[3] not in METHOD_BY_NAME:
            raise FormatError(f"unknown method {fields[3]!r}", offset=lineno)
        try:
            vec = np.array([float(x) for x in fields[4:]], dtype=np.float32)
        except ValueError:
            raise FormatError("non-numeric vector component", offset=lineno) from None
        try:
            records.append(
                LabeledEmbedding(
                    subject, host, fields[2] == "fake", METHOD_BY_NAME[fields[3]], vec
                )
            )
        except ValueError as exc:
            raise FormatError(str(exc), offset=lineno) from None
    return EmbeddingDataset(dim, records)


def write_dataset(path, dataset: EmbeddingDataset, fmt: str = "emb1") -> None:
    """Write `dataset` to `path` in the given format ('emb1' or 'csv')."""
    if fmt == "emb1":
        write_emb1(path, dataset)
    elif fmt == "csv":
        write_csv(path, dataset)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_dataset(path, fmt: str | None = None) -> EmbeddingDataset:
    """Read a dataset, sniffing EMB1 vs CSV from the magic when `fmt` is None."""
    if fmt is None:
        with open(path, "rb") as fh:
            fmt = "emb1" if fh.read(4) == MAGIC else "csv"
    if fmt == "emb1":
        return read_emb1(path)
    if fmt == "csv":
        return read_csv(path)
    raise ValueError(f"unknown format {fmt!r}")
