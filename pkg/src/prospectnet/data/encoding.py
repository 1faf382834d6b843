from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .csvio import RawRecord
from .schema import Column, FeatureSchema


class EncodingError(ValueError):
    pass


class SchemaMismatchError(EncodingError):
    pass


@dataclass(frozen=True)
class EncodingStats:
    """Per-numeric-column mean and population std, fitted on training rows."""

    columns: tuple[str, ...]
    mean: dict[str, float]
    std: dict[str, float]

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingStats":
        return cls(tuple(d["columns"]), dict(d["mean"]), dict(d["std"]))


def hash_bucket(token: str, buckets: int) -> int:
    return zlib.crc32(token.encode("utf-8")) % buckets


def fit_stats(records: Sequence[RawRecord], schema: FeatureSchema) -> EncodingStats:
    mean, std = {}, {}
    for j, col in enumerate(schema.columns):
        if col.kind != "numeric":
            continue
        vals = np.array([r.values[j] for r in records if r.values[j] is not None], dtype=np.float64)
        if vals.size == 0:
            mu, sigma = 0.0, 1.0
        else:
            mu = float(vals.mean())
            sigma = float(vals.std())
            if not sigma > 1e-12:
                sigma = 1.0
        mean[col.name], std[col.name] = mu, sigma
    return EncodingStats(tuple(schema.names), mean, std)


def _encode_numeric(col: Column, raw: Sequence, mu: float, sigma: float) -> np.ndarray:
    is_missing = np.array([v is None for v in raw], dtype=bool)
    if is_missing.any() and not col.missing:
        raise EncodingError(f"column {col.name!r} has missing values but does not allow them")
    vals = np.array([0.0 if v is None else v for v in raw], dtype=np.float64)
    z = (vals - mu) / sigma
    z[is_missing] = 0.0
    if col.missing:
        return np.column_stack([z, is_missing.astype(np.float64)])
    return z[:, None]


def _encode_categorical(col: Column, raw: Sequence) -> np.ndarray:
    out = np.zeros((len(raw), col.encoded_width))
    missing_slot = col.encoded_width - 1
    lookup = {tok: i for i, tok in enumerate(col.vocabulary)}
    for i, v in enumerate(raw):
        if v is None:
            if not col.missing:
                raise EncodingError(f"column {col.name!r} has missing values but does not allow them")
            out[i, missing_slot] = 1.0
        elif col.hashed:
            out[i, hash_bucket(v, col.buckets)] = 1.0
        elif v in lookup:
            out[i, lookup[v]] = 1.0
        elif col.missing:
            out[i, missing_slot] = 1.0
        else:
            raise EncodingError(f"column {col.name!r}: token {v!r} is not in the vocabulary")
    return out


def encode(
    records: Sequence[RawRecord],
    schema: FeatureSchema,
    stats: Optional[EncodingStats] = None,
) -> tuple[np.ndarray, EncodingStats]:
    """Encode records to a float64 matrix of width ``schema.encoded_width``.

    Numeric columns are z-scored with ``stats`` (fitted here when not given);
    a constant column gets sigma 1 and so encodes to all zeros.
    """
    if stats is None:
        stats = fit_stats(records, schema)
    elif tuple(schema.names) != stats.columns:
        raise SchemaMismatchError(
            f"statistics were fitted for columns {list(stats.columns)}, schema has {schema.names}"
        )
    for r in records:
        if len(r.values) != len(schema.columns):
            raise EncodingError(f"record {r.record_id!r} has {len(r.values)} values, schema has {len(schema.columns)}")
    if not records:
        return np.zeros((0, schema.encoded_width)), stats
    by_column = list(zip(*(r.values for r in records)))
    blocks = []
    for j, col in enumerate(schema.columns):
        if col.kind == "numeric":
            blocks.append(_encode_numeric(col, by_column[j], stats.mean[col.name], stats.std[col.name]))
        else:
            blocks.append(_encode_categorical(col, by_column[j]))
    x = np.hstack(blocks)
    assert x.shape[1] == schema.encoded_width
    return x, stats
