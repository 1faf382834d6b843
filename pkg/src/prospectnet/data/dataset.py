"""Prospecting dataset: audience as class 1, a uniform sample of the rest of
the universe as class 0, stratified train/test split and inverse-frequency
class weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..nn.losses import ClassWeights
from .csvio import RawRecord
from .encoding import EncodingStats, encode
from .schema import FeatureSchema


class DatasetError(ValueError):
    pass


@dataclass
class LabeledDataset:
    features: np.ndarray  # (n, encoded_width), float64
    labels: np.ndarray  # (n,), int8 in {0, 1}
    record_ids: np.ndarray  # (n,), str
    class_weights: ClassWeights
    is_test: np.ndarray  # (n,), bool; False everywhere until split()
    ratio: float
    schema: Optional[FeatureSchema] = None
    stats: Optional[EncodingStats] = None
    records: Optional[list[RawRecord]] = None  # kept so split() can refit encoding on train rows

    def __post_init__(self):
        n = self.features.shape[0]
        if not (len(self.labels) == len(self.record_ids) == len(self.is_test) == n):
            raise DatasetError("row counts disagree across dataset fields")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def split_tags(self) -> np.ndarray:
        return np.where(self.is_test, "test", "train")

    def train(self) -> tuple[np.ndarray, np.ndarray]:
        m = ~self.is_test
        return self.features[m], self.labels[m]

    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[self.is_test], self.labels[self.is_test]


def inverse_frequency_weights(labels) -> ClassWeights:
    """w_c = N / N_c, so that w_c * N_c is the same for both classes."""
    labels = np.asarray(labels)
    n = labels.size
    n1 = int(np.sum(labels == 1))
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise DatasetError("both classes must be present to compute class weights")
    return ClassWeights(w0=n / n0, w1=n / n1)


def build_prospecting_dataset(
    audience: Sequence[RawRecord],
    universe: Sequence[RawRecord],
    ratio: int,
    seed: int,
    schema: FeatureSchema,
) -> LabeledDataset:
    """All audience rows as positives plus ``ratio * len(audience)`` negatives
    drawn uniformly without replacement from universe minus audience."""
    if isinstance(ratio, bool) or int(ratio) != ratio or ratio < 1:
        raise DatasetError(f"ratio must be an integer >= 1, got {ratio!r}")
    ratio = int(ratio)
    if not audience:
        raise DatasetError("audience is empty")
    audience_ids = {r.record_id for r in audience}
    if len(audience_ids) != len(audience):
        raise DatasetError("duplicate record ids in audience")
    candidates = [r for r in universe if r.record_id not in audience_ids]
    n_neg = ratio * len(audience)
    if len(candidates) < n_neg:
        raise DatasetError(
            f"universe minus audience has {len(candidates)} rows; ratio {ratio} needs {n_neg}"
        )
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(candidates), size=n_neg, replace=False))
    negatives = [candidates[i] for i in picked]

    records = list(audience) + negatives
    labels = np.concatenate([np.ones(len(audience), np.int8), np.zeros(n_neg, np.int8)])
    features, stats = encode(records, schema)
    return LabeledDataset(
        features=features,
        labels=labels,
        record_ids=np.array([r.record_id for r in records]),
        class_weights=inverse_frequency_weights(labels),
        is_test=np.zeros(len(records), dtype=bool),
        ratio=float(ratio),
        schema=schema,
        stats=stats,
        records=records,
    )


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(dataset: LabeledDataset, test_fraction: float = 0.2, seed: int = 0) -> LabeledDataset:
    """Stratified split; returns a new dataset with test tags, class weights
    recomputed on the train rows, and (when raw records are held) features
    re-encoded with statistics fitted on the train rows only."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    is_test = np.zeros(dataset.n_rows, dtype=bool)
    for cls in (0, 1):
        idx = np.flatnonzero(dataset.labels == cls)
        n_test = _half_up(test_fraction * idx.size)
        if idx.size - n_test <= 0:
            raise DatasetError(f"class {cls} would receive zero training rows")
        is_test[rng.permutation(idx)[:n_test]] = True

    train_labels = dataset.labels[~is_test]
    out = replace(dataset, is_test=is_test, class_weights=inverse_frequency_weights(train_labels))
    if dataset.records is not None and dataset.schema is not None:
        train_records = [r for r, t in zip(dataset.records, is_test) if not t]
        _, stats = encode(train_records, dataset.schema)
        out.features, out.stats = encode(dataset.records, dataset.schema, stats)
    return out


def save_snapshot(path, dataset: LabeledDataset) -> None:
    """Encoded matrix + labels + split tags in a PKNN container."""
    from ..io_utils import atomic_write_bytes
    from ..nn.serialize import KIND_DATASET, Container, dumps

    meta = {
        "ratio": dataset.ratio,
        "w0": dataset.class_weights.w0,
        "w1": dataset.class_weights.w1,
        "record_ids": [str(r) for r in dataset.record_ids],
    }
    if dataset.schema is not None:
        meta["schema"] = dataset.schema.to_dict()
    if dataset.stats is not None:
        meta["stats"] = dataset.stats.to_dict()
    arrays = {
        "features": dataset.features.astype(np.float64),
        "labels": dataset.labels.astype(np.uint8),
        "is_test": dataset.is_test.astype(np.uint8),
    }
    atomic_write_bytes(path, dumps(Container(KIND_DATASET, meta, [], arrays)))


def load_snapshot(path) -> LabeledDataset:
    from ..nn.serialize import KIND_DATASET, loads

    with open(path, "rb") as fh:
        c = loads(fh.read(), expect_kind=KIND_DATASET)
    m = c.meta
    return LabeledDataset(
        features=c.arrays["features"],
        labels=c.arrays["labels"].astype(np.int8),
        record_ids=np.array(m["record_ids"]),
        class_weights=ClassWeights(m["w0"], m["w1"]),
        is_test=c.arrays["is_test"].astype(bool),
        ratio=m["ratio"],
        schema=FeatureSchema.from_dict(m["schema"]) if "schema" in m else None,
        stats=EncodingStats.from_dict(m["stats"]) if "stats" in m else None,
    )
