"""End-to-end runs: dataset construction, model fitting, evaluation, scoring and sweeps.

The DL path and the RF path produce probability vectors that go through the
same thresholding and metric code. A run with seed ``s`` uses ``s`` for the
negative sample, the split, weight initialisation and shuffling alike.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .autoencoder import freeze, train_autoencoder
from .campaign import CampaignReport, rank_universe, simulate_campaign
from .classifier import ClassifierModel, predict_proba, threshold, train_classifier
from .classifier import from_container as clf_from_container
from .classifier import to_container as clf_to_container
from .config import SWEEP_VALUES, ConfigError, RunConfig
from .data import (
    EncodingStats,
    FeatureSchema,
    LabeledDataset,
    RawRecord,
    build_prospecting_dataset,
    encode,
    generate_synthetic,
    load_csv,
    load_schema,
    split,
)
from .forest import RandomForest, fit_forest, predict_proba_rf
from .forest import from_container as rf_from_container
from .forest import to_container as rf_to_container
from .io_utils import atomic_write_bytes, atomic_write_text
from .metrics import MetricReport, aggregate, compute_metrics
from .nn import serialize as ser

log = logging.getLogger(__name__)

Model = Union[ClassifierModel, RandomForest]


@dataclass
class Inputs:
    schema: FeatureSchema
    audience: list[RawRecord]
    universe: list[RawRecord]
    conversions: dict[str, int] = field(default_factory=dict)  # ground truth for campaigns; absent = 0


def read_conversions(path) -> dict[str, int]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["record_id", "conversions"]:
            raise ValueError(f"{path}: expected header record_id,conversions, got {header}")
        for line, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValueError(f"{path}: line {line}: expected 2 fields")
            count = int(row[1])
            if count < 0:
                raise ValueError(f"{path}: line {line}: negative conversion count")
            out[row[0]] = count
    return out


def format_conversions(conversions: dict[str, int]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["record_id", "conversions"])
    for rid in sorted(conversions):
        w.writerow([rid, conversions[rid]])
    return out.getvalue()


def load_inputs(cfg: RunConfig) -> Inputs:
    if cfg.uses_files:
        schema = load_schema(cfg.schema_path)
        conversions = read_conversions(cfg.conversions_path) if cfg.conversions_path else {}
        return Inputs(schema, load_csv(cfg.audience_path, schema), load_csv(cfg.universe_path, schema), conversions)
    pop = generate_synthetic(cfg.synthetic)
    return Inputs(pop.schema, pop.audience, pop.universe, pop.conversions)


def prepare_dataset(cfg: RunConfig, inputs: Inputs, seed: int) -> LabeledDataset:
    built = build_prospecting_dataset(inputs.audience, inputs.universe, cfg.ratio, seed, inputs.schema)
    return split(built, cfg.test_fraction, seed)


@dataclass
class RunResult:
    seed: int
    dataset: LabeledDataset
    model: Model
    train_report: MetricReport
    test_report: MetricReport
    ae_trace: list[float] = field(default_factory=list)
    clf_trace: list[float] = field(default_factory=list)

    @property
    def kind(self) -> str:
        return "rf" if isinstance(self.model, RandomForest) else "dl"


def model_proba(model: Model, x: np.ndarray) -> np.ndarray:
    if isinstance(model, RandomForest):
        return predict_proba_rf(model, x)
    return predict_proba(model, x)


def fit_dl(cfg: RunConfig, dataset: LabeledDataset, seed: int) -> tuple[ClassifierModel, list[float], list[float]]:
    x_train, _ = dataset.train()
    ae, ae_trace = train_autoencoder(x_train, cfg.autoencoder_config(seed))
    freeze(ae)
    clf, clf_trace = train_classifier(dataset, ae, cfg.train_config(seed))
    return clf, ae_trace, clf_trace


def evaluate(model: Model, dataset: LabeledDataset, cutoff: float = 0.5) -> tuple[MetricReport, MetricReport]:
    reports = []
    for x, y in (dataset.train(), dataset.test()):
        reports.append(compute_metrics(threshold(model_proba(model, x), cutoff), y))
    return reports[0], reports[1]


def run_single(cfg: RunConfig, inputs: Inputs, seed: int, dataset: Optional[LabeledDataset] = None) -> RunResult:
    dataset = dataset if dataset is not None else prepare_dataset(cfg, inputs, seed)
    ae_trace: list[float] = []
    clf_trace: list[float] = []
    if cfg.model == "rf":
        model: Model = fit_forest(dataset, cfg.rf_config(seed))
    else:
        model, ae_trace, clf_trace = fit_dl(cfg, dataset, seed)
    train_report, test_report = evaluate(model, dataset, cfg.threshold)
    log.info("seed %d %s: test P %.4f R %.4f F2 %.4f", seed, cfg.model, test_report.precision, test_report.recall, test_report.f_beta)
    return RunResult(seed, dataset, model, train_report, test_report, ae_trace, clf_trace)


def run(cfg: RunConfig, inputs: Optional[Inputs] = None) -> list[RunResult]:
    inputs = inputs if inputs is not None else load_inputs(cfg)
    return [run_single(cfg, inputs, seed) for seed in cfg.seeds]


def summary_rows(results: Sequence[RunResult]) -> list[dict]:
    """Mean and sample std per split, in the train/test table layout."""
    rows = []
    for split_name, attr in (("train", "train_report"), ("test", "test_report")):
        agg = aggregate([getattr(r, attr) for r in results])
        row = {"split": split_name, "n_seeds": len(results)}
        for name, (mean, std) in agg.items():
            row[f"{name}_mean"] = mean
            row[f"{name}_std"] = std
        rows.append(row)
    return rows


def format_summary(results: Sequence[RunResult]) -> str:
    lines = []
    for row in summary_rows(results):
        cells = [f"{m}: {row[m + '_mean']:.4f} ± {row[m + '_std']:.4f}" for m in MetricReport.FIELDS]
        lines.append(f"{row['split']:>5} (n_seeds={row['n_seeds']}) " + "  ".join(cells))
    return "\n".join(lines) + "\n"


# --- model artifacts carrying their encoding ---


def model_meta(dataset: LabeledDataset, extra: Optional[dict] = None) -> dict:
    meta = dict(extra or {})
    if dataset.schema is not None:
        meta["schema"] = dataset.schema.to_dict()
    if dataset.stats is not None:
        meta["stats"] = dataset.stats.to_dict()
    return meta


def save_model(path, model: Model, meta: dict) -> None:
    container = rf_to_container(model, meta) if isinstance(model, RandomForest) else clf_to_container(model, meta)
    atomic_write_bytes(path, ser.dumps(container))


@dataclass
class LoadedModel:
    model: Model
    schema: Optional[FeatureSchema]
    stats: Optional[EncodingStats]
    meta: dict

    def score(self, records: Sequence[RawRecord]) -> np.ndarray:
        if self.schema is None or self.stats is None:
            raise ConfigError("model artifact carries no schema/encoding statistics; cannot score raw records")
        x, _ = encode(records, self.schema, self.stats)
        return model_proba(self.model, x)


def load_model(path) -> LoadedModel:
    with open(path, "rb") as fh:
        c = ser.loads(fh.read())
    if c.kind == ser.KIND_FOREST:
        model: Model = rf_from_container(c)
    elif c.kind == ser.KIND_CLASSIFIER:
        model = clf_from_container(c)
    else:
        raise ser.FormatError(f"{path}: container kind {c.kind} is not a classifier or forest")
    schema = FeatureSchema.from_dict(c.meta["schema"]) if "schema" in c.meta else None
    stats = EncodingStats.from_dict(c.meta["stats"]) if "stats" in c.meta else None
    return LoadedModel(model, schema, stats, c.meta)


def run_campaign(
    probabilities: np.ndarray,
    record_ids: Sequence[str],
    reach: int,
    conversions: dict[str, int],
    method: str = "",
    audience: str = "",
    attribution_window: str = "unspecified",
) -> CampaignReport:
    ranked = rank_universe(probabilities, record_ids)
    return simulate_campaign(ranked, reach, conversions, attribution_window, method, audience)


# --- sweeps ---


@dataclass
class SweepRow:
    kind: str
    value: Union[int, str]
    split: str
    n_seeds: int
    n_rows: int
    n_positive: int
    metrics: dict[str, tuple[float, float]]  # name -> (mean, std)

    HEADER = ("sweep", "value", "split", "n_seeds", "n_rows", "n_positive") + tuple(
        f"{m}_{s}" for m in MetricReport.FIELDS for s in ("mean", "std")
    )

    def cells(self) -> list:
        out = [self.kind, self.value, self.split, self.n_seeds, self.n_rows, self.n_positive]
        for m in MetricReport.FIELDS:
            out += [repr(self.metrics[m][0]), repr(self.metrics[m][1])]
        return out


def _sweep_config(cfg: RunConfig, kind: str, value) -> RunConfig:
    if kind == "ratio":
        return dataclasses.replace(cfg, ratio=int(value))
    if kind == "encoder_size":
        return dataclasses.replace(cfg, encoded_size=int(value))
    return dataclasses.replace(cfg, architecture=str(value), hidden=None)


def validate_sweep(kind: str, values: Optional[Sequence]) -> list:
    if kind not in SWEEP_VALUES:
        raise ConfigError(f"unknown sweep kind {kind!r}; expected one of {list(SWEEP_VALUES)}")
    allowed = SWEEP_VALUES[kind]
    if values is None:
        return list(allowed)
    cast = str if kind == "architecture" else int
    out = []
    for v in values:
        try:
            v = cast(v)
        except ValueError:
            raise ConfigError(f"invalid {kind} value {v!r}") from None
        if v not in allowed:
            raise ConfigError(f"invalid {kind} value {v!r}; allowed: {list(allowed)}")
        out.append(v)
    return out


def sweep(
    kind: str,
    cfg: RunConfig,
    values: Optional[Sequence] = None,
    inputs: Optional[Inputs] = None,
    on_point: Optional[Callable[[object, list[RunResult]], None]] = None,
) -> list[SweepRow]:
    """One train row and one test row per sweep value, aggregated over cfg.seeds."""
    values = validate_sweep(kind, values)
    inputs = inputs if inputs is not None else load_inputs(cfg)
    rows = []
    for value in values:
        point_cfg = _sweep_config(cfg, kind, value)
        results = run(point_cfg, inputs)
        if on_point is not None:
            on_point(value, results)
        ds = results[0].dataset
        for split_name, attr in (("train", "train_report"), ("test", "test_report")):
            n_rows = int((~ds.is_test).sum()) if split_name == "train" else int(ds.is_test.sum())
            n_pos = int(ds.labels[ds.is_test == (split_name == "test")].sum())
            rows.append(SweepRow(kind, value, split_name, len(results), n_rows, n_pos, aggregate([getattr(r, attr) for r in results])))
    return rows


def format_sweep_csv(rows: Sequence[SweepRow]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SweepRow.HEADER)
    for r in rows:
        w.writerow(r.cells())
    return out.getvalue()


def format_sweep_table(rows: Sequence[SweepRow]) -> str:
    from .campaign import format_table

    header = ["sweep", "value", "split", "positives"] + list(MetricReport.FIELDS)
    body = [
        [r.kind, str(r.value), r.split, str(r.n_positive)]
        + [f"{r.metrics[m][0]:.4f} ± {r.metrics[m][1]:.4f}" for m in MetricReport.FIELDS]
        for r in rows
    ]
    return format_table(header, body)


def write_text(path, text: str) -> None:
    atomic_write_text(path, text)
