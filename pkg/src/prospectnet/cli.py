"""Command-line driver.

Settings resolve as: command-line flags, then the JSON file given with
``--config``, then the built-in defaults. Every command writes into its own
output directory and finishes by writing ``manifest.json`` (command, resolved
config, seeds and sha256 of every artifact). Output directories that already
hold files are refused unless ``--force`` is given.

Exit codes: 0 success, 1 configuration or usage of a value, 2 command-line
syntax (click), 3 input data or artifact format, 4 training diverged.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .autoencoder import TrainingError, save_autoencoder
from .campaign import (
    CampaignReport,
    ComparisonError,
    compare_models,
    format_campaign_csv,
    format_campaign_summary,
    format_ranked_csv,
    ranked_rows,
)
from .config import ConfigError, build_config, load_config_file
from .data import (
    CsvFormatError,
    DatasetError,
    EncodingError,
    SchemaError,
    SyntheticPopulationSpec,
    generate_synthetic,
    load_csv,
    write_csv,
)
from .io_utils import atomic_write_text, sha256_file
from .metrics import MetricReport
from .nn.serialize import FormatError
from .pipeline import (
    format_conversions,
    format_summary,
    format_sweep_csv,
    format_sweep_table,
    load_model,
    model_meta,
    read_conversions,
    run,
    run_campaign,
    save_model,
    summary_rows,
    sweep,
)


class CliError(click.ClickException):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except TrainingError as exc:
            raise CliError(f"training failed: {exc}", 4) from exc
        except (CsvFormatError, SchemaError, EncodingError, DatasetError, FormatError, FileNotFoundError) as exc:
            raise CliError(str(exc), 3) from exc
        except (ConfigError, ComparisonError, ValueError) as exc:
            raise CliError(str(exc), 1) from exc

    return wrapper


# --- output directory and manifest ---


def prepare_out_dir(path: str, force: bool) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise CliError(f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()) and not force:
        raise CliError(f"output directory {out} is not empty (use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, command: str, config: dict, seeds, artifacts: list[Path]) -> None:
    manifest = {
        "command": command,
        "package_version": __version__,
        "config": config,
        "seeds": list(seeds),
        "artifacts": {str(p.relative_to(out)): sha256_file(p) for p in sorted(artifacts)},
    }
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _portable_config(cfg) -> dict:
    # the output directory is left out so that runs into different directories hash alike
    d = cfg.to_dict()
    d.pop("output_dir")
    return d


def _write(out: Path, name: str, text: str, artifacts: list[Path]) -> Path:
    path = out / name
    atomic_write_text(path, text)
    artifacts.append(path)
    return path


def _int_list(text: Optional[str], what: str) -> Optional[list[int]]:
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"{what} must be a comma-separated list of integers, got {text!r}") from None


# --- shared run options ---


def run_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON config file."),
        click.option("--preset", type=click.Choice(["quick"]), help="Scaled-down training preset."),
        click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), help="Directory written by `synth`."),
        click.option("--schema", "schema_path", type=click.Path(exists=True, dir_okay=False)),
        click.option("--audience", "audience_path", type=click.Path(exists=True, dir_okay=False)),
        click.option("--universe", "universe_path", type=click.Path(exists=True, dir_okay=False)),
        click.option("--conversions", "conversions_path", type=click.Path(exists=True, dir_okay=False)),
        click.option("--ratio", type=int),
        click.option("--test-fraction", type=float),
        click.option("--encoded-size", type=int),
        click.option("--ae-first-width", type=int),
        click.option("--ae-epochs", type=int),
        click.option("--ae-learning-rate", type=float),
        click.option("--model", type=click.Choice(["dl", "rf"])),
        click.option("--architecture", type=str, help="A512, A2048 or A4096."),
        click.option("--hidden", type=str, help="Custom hidden widths, e.g. 128,64 (overrides --architecture)."),
        click.option("--optimizer", type=click.Choice(["sgd_momentum", "adam", "adamw"])),
        click.option("--learning-rate", type=float),
        click.option("--momentum", type=float),
        click.option("--batch-size", type=int),
        click.option("--epochs", type=int),
        click.option("--dropout", "dropout_p", type=float),
        click.option("--class-weight-ratio", type=float, help="w1/w0 with w0 = 1 (default: inverse frequency)."),
        click.option("--threshold", type=float),
        click.option("--rf-trees", type=int),
        click.option("--rf-max-depth", type=int),
        click.option("--rf-min-samples", type=float),
        click.option("--rf-features-per-split", type=int),
        click.option("--rf-weighted-gini/--no-rf-weighted-gini", default=None),
        click.option("--seeds", type=str, help="Comma-separated seeds, e.g. 1,2,3,4,5."),
        click.option("--synth-seed", type=int, help="Seed of the synthetic population (when no data files are given)."),
        click.option("--out", "output_dir", type=click.Path(file_okay=False)),
        click.option("--force", is_flag=True, help="Write into a non-empty output directory."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def resolve_config(kwargs: dict):
    flags = dict(kwargs)
    config_path = flags.pop("config_path")
    data_dir = flags.pop("data_dir")
    flags.pop("force")
    if data_dir is not None:
        d = Path(data_dir)
        flags.setdefault("schema_path", None)
        for key, name in (("schema_path", "schema.txt"), ("audience_path", "audience.csv"), ("universe_path", "universe.csv"), ("conversions_path", "conversions.csv")):
            if flags.get(key) is None and (d / name).exists():
                flags[key] = str(d / name)
    if flags.get("hidden") is not None:
        flags["hidden"] = _int_list(flags["hidden"], "--hidden")
    if flags.get("seeds") is not None:
        flags["seeds"] = _int_list(flags["seeds"], "--seeds")
    if flags.get("rf_min_samples") is not None and float(flags["rf_min_samples"]).is_integer():
        flags["rf_min_samples"] = int(flags["rf_min_samples"])
    synth_seed = flags.pop("synth_seed")
    if synth_seed is not None:
        flags["synthetic"] = {"seed": synth_seed}
    file_layer = load_config_file(config_path) if config_path else None
    preset = flags.pop("preset")
    flag_layer = {k: v for k, v in flags.items() if v is not None}
    if preset is not None:
        flag_layer = {"preset": preset, **flag_layer}
    return build_config(file_layer, flag_layer)


# --- commands ---


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for per-epoch losses.")
def main(verbose: int):
    """Prospecting classifier toolkit: data, training, sweeps, ranking and campaigns."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--force", is_flag=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--universe-size", type=int, default=50_000, show_default=True)
@click.option("--audience-size", type=int, default=5_000, show_default=True)
@click.option("--numeric-dims", type=int, default=30, show_default=True)
@click.option("--categorical", type=str, default="5,5,5,5", show_default=True, help="Cardinalities of the categorical columns.")
@click.option("--separation", type=float, default=1.5, show_default=True)
@click.option("--customer-like-fraction", type=float, default=0.03, show_default=True)
@click.option("--missing-rate", type=float, default=0.0, show_default=True)
@handle_errors
def synth(out_dir, force, seed, universe_size, audience_size, numeric_dims, categorical, separation, customer_like_fraction, missing_rate):
    """Write a synthetic population: schema, audience, universe and conversions."""
    spec = SyntheticPopulationSpec(
        universe_size=universe_size,
        audience_size=audience_size,
        numeric_dims=numeric_dims,
        categorical_cardinalities=tuple(_int_list(categorical, "--categorical") or ()),
        separation=separation,
        customer_like_fraction=customer_like_fraction,
        missing_rate=missing_rate,
        seed=seed,
    )  # validated before anything touches the disk
    out = prepare_out_dir(out_dir, force)
    pop = generate_synthetic(spec)
    artifacts: list[Path] = []
    _write(out, "schema.txt", pop.schema.to_text(), artifacts)
    for name, records in (("audience.csv", pop.audience), ("universe.csv", pop.universe)):
        write_csv(out / name, records, pop.schema)
        artifacts.append(out / name)
    _write(out, "conversions.csv", format_conversions(pop.conversions), artifacts)
    spec_dict = {k: getattr(spec, k) for k in spec.__dataclass_fields__}
    spec_dict["categorical_cardinalities"] = list(spec.categorical_cardinalities)
    write_manifest(out, "synth", spec_dict, [seed], artifacts)
    click.echo(f"wrote {len(pop.audience)} audience rows and {len(pop.universe)} universe rows to {out}")


def _metrics_csv(results) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["seed", "split", "n", "beta", *MetricReport.FIELDS, "degenerate"])
    for r in results:
        for split_name, rep in (("train", r.train_report), ("test", r.test_report)):
            d = rep.as_dict()
            w.writerow([r.seed, split_name, d["n"], d["beta"], *(repr(d[k]) for k in MetricReport.FIELDS), d["degenerate"]])
    return out.getvalue()


def _trace_csv(ae_trace, clf_trace) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["stage", "epoch", "loss"])
    for stage, trace in (("autoencoder", ae_trace), ("classifier", clf_trace)):
        for i, v in enumerate(trace):
            w.writerow([stage, i, repr(v)])
    return out.getvalue()


def _summary_csv(results) -> str:
    rows = summary_rows(results)
    out = io.StringIO()
    w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return out.getvalue()


@main.command()
@run_options
@handle_errors
def train(**kwargs):
    """Train the DL-AE model (or the RF baseline with --model rf) over one or more seeds."""
    cfg = resolve_config(kwargs)
    out = prepare_out_dir(cfg.output_dir, kwargs["force"])
    results = run(cfg)
    artifacts: list[Path] = []
    _write(out, "config.json", json.dumps(_portable_config(cfg), indent=2, sort_keys=True) + "\n", artifacts)
    for r in results:
        sub = out / f"seed_{r.seed}"
        meta = model_meta(r.dataset, {"seed": r.seed, "model": r.kind, "ratio": cfg.ratio})
        save_model(sub / "model.pknn", r.model, meta)
        artifacts.append(sub / "model.pknn")
        if r.kind == "dl":
            save_autoencoder(sub / "autoencoder.pknn", r.model.encoder, meta={"seed": r.seed})
            artifacts.append(sub / "autoencoder.pknn")
            _write(sub, "traces.csv", _trace_csv(r.ae_trace, r.clf_trace), artifacts)
        _write(sub, "metrics.txt", "train\n" + r.train_report.to_text() + "test\n" + r.test_report.to_text(), artifacts)
    _write(out, "metrics.csv", _metrics_csv(results), artifacts)
    _write(out, "summary.csv", _summary_csv(results), artifacts)
    summary = format_summary(results)
    _write(out, "summary.txt", summary, artifacts)
    write_manifest(out, "train", _portable_config(cfg), cfg.seeds, artifacts)
    click.echo(f"model: {cfg.model}  seeds: {','.join(map(str, cfg.seeds))}")
    click.echo(summary, nl=False)


@main.command("sweep")
@click.argument("kind", type=click.Choice(["encoder_size", "architecture", "ratio"]))
@click.option("--values", type=str, help="Comma-separated sweep values (default: the full set for KIND).")
@run_options
@handle_errors
def sweep_cmd(kind, values, **kwargs):
    """Sweep encoder size, architecture or ratio; one train and one test row per value."""
    cfg = resolve_config(kwargs)
    value_list = [v.strip() for v in values.split(",") if v.strip()] if values else None
    from .pipeline import validate_sweep

    validate_sweep(kind, value_list)  # fail before creating the output directory
    out = prepare_out_dir(cfg.output_dir, kwargs["force"])
    rows = sweep(kind, cfg, value_list)
    artifacts: list[Path] = []
    _write(out, "config.json", json.dumps(_portable_config(cfg), indent=2, sort_keys=True) + "\n", artifacts)
    _write(out, "sweep.csv", format_sweep_csv(rows), artifacts)
    table = format_sweep_table(rows)
    _write(out, "sweep.txt", table, artifacts)
    write_manifest(out, f"sweep {kind}", {**_portable_config(cfg), "sweep_values": value_list}, cfg.seeds, artifacts)
    click.echo(table, nl=False)


def _load_universe(loaded, universe_path, exclude_path):
    records = load_csv(universe_path, loaded.schema) if loaded.schema is not None else None
    if records is None:
        raise CliError("model artifact carries no schema; cannot read raw records", 3)
    if exclude_path:
        excluded = {r.record_id for r in load_csv(exclude_path, loaded.schema)}
        records = [r for r in records if r.record_id not in excluded]
    return records


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--universe", "universe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--exclude", "exclude_path", type=click.Path(exists=True, dir_okay=False), help="CSV of ids to drop (e.g. the audience).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--force", is_flag=True)
@handle_errors
def rank(model_path, universe_path, exclude_path, out_dir, force):
    """Score a universe CSV and write rank,record_id,probability."""
    loaded = load_model(model_path)
    records = _load_universe(loaded, universe_path, exclude_path)
    out = prepare_out_dir(out_dir, force)
    probs = loaded.score(records)
    artifacts: list[Path] = []
    _write(out, "ranked.csv", format_ranked_csv(ranked_rows(probs, [r.record_id for r in records])), artifacts)
    config = {"model": model_path, "model_sha256": sha256_file(model_path), "universe": universe_path, "exclude": exclude_path}
    write_manifest(out, "rank", config, [loaded.meta.get("seed", 0)], artifacts)
    click.echo(f"ranked {len(records)} records into {out / 'ranked.csv'}")


@main.command()
@click.option("--model", "model_paths", required=True, multiple=True, type=click.Path(exists=True, dir_okay=False), help="Repeat to compare models.")
@click.option("--tag", "tags", multiple=True, help="Method label per --model (default: model kind).")
@click.option("--universe", "universe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--conversions", "conversions_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--reach", "reaches", required=True, multiple=True, type=int, help="One value, or one per --model.")
@click.option("--exclude", "exclude_path", type=click.Path(exists=True, dir_okay=False), help="CSV of ids to drop (e.g. the audience).")
@click.option("--audience-label", default="", help="Value for the Audience column.")
@click.option("--window", default="unspecified", help="Attribution-window label carried into the report.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--force", is_flag=True)
@handle_errors
def campaign(model_paths, tags, universe_path, conversions_path, reaches, exclude_path, audience_label, window, out_dir, force):
    """Rank the universe with each model, mail the top REACH, and report conversions."""
    if len(reaches) not in (1, len(model_paths)):
        raise CliError("give one --reach or one per --model")
    if tags and len(tags) != len(model_paths):
        raise CliError("give one --tag per --model")
    reaches = list(reaches) * len(model_paths) if len(reaches) == 1 else list(reaches)
    conversions = read_conversions(conversions_path)
    models = [load_model(p) for p in model_paths]
    universes = [_load_universe(m, universe_path, exclude_path) for m in models]
    for recs, reach in zip(universes, reaches):
        if reach > len(recs):
            raise CliError(f"reach {reach} exceeds the universe size ({len(recs)})")
    out = prepare_out_dir(out_dir, force)
    artifacts: list[Path] = []
    reports: list[CampaignReport] = []
    labels = list(tags) or [m.meta.get("model", "model") for m in models]
    if len(set(labels)) != len(labels):
        labels = [f"{label}_{i + 1}" for i, label in enumerate(labels)]
    for i, (m, recs, reach, label) in enumerate(zip(models, universes, reaches, labels)):
        ids = [r.record_id for r in recs]
        probs = m.score(recs)
        _write(out, f"ranked_{i + 1}_{label}.csv", format_ranked_csv(ranked_rows(probs, ids)), artifacts)
        reports.append(run_campaign(probs, ids, reach, conversions, label, audience_label, window))
    _write(out, "campaign.csv", format_campaign_csv(reports), artifacts)
    summary = format_campaign_summary(reports)
    if len(reports) > 1:
        cmp = compare_models([(label, rep) for label, rep in zip(labels, reports)])
        _write(out, "comparison.csv", cmp.to_csv(), artifacts)
        summary += "\n" + cmp.to_text()
    _write(out, "campaign.txt", summary, artifacts)
    config = {
        "models": {p: sha256_file(p) for p in model_paths},
        "tags": labels,
        "universe": universe_path,
        "conversions": conversions_path,
        "reach": reaches,
        "exclude": exclude_path,
        "window": window,
    }
    write_manifest(out, "campaign", config, [m.meta.get("seed", 0) for m in models], artifacts)
    click.echo(summary, nl=False)


def _read_run_metrics(run_dir: Path, split_name: str) -> dict[int, MetricReport]:
    path = run_dir / "metrics.csv"
    if not path.exists():
        raise CliError(f"{run_dir} has no metrics.csv (not a `train` output directory?)", 3)
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["split"] != split_name:
                continue
            out[int(row["seed"])] = MetricReport(
                accuracy=float(row["accuracy"]),
                precision=float(row["precision"]),
                recall=float(row["recall"]),
                f_beta=float(row["f_beta"]),
                beta=float(row["beta"]),
                n=int(row["n"]),
                degenerate=tuple(x for x in row["degenerate"].split(";") if x),
            )
    return out


@main.command()
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--tag", "tags", multiple=True, help="Label per run directory (default: directory name).")
@click.option("--split", "split_name", type=click.Choice(["train", "test"]), default="test", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--force", is_flag=True)
@handle_errors
def compare(run_dirs, tags, split_name, out_dir, force):
    """Seed-paired comparison of `train` runs: per-metric deltas and win/tie/loss on F2.

    The first directory is the reference. Runs must share seeds and dataset size.
    """
    if len(run_dirs) < 2:
        raise CliError("need at least two run directories")
    if tags and len(tags) != len(run_dirs):
        raise CliError("give one --tag per run directory")
    labels = list(tags) or [Path(d).name for d in run_dirs]
    per_run = [_read_run_metrics(Path(d), split_name) for d in run_dirs]
    seeds = sorted(per_run[0])
    if any(sorted(m) != seeds for m in per_run):
        raise CliError("runs were trained on different seed lists")
    runs = [[(label, m[s]) for label, m in zip(labels, per_run)] for s in seeds]
    cmp = compare_models(runs)
    out = prepare_out_dir(out_dir, force)
    artifacts: list[Path] = []
    _write(out, "comparison.csv", cmp.to_csv(), artifacts)
    text = cmp.to_text()
    _write(out, "comparison.txt", text, artifacts)
    write_manifest(out, "compare", {"runs": list(run_dirs), "tags": labels, "split": split_name}, seeds, artifacts)
    click.echo(text, nl=False)


if __name__ == "__main__":
    main()
