"""Ranking a universe by predicted probability and simulating a mailing."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence, Union

import numpy as np

from .metrics import MetricReport


class ComparisonError(ValueError):
    pass


def rank_universe(probabilities, record_ids) -> list[str]:
    """Record ids by descending probability; equal probabilities by ascending id."""
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    ids = [str(r) for r in record_ids]
    if p.size != len(ids):
        raise ValueError(f"length mismatch: {p.size} probabilities vs {len(ids)} ids")
    order = sorted(range(len(ids)), key=lambda i: (-p[i], ids[i]))
    return [ids[i] for i in order]


def ranked_rows(probabilities, record_ids) -> list[tuple[int, str, float]]:
    """(rank, record_id, probability) with rank starting at 1."""
    prob = {str(r): float(v) for r, v in zip(record_ids, np.asarray(probabilities).ravel())}
    return [(i + 1, rid, prob[rid]) for i, rid in enumerate(rank_universe(probabilities, record_ids))]


def format_ranked_csv(rows: Sequence[tuple[int, str, float]]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["rank", "record_id", "probability"])
    for rank, rid, p in rows:
        w.writerow([rank, rid, repr(p)])
    return out.getvalue()


def percent_half_up(numerator: int, denominator: int, decimals: int = 2) -> Decimal:
    """100 * numerator / denominator rounded half-up, computed exactly."""
    q = Decimal(1).scaleb(-decimals)
    return (Decimal(int(numerator)) * 100 / Decimal(int(denominator))).quantize(q, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class CampaignReport:
    reach: int
    converters: int
    conversions: int
    cvr: float
    attribution_window: str = "unspecified"
    ranked_ids: tuple[str, ...] = field(default=(), repr=False)  # the mailed households, in rank order
    universe_size: int = 0
    method: str = ""
    audience: str = ""

    def __post_init__(self):
        if self.converters > self.reach:
            raise ValueError("converters cannot exceed reach")
        if self.converters > 0 and self.conversions < self.converters:
            raise ValueError("each converter has at least one conversion")

    @property
    def cvr_percent(self) -> Decimal:
        return percent_half_up(self.conversions, self.reach)

    def cvr_display(self) -> str:
        return f"{self.cvr_percent}%"


def simulate_campaign(
    ranked_ids: Sequence[str],
    reach: int,
    conversions: Mapping[str, int],
    attribution_window: str = "unspecified",
    method: str = "",
    audience: str = "",
) -> CampaignReport:
    """Mail the top ``reach`` ids; ids absent from ``conversions`` count as 0."""
    if reach <= 0:
        raise ValueError("reach must be positive")
    if reach > len(ranked_ids):
        raise ValueError(f"reach {reach} exceeds the ranked universe ({len(ranked_ids)} ids)")
    mailed = tuple(str(r) for r in ranked_ids[:reach])
    counts = [int(conversions.get(r, 0)) for r in mailed]
    if any(c < 0 for c in counts):
        raise ValueError("conversion counts must be non-negative")
    total = sum(counts)
    return CampaignReport(
        reach=reach,
        converters=sum(1 for c in counts if c > 0),
        conversions=total,
        cvr=total / reach,
        attribution_window=attribution_window,
        ranked_ids=mailed,
        universe_size=len(ranked_ids),
        method=method,
        audience=audience,
    )


CAMPAIGN_COLUMNS = ("Method", "Audience", "Reach", "#CNV", "CVR", "Converters", "Window")


def campaign_rows(reports: Sequence[CampaignReport]) -> list[list[str]]:
    return [
        [r.method, r.audience, str(r.reach), str(r.conversions), r.cvr_display(), str(r.converters), r.attribution_window]
        for r in reports
    ]


def format_campaign_csv(reports: Sequence[CampaignReport]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CAMPAIGN_COLUMNS)
    w.writerows(campaign_rows(reports))
    return out.getvalue()


def format_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    line = lambda cells: " | ".join(str(c).rjust(w) for c, w in zip(cells, widths))
    return "\n".join([line(header), "-+-".join("-" * w for w in widths), *map(line, rows)]) + "\n"


def format_campaign_summary(reports: Sequence[CampaignReport]) -> str:
    return format_table(CAMPAIGN_COLUMNS[:5], [row[:5] for row in campaign_rows(reports)])


# --- comparisons ---

Report = Union[CampaignReport, MetricReport]


@dataclass(frozen=True)
class Tally:
    wins: int = 0
    ties: int = 0
    losses: int = 0

    @property
    def total(self) -> int:
        return self.wins + self.ties + self.losses


def _key_value(report: Report, decimals: int) -> Decimal:
    if isinstance(report, CampaignReport):
        return percent_half_up(report.conversions, report.reach, decimals)
    return (Decimal(repr(report.f_beta)) * 100).quantize(Decimal(1).scaleb(-decimals), rounding=ROUND_HALF_UP)


def outcome(a: Report, b: Report, decimals: int = 2) -> str:
    """'win' / 'tie' / 'loss' for ``a`` against ``b``: CVR for campaigns,
    F-beta for metric reports, both compared as percentages at ``decimals``."""
    ka, kb = _key_value(a, decimals), _key_value(b, decimals)
    if ka > kb:
        return "win"
    if ka < kb:
        return "loss"
    return "tie"


def tally(outcomes: Sequence[str]) -> Tally:
    bad = set(outcomes) - {"win", "tie", "loss"}
    if bad:
        raise ValueError(f"unknown outcomes {bad}")
    return Tally(outcomes.count("win"), outcomes.count("tie"), outcomes.count("loss"))


def _fields(report: Report) -> dict[str, float]:
    if isinstance(report, CampaignReport):
        return {"reach": report.reach, "converters": report.converters, "conversions": report.conversions, "cvr": report.cvr}
    return {k: getattr(report, k) for k in MetricReport.FIELDS}


def _dataset_key(report: Report):
    return ("campaign", report.universe_size) if isinstance(report, CampaignReport) else ("metrics", report.n)


@dataclass
class Comparison:
    reference: str
    tags: list[str]
    means: dict[str, dict[str, float]]
    deltas: dict[str, dict[str, float]]  # tag -> metric -> mean(reference) - mean(tag)
    tallies: dict[str, Tally]  # reference vs tag across runs

    def rows(self) -> list[list[str]]:
        out = []
        for tag in self.tags:
            t = self.tallies.get(tag)
            cells = [tag] + [f"{v:.6g}" for v in self.means[tag].values()]
            cells += [f"{v:+.6g}" for v in self.deltas[tag].values()] if tag != self.reference else [""] * len(self.deltas[tag])
            cells += [f"{t.wins}/{t.ties}/{t.losses}" if t else ""]
            out.append(cells)
        return out

    def header(self) -> list[str]:
        names = list(self.means[self.reference])
        return ["model", *names, *[f"ref-minus-{n}" for n in names], f"{self.reference} W/T/L"]

    def to_text(self) -> str:
        return format_table(self.header(), self.rows())

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.header())
        w.writerows(self.rows())
        return out.getvalue()


def compare_models(runs: Sequence[Sequence[tuple[str, Report]]], decimals: int = 2) -> Comparison:
    """Compare tagged reports; the first tag of the first run is the reference.

    ``runs`` holds one list of (tag, report) per repeated run; a single run
    may be passed bare. Every report in a run must describe the same dataset
    or universe.
    """
    if runs and isinstance(runs[0], tuple) and isinstance(runs[0][0], str):
        runs = [runs]  # a single run
    if not runs:
        raise ComparisonError("no reports to compare")
    tags = [t for t, _ in runs[0]]
    if len(tags) < 2 or len(set(tags)) != len(tags):
        raise ComparisonError("need at least two distinct model tags")
    for run in runs:
        if [t for t, _ in run] != tags:
            raise ComparisonError("every run must report the same tags in the same order")
        kinds = {_dataset_key(r) for _, r in run}
        if len(kinds) != 1:
            raise ComparisonError(f"reports in one run describe different datasets: {sorted(kinds)}")
    ref = tags[0]
    means = {}
    for i, tag in enumerate(tags):
        vals = [_fields(run[i][1]) for run in runs]
        means[tag] = {k: float(np.mean([v[k] for v in vals])) for k in vals[0]}
    deltas = {tag: {k: means[ref][k] - means[tag][k] for k in means[ref]} for tag in tags}
    tallies = {
        tag: tally([outcome(run[0][1], run[i][1], decimals) for run in runs]) for i, tag in enumerate(tags) if i > 0
    }
    return Comparison(ref, tags, means, deltas, tallies)
