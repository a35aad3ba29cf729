"""Optimality gap, the tokens-per-step regression and batch summaries."""

from __future__ import annotations

import csv
import math
import re
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ..core import BlocksError
from .records import EvalRecord

PLOT_COLUMNS = ["complexity_axis", "c_opt", "plan_length", "valid", "thinking_tokens"]


class ZeroOptimal(BlocksError):
    """A non-empty plan where the optimum is zero; the gap is unbounded."""


class InsufficientData(BlocksError):
    pass


def optimality_gap(plan_length: int, c_opt: int) -> Fraction:
    """Relative excess of a valid plan over the optimum, as an exact fraction."""
    if c_opt == 0:
        if plan_length == 0:
            return Fraction(0)
        raise ZeroOptimal(f"plan of length {plan_length} for a zero-cost problem")
    if c_opt < 0:
        raise ValueError("c_opt must be non-negative")
    return Fraction(plan_length - c_opt, c_opt)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    n: int


def fit_tokens_per_step(records: Iterable[EvalRecord]) -> FitResult:
    """Least-squares line of thinking tokens against optimal cost over valid records."""
    points = [
        (r.c_opt, r.thinking_tokens)
        for r in records
        if r.valid and r.thinking_tokens is not None and r.c_opt is not None
    ]
    if len(points) < 2 or len({x for x, _ in points}) < 2:
        raise InsufficientData("need at least two valid records with distinct costs and token counts")
    xs = [float(x) for x, _ in points]
    ys = [float(y) for _, y in points]
    slope, intercept = statistics.linear_regression(xs, ys)
    mean_y = statistics.fmean(ys)
    ss_tot = sum((y - mean_y) ** 2 for y in ys)
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return FitResult(slope, intercept, r2, len(points))


@dataclass
class GroupSummary:
    curriculum: str
    producer_id: str
    representation: str
    n: int = 0
    valid: int = 0
    optimal: int = 0
    gaps: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def success_rate(self) -> Fraction:
        return Fraction(self.valid, self.n) if self.n else Fraction(0)

    @property
    def optimal_rate(self) -> Fraction:
        return Fraction(self.optimal, self.valid) if self.valid else Fraction(0)

    def gap_stats(self) -> Optional[tuple[float, float, float]]:
        finite = sorted(float(g) for g in self.gaps if not (isinstance(g, float) and math.isinf(g)))
        if not finite:
            return None
        return finite[0], statistics.median(finite), finite[-1]


@dataclass
class Summary:
    groups: list[GroupSummary]
    fits: dict[tuple[str, str], Optional[FitResult]]

    def to_dict(self) -> dict:
        groups = []
        for g in self.groups:
            stats = g.gap_stats()
            groups.append({
                "curriculum": g.curriculum,
                "producer": g.producer_id,
                "representation": g.representation,
                "instances": g.n,
                "valid": g.valid,
                "success_rate": float(g.success_rate),
                "optimal": g.optimal,
                "optimal_rate": float(g.optimal_rate),
                "gap_min": stats[0] if stats else None,
                "gap_median": stats[1] if stats else None,
                "gap_max": stats[2] if stats else None,
            })
        fits = []
        for (producer, rep), fit in self.fits.items():
            entry = {"producer": producer, "representation": rep}
            if fit is None:
                entry["fit"] = "insufficient data"
            else:
                entry.update(slope=fit.slope, intercept=fit.intercept, r2=fit.r2, n=fit.n)
            fits.append(entry)
        return {"groups": groups, "token_fits": fits}


def summarize(records: Sequence[EvalRecord]) -> Summary:
    groups: dict[tuple, GroupSummary] = {}
    by_producer: dict[tuple, list] = defaultdict(list)
    for r in records:
        key = (r.curriculum or "-", r.producer_id, r.representation)
        g = groups.setdefault(key, GroupSummary(*key))
        g.n += 1
        g.records.append(r)
        by_producer[(r.producer_id, r.representation)].append(r)
        if r.valid:
            g.valid += 1
            if r.gap is not None:
                g.gaps.append(r.gap)
                if r.gap == 0:
                    g.optimal += 1
    fits: dict[tuple[str, str], Optional[FitResult]] = {}
    for key, recs in by_producer.items():
        try:
            fits[key] = fit_tokens_per_step(recs)
        except InsufficientData:
            fits[key] = None
    return Summary([groups[k] for k in sorted(groups)], fits)


def _pct(x: Fraction) -> str:
    return f"{float(x) * 100:.1f}%"


def render_summary(summary: Summary) -> str:
    lines = []
    for g in summary.groups:
        lines.append(f"curriculum={g.curriculum} producer={g.producer_id} representation={g.representation}")
        lines.append(
            f"  instances={g.n} valid={g.valid} success_rate={_pct(g.success_rate)} "
            f"optimal={g.optimal} optimal_rate={_pct(g.optimal_rate)}"
        )
        stats = g.gap_stats()
        if stats:
            lines.append(f"  gap min={stats[0]:.4f} median={stats[1]:.4f} max={stats[2]:.4f}")
        else:
            lines.append("  gap n/a")
    for (producer, rep), fit in summary.fits.items():
        head = f"tokens-per-step fit producer={producer} representation={rep}:"
        if fit is None:
            lines.append(f"{head} insufficient data")
        else:
            lines.append(f"{head} slope={fit.slope:.4f} intercept={fit.intercept:.4f} r2={fit.r2:.4f} n={fit.n}")
    return "\n".join(lines) + "\n"


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text)


def write_plot_data(summary: Summary, out_dir: Path) -> list[Path]:
    """One CSV per (curriculum, producer, representation) group."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for g in summary.groups:
        path = out_dir / f"plot_{_slug(g.curriculum)}_{_slug(g.producer_id)}_{_slug(g.representation)}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLOT_COLUMNS)
            for r in g.records:
                w.writerow([
                    "" if r.complexity is None else r.complexity,
                    "" if r.c_opt is None else r.c_opt,
                    "" if r.plan_length is None else r.plan_length,
                    int(r.valid),
                    "" if r.thinking_tokens is None else r.thinking_tokens,
                ])
        paths.append(path)
    return paths
