"""Learning-curve aggregation, SVG plotting and final-performance comparison.

``curves.csv`` columns: ``label, step, mean, std, n``.  The SVG is rendered
from the CSV rows alone; its root element carries the axis transform as
``data-*`` attributes so the plotted coordinates can be mapped back.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .train import load_metrics

log = logging.getLogger(__name__)

SVG_W, SVG_H, MARGIN = 640.0, 400.0, 50.0
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def seed_curves(run_dir) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """seed -> (steps, eval returns) for every seed directory under ``run_dir``."""
    out = {}
    for path in sorted(Path(run_dir).glob("seed_*/metrics.jsonl")):
        recs = [r for r in load_metrics(path) if "eval_return" in r and "error" not in r]
        if not recs:
            continue
        seed = int(recs[0]["seed"])
        out[seed] = (np.array([r["step"] for r in recs], float), np.array([r["eval_return"] for r in recs], float))
    if not out:
        raise FileNotFoundError(f"no metrics found under {run_dir}")
    return out


def aggregate(run_dir) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, list[str]]:
    """Per-step mean and std (population) across seeds.

    Seeds evaluated on different grids are interpolated onto the coarsest
    grid; each such resampling adds a warning message.
    """
    curves = seed_curves(run_dir)
    grids = [steps for steps, _ in curves.values()]
    warnings = []
    coarse = min(grids, key=len)
    if any(len(g) != len(coarse) or not np.array_equal(g, coarse) for g in grids):
        msg = f"{run_dir}: eval grids differ across seeds; resampled to the coarsest grid ({len(coarse)} points)"
        log.warning(msg)
        warnings.append(msg)
        values = np.stack([np.interp(coarse, s, v) for s, v in curves.values()])
    else:
        values = np.stack([v for _, v in curves.values()])
    return coarse, values.mean(axis=0), values.std(axis=0), len(curves), warnings


def _label(run_dir) -> str:
    return Path(run_dir).name


def write_curves_csv(run_dirs: Sequence, path) -> list[str]:
    warnings = []
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "step", "mean", "std", "n"])
        for d in run_dirs:
            steps, mean, std, n, warn = aggregate(d)
            warnings += warn
            for s, m, sd in zip(steps, mean, std):
                w.writerow([_label(d), repr(float(s)), repr(float(m)), repr(float(sd)), n])
    return warnings


def read_curves_csv(path) -> dict[str, dict[str, np.ndarray]]:
    series: dict[str, dict[str, list]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            s = series.setdefault(row["label"], {"step": [], "mean": [], "std": []})
            for k in ("step", "mean", "std"):
                s[k].append(float(row[k]))
    return {k: {c: np.array(v) for c, v in d.items()} for k, d in series.items()}


@dataclass
class Axes:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def x(self, v):
        return MARGIN + (np.asarray(v) - self.xmin) / (self.xmax - self.xmin) * (SVG_W - 2 * MARGIN)

    def y(self, v):
        return SVG_H - MARGIN - (np.asarray(v) - self.ymin) / (self.ymax - self.ymin) * (SVG_H - 2 * MARGIN)

    def inv_x(self, px):
        return self.xmin + (np.asarray(px) - MARGIN) / (SVG_W - 2 * MARGIN) * (self.xmax - self.xmin)

    def inv_y(self, py):
        return self.ymin + (SVG_H - MARGIN - np.asarray(py)) / (SVG_H - 2 * MARGIN) * (self.ymax - self.ymin)


def _fmt(v: float) -> str:
    return repr(float(v))


def render_svg(series: dict[str, dict[str, np.ndarray]]) -> str:
    """Solid mean line and shaded +-1 std band per label."""
    xs = np.concatenate([s["step"] for s in series.values()])
    lo = np.concatenate([s["mean"] - s["std"] for s in series.values()])
    hi = np.concatenate([s["mean"] + s["std"] for s in series.values()])
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(lo.min()), float(hi.max())
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymin, ymax = ymin - 1.0, ymax + 1.0
    ax = Axes(xmin, xmax, ymin, ymax)
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W:g}" height="{SVG_H:g}" '
        f'data-xmin="{_fmt(xmin)}" data-xmax="{_fmt(xmax)}" data-ymin="{_fmt(ymin)}" data-ymax="{_fmt(ymax)}" '
        f'data-margin="{MARGIN:g}">\n'
    )
    out.write(f'<rect x="0" y="0" width="{SVG_W:g}" height="{SVG_H:g}" fill="white"/>\n')
    x0, y0 = MARGIN, SVG_H - MARGIN
    out.write(f'<line x1="{x0}" y1="{y0}" x2="{SVG_W - MARGIN}" y2="{y0}" stroke="black"/>\n')
    out.write(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN}" stroke="black"/>\n')
    out.write(f'<text x="{SVG_W / 2}" y="{SVG_H - 10}" text-anchor="middle" font-size="12">env step</text>\n')
    out.write(f'<text x="12" y="{MARGIN - 15}" font-size="12">eval return [{ymin:.4g}, {ymax:.4g}]</text>\n')
    for i, (label, s) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        px = ax.x(s["step"])
        upper = ax.y(s["mean"] + s["std"])
        lower = ax.y(s["mean"] - s["std"])
        band = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(np.r_[px, px[::-1]], np.r_[upper, lower[::-1]]))
        line = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, ax.y(s["mean"])))
        out.write(f'<polygon data-label="{label}" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>\n')
        out.write(f'<polyline data-label="{label}" points="{line}" fill="none" stroke="{color}" stroke-width="2"/>\n')
        out.write(f'<text x="{SVG_W - MARGIN - 150}" y="{MARGIN + 15 * (i + 1)}" fill="{color}" '
                  f'font-size="12">{label}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()


def aggregate_and_plot(run_dirs: Sequence, out_prefix) -> dict:
    """Write ``<prefix>.csv`` and ``<prefix>.svg``; the SVG is drawn from the CSV."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out_prefix.with_suffix(".csv")
    svg_path = out_prefix.with_suffix(".svg")
    warnings = write_curves_csv(run_dirs, csv_path)
    svg_path.write_text(render_svg(read_curves_csv(csv_path)))
    return {"csv": csv_path, "svg": svg_path, "warnings": warnings}


def final_window(values: np.ndarray, frac: float = 0.1) -> float:
    """Mean of the last ``frac`` of an eval curve (at least one point)."""
    k = max(1, int(math.ceil(frac * len(values))))
    return float(np.mean(values[-k:]))


@dataclass
class FinalScore:
    label: str
    mean: float
    std: float
    per_seed: list[float]
    total_steps: float


def final_score(run_dir, frac: float = 0.1) -> FinalScore:
    curves = seed_curves(run_dir)
    per_seed = [final_window(v, frac) for _, v in curves.values()]
    budgets = {float(s[-1]) for s, _ in curves.values()}
    if len(budgets) != 1:
        raise ValueError(f"{run_dir}: seeds ran for different budgets {sorted(budgets)}")
    return FinalScore(_label(run_dir), float(np.mean(per_seed)), float(np.std(per_seed)), per_seed, budgets.pop())


def dominates(a: FinalScore, b: FinalScore) -> bool:
    """``a`` beats ``b`` on final-window mean return."""
    return a.mean > b.mean


def similar(a: FinalScore, reference: FinalScore, rel: float = 0.10) -> bool:
    """|a - ref| within ``rel`` of |ref| or within one pooled seed std."""
    gap = abs(a.mean - reference.mean)
    pooled = math.sqrt((a.std**2 + reference.std**2) / 2.0)
    return gap <= max(rel * abs(reference.mean), pooled)


def compare(run_dirs: Sequence, frac: float = 0.1) -> tuple[list[FinalScore], list[tuple[str, str, bool]]]:
    """Final scores plus pairwise dominance verdicts; budgets must match."""
    if len(run_dirs) < 2:
        raise ValueError("compare needs at least two runs")
    scores = [final_score(d, frac) for d in run_dirs]
    budgets = {s.total_steps for s in scores}
    if len(budgets) != 1:
        raise ValueError(f"runs have unequal step budgets: {sorted(budgets)}")
    verdicts = [(a.label, b.label, dominates(a, b)) for a in scores for b in scores if a is not b]
    return scores, verdicts


def compare_csv(scores: list[FinalScore], verdicts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["kind", "label", "other", "final_mean", "final_std", "seeds", "total_steps", "dominates"])
    for s in scores:
        w.writerow(["score", s.label, "", repr(s.mean), repr(s.std), json.dumps(s.per_seed), repr(s.total_steps), ""])
    for a, b, v in verdicts:
        w.writerow(["verdict", a, b, "", "", "", "", str(v).lower()])
    return buf.getvalue()
