"""Benchmark harness: configured single runs, noise sweeps with repeats,
surface scans, and CSV/SVG emission.

Configs are plain JSON documents. Sweep cells get independent seeds derived
from (master seed, sigma index, repeat), so cells can run on any number of
worker threads and still produce byte-identical CSV output.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Box, Budget, OptimizeOutcome
from .problems import (
    SyntheticObjective,
    SyntheticProblem,
    VqeObjective,
    VqeProblem,
    make_hubbard,
    make_synthetic,
    make_toy_molecule,
)
from .qsim import NoiseSpec
from .registry import make_optimizer, optimizer_ids


class ConfigError(ValueError):
    """Invalid or inconsistent harness configuration."""


class HarnessError(RuntimeError):
    """Runtime failure while executing a configured experiment."""


_SYNTHETIC_NAMES = {
    "sphere": "Sphere",
    "rosenbrock": "Rosenbrock",
    "two_well": "TwoWell",
    "shallow_multi_well": "ShallowMultiWell",
}
_PROBLEM_NAMES = ("toy_molecule", "hubbard") + tuple(_SYNTHETIC_NAMES)


def problem_ids() -> list:
    return list(_PROBLEM_NAMES)


def make_problem(name: str, options: Optional[dict] = None):
    options = dict(options or {})
    if name == "toy_molecule":
        return make_toy_molecule()
    if name == "hubbard":
        return make_hubbard(**options)
    if name in _SYNTHETIC_NAMES:
        n = int(options.pop("n", 2))
        if options:
            raise ConfigError(f"unknown problem options: {sorted(options)}")
        return make_synthetic(_SYNTHETIC_NAMES[name], n)
    raise ConfigError(
        f"unknown problem {name!r}; valid: {', '.join(_PROBLEM_NAMES)}")


@dataclass(frozen=True)
class RunConfig:
    problem: str
    problem_options: dict = field(default_factory=dict)
    optimizer: str = "imfil"
    optimizer_options: Optional[dict] = None
    box: Optional[Tuple[Tuple[float, float], ...]] = None
    x0: Optional[Tuple[float, ...]] = None
    budget: int = 100
    sigma: float = 0.0
    mu: float = 0.0
    n_samples: int = 25
    seed: int = 0
    repeats: int = 20
    sigma_grid: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.problem not in _PROBLEM_NAMES:
            raise ConfigError(
                f"unknown problem {self.problem!r}; valid: "
                f"{', '.join(_PROBLEM_NAMES)}")
        if self.optimizer not in optimizer_ids():
            raise ConfigError(
                f"unknown optimizer {self.optimizer!r}; valid: "
                f"{', '.join(optimizer_ids())}")
        if self.budget < 1:
            raise ConfigError("budget must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be positive")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.sigma < 0 or any(s < 0 for s in self.sigma_grid):
            raise ConfigError("sigma must be nonnegative")
        if list(self.sigma_grid) != sorted(self.sigma_grid):
            raise ConfigError("sigma_grid must be ascending")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        known = {
            "problem", "problem_options", "optimizer", "optimizer_options",
            "box", "x0", "budget", "sigma", "mu", "n_samples", "seed",
            "repeats", "sigma_grid",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "problem" not in raw:
            raise ConfigError("config requires a 'problem' key")
        if "box" in raw and raw["box"] is not None:
            raw["box"] = tuple((float(lo), float(hi)) for lo, hi in raw["box"])
        if "x0" in raw and raw["x0"] is not None:
            raw["x0"] = tuple(float(v) for v in raw["x0"])
        if "sigma_grid" in raw:
            raw["sigma_grid"] = tuple(float(s) for s in raw["sigma_grid"])
        return cls(**raw)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        return cls.from_dict(raw)


def cell_seed(master_seed: int, sigma_index: int, repeat: int) -> int:
    """Independent, replayable seed for one (sigma, repeat) sweep cell."""
    h = hashlib.blake2b(
        f"{master_seed}:{sigma_index}:{repeat}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def _resolve_box(config: RunConfig, problem) -> Box:
    if config.box is not None:
        lo = np.array([b[0] for b in config.box])
        hi = np.array([b[1] for b in config.box])
        return Box(lo, hi)
    return problem.default_box


def _resolve_x0(config: RunConfig, box: Box) -> np.ndarray:
    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=float)
        if x0.shape != box.lower.shape:
            raise ConfigError("x0 dimension does not match the search box")
        if not box.contains(x0):
            raise ConfigError("x0 lies outside the search box")
        return x0
    return 0.5 * (box.lower + box.upper)


def make_objective(problem, sigma: float, mu: float, n_samples: int,
                   seed: int):
    """Noisy objective for one run; also exposes true_value for re-evaluation."""
    if isinstance(problem, VqeProblem):
        noise = NoiseSpec(mu=mu, sigma=sigma)
        return VqeObjective(problem, noise, n_samples=n_samples, seed=seed)
    if isinstance(problem, SyntheticProblem):
        return SyntheticObjective(problem, seed=seed, sigma_f=sigma)
    raise ConfigError(f"unsupported problem type {type(problem).__name__}")


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    repeat: int
    seed: int
    best_f: float
    true_energy: float
    evals_used: int
    termination: str
    best_x: Tuple[float, ...]
    lowest_objective_seen: float


@dataclass(frozen=True)
class SweepResult:
    rows: Tuple[SweepRow, ...]
    sigma_grid: Tuple[float, ...]

    def per_sigma(self, sigma: float) -> List[SweepRow]:
        return [r for r in self.rows if r.sigma == sigma]

    def aggregate(self, sigma: float) -> Dict[str, float]:
        rows = self.per_sigma(sigma)
        if not rows:
            raise HarnessError(f"no rows for sigma={sigma}")
        best = [r.best_f for r in rows]
        true = [r.true_energy for r in rows]
        return {
            "mean_best_f": statistics.fmean(best),
            "median_best_f": statistics.median(best),
            "min_best_f": min(best),
            "mean_true_energy": statistics.fmean(true),
            "median_true_energy": statistics.median(true),
            "min_true_energy": min(true),
            "median_evals_used": statistics.median(r.evals_used for r in rows),
            "lowest_objective_seen": min(
                r.lowest_objective_seen for r in rows),
        }


def _run_cell(config: RunConfig, sigma: float, repeat: int,
              seed: int) -> Tuple[OptimizeOutcome, SweepRow]:
    problem = make_problem(config.problem, config.problem_options)
    box = _resolve_box(config, problem)
    x0 = _resolve_x0(config, box)
    obj = make_objective(problem, sigma, config.mu, config.n_samples, seed)
    optimizer = make_optimizer(config.optimizer, config.optimizer_options)
    result = optimizer(obj, box, x0, Budget(config.budget), seed=seed)
    outcome = result[0] if isinstance(result, tuple) else result
    finite = [r.f for r in outcome.history if math.isfinite(r.f)]
    row = SweepRow(
        sigma=sigma,
        repeat=repeat,
        seed=seed,
        best_f=outcome.best_f,
        true_energy=float(obj.true_value(np.asarray(outcome.best_x))),
        evals_used=outcome.evals_used,
        termination=outcome.termination.value,
        best_x=outcome.best_x,
        lowest_objective_seen=min(finite) if finite else float("nan"),
    )
    return outcome, row


def run_single(config: RunConfig) -> Tuple[OptimizeOutcome, SweepRow]:
    """One optimization run at the config's noise level plus its summary row."""
    return _run_cell(config, config.sigma, 0, config.seed)


def run_sweep(config: RunConfig, sigma_grid: Optional[Sequence[float]] = None,
              jobs: int = 1) -> SweepResult:
    grid = tuple(sigma_grid if sigma_grid is not None else config.sigma_grid)
    if not grid:
        raise ConfigError("sweep requires a nonempty sigma_grid")
    if list(grid) != sorted(grid):
        raise ConfigError("sigma_grid must be ascending")

    cells = [
        (si, rep, cell_seed(config.seed, si, rep))
        for si in range(len(grid))
        for rep in range(config.repeats)
    ]

    def work(cell):
        si, rep, seed = cell
        return _run_cell(config, grid[si], rep, seed)[1]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, cells))
    else:
        rows = [work(c) for c in cells]
    return SweepResult(rows=tuple(rows), sigma_grid=grid)


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    if not rows:
        raise HarnessError("no rows to serialize")
    dim = len(rows[0].best_x)
    header = "sigma,repeat,seed,best_f,true_energy,evals_used,termination"
    header += "".join(f",best_x{i}" for i in range(dim))
    lines = [header]
    for r in rows:
        parts = [
            _fmt(r.sigma), str(r.repeat), str(r.seed), _fmt(r.best_f),
            _fmt(r.true_energy), str(r.evals_used), r.termination,
        ]
        parts.extend(_fmt(v) for v in r.best_x)
        lines.append(",".join(parts))
    return "\n".join(lines) + "\n"


def summary_to_csv(result: SweepResult) -> str:
    keys = [
        "mean_best_f", "median_best_f", "min_best_f", "mean_true_energy",
        "median_true_energy", "min_true_energy", "median_evals_used",
        "lowest_objective_seen",
    ]
    lines = ["sigma," + ",".join(keys)]
    for sigma in result.sigma_grid:
        agg = result.aggregate(sigma)
        lines.append(",".join([_fmt(sigma)] + [_fmt(agg[k]) for k in keys]))
    return "\n".join(lines) + "\n"


def scan_surface(config: RunConfig, scan: Sequence[dict], resolution: int,
                 sigma: Optional[float] = None) -> str:
    """Energy estimates on a regular 1D/2D parameter grid, as CSV text.

    Each scan entry is {"index": i, "min": lo, "max": hi}; non-scanned
    parameters are fixed at the config x0 (or box midpoint).
    """
    if not 1 <= len(scan) <= 2:
        raise ConfigError("surface scan supports 1 or 2 parameters")
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    problem = make_problem(config.problem, config.problem_options)
    box = _resolve_box(config, problem)
    base = _resolve_x0(config, box)
    sig = config.sigma if sigma is None else sigma
    obj = make_objective(problem, sig, config.mu, config.n_samples,
                         config.seed)

    axes = []
    for entry in scan:
        idx = int(entry["index"])
        if not 0 <= idx < box.dimension:
            raise ConfigError(f"scan index {idx} out of range")
        lo = float(entry.get("min", box.lower[idx]))
        hi = float(entry.get("max", box.upper[idx]))
        axes.append((idx, np.linspace(lo, hi, resolution)))

    header = ",".join(f"p{idx}" for idx, _ in axes) + ",energy"
    lines = [header]
    stream = 0
    if len(axes) == 1:
        idx, values = axes[0]
        for v in values:
            x = base.copy()
            x[idx] = v
            lines.append(f"{_fmt(v)},{_fmt(obj.evaluate(x, stream))}")
            stream += 1
    else:
        (i0, vals0), (i1, vals1) = axes
        for v0 in vals0:
            for v1 in vals1:
                x = base.copy()
                x[i0] = v0
                x[i1] = v1
                lines.append(
                    f"{_fmt(v0)},{_fmt(v1)},{_fmt(obj.evaluate(x, stream))}")
                stream += 1
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG emission (hand-rolled so output is byte-deterministic, no display needed)

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 20, 50


def _parse_csv(text: str) -> Tuple[List[str], List[List[str]]]:
    lines = text.splitlines()
    if not lines:
        raise HarnessError("line 1: empty CSV")
    header = lines[0].split(",")
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise HarnessError(
                f"line {ln}: expected {len(header)} columns, got {len(parts)}")
        rows.append(parts)
    if not rows:
        raise HarnessError("line 2: CSV has no data rows")
    return header, rows


def _series_from_sweep(header: List[str], rows: List[List[str]]):
    """Per-sigma (mean, min, max) of best_f from a sweep CSV."""
    try:
        si = header.index("sigma")
        fi = header.index("best_f")
    except ValueError as exc:
        raise HarnessError(f"line 1: missing column ({exc})") from exc
    groups: Dict[float, List[float]] = {}
    for ln, parts in enumerate(rows, start=2):
        try:
            groups.setdefault(float(parts[si]), []).append(float(parts[fi]))
        except ValueError as exc:
            raise HarnessError(f"line {ln}: bad float ({exc})") from exc
    out = []
    for sigma in sorted(groups):
        vals = groups[sigma]
        out.append((sigma, statistics.fmean(vals), min(vals), max(vals)))
    return out


def _series_from_surface(header: List[str], rows: List[List[str]]):
    if len(header) != 2:
        raise HarnessError(
            "line 1: only 1D surface CSVs can be plotted as lines")
    out = []
    for ln, parts in enumerate(rows, start=2):
        try:
            out.append((float(parts[0]), float(parts[1]),
                        float(parts[1]), float(parts[1])))
        except ValueError as exc:
            raise HarnessError(f"line {ln}: bad float ({exc})") from exc
    return sorted(out)


def _xy(x: float, y: float, xlim, ylim, logx: bool) -> Tuple[float, float]:
    x0, x1 = xlim
    if logx:
        x, x0, x1 = math.log10(x), math.log10(x0), math.log10(x1)
    fx = 0.5 if x1 == x0 else (x - x0) / (x1 - x0)
    y0, y1 = ylim
    fy = 0.5 if y1 == y0 else (y - y0) / (y1 - y0)
    px = _ML + fx * (_W - _ML - _MR)
    py = _H - _MB - fy * (_H - _MT - _MB)
    return px, py


def emit_plot(csv_paths: Sequence, out_path, kind: str = "sweep",
              labels: Optional[Sequence[str]] = None) -> str:
    """Render sweep/surface CSVs as a standalone SVG; returns the SVG text.

    Sweep plots show the per-sigma mean of best_f as a line with a
    min..max band, sigma on a log axis; each input CSV becomes one series.
    """
    if kind not in ("sweep", "surface"):
        raise ConfigError(f"unknown plot kind {kind!r}")
    if not csv_paths:
        raise ConfigError("at least one CSV input is required")
    series = []
    for i, path in enumerate(csv_paths):
        header, rows = _parse_csv(Path(path).read_text())
        data = (_series_from_sweep(header, rows) if kind == "sweep"
                else _series_from_surface(header, rows))
        label = labels[i] if labels else Path(path).stem
        series.append((label, data))

    logx = kind == "sweep" and all(
        x > 0 for _, data in series for x, *_ in data)
    xs = [x for _, data in series for x, *_ in data]
    ys = [v for _, data in series for _, m, lo, hi in data
          for v in (m, lo, hi)]
    xlim = (min(xs), max(xs))
    pad = 0.05 * (max(ys) - min(ys) or 1.0)
    ylim = (min(ys) - pad, max(ys) + pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
        f'height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
        'stroke="black"/>',
    ]
    for x in sorted(set(xs)):
        px, _ = _xy(x, ylim[0], xlim, ylim, logx)
        parts.append(
            f'<text x="{px:.2f}" y="{_H - _MB + 18}" font-size="11" '
            f'text-anchor="middle">{x:g}</text>')
    for frac in (0.0, 0.5, 1.0):
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        _, py = _xy(xlim[0], yv, xlim, ylim, logx)
        parts.append(
            f'<text x="{_ML - 6}" y="{py + 4:.2f}" font-size="11" '
            f'text-anchor="end">{yv:.4g}</text>')

    for i, (label, data) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        band_pts = [_xy(x, lo, xlim, ylim, logx) for x, _, lo, _ in data]
        band_pts += [_xy(x, hi, xlim, ylim, logx)
                     for x, _, _, hi in reversed(data)]
        band = " ".join(f"{px:.2f},{py:.2f}" for px, py in band_pts)
        parts.append(
            f'<polygon points="{band}" fill="{color}" fill-opacity="0.15" '
            'stroke="none"/>')
        line = " ".join(
            f"{px:.2f},{py:.2f}"
            for px, py in (_xy(x, m, xlim, ylim, logx) for x, m, _, _ in data))
        parts.append(
            f'<polyline points="{line}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>')
        parts.append(
            f'<text x="{_W - _MR - 8}" y="{_MT + 16 + 16 * i}" '
            f'font-size="12" text-anchor="end" fill="{color}">{label}</text>')
    parts.append("</svg>")
    svg = "\n".join(parts) + "\n"
    Path(out_path).write_text(svg)
    return svg
