"""Experiment orchestration: paired protocol comparisons and W_EC sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from scipy.stats import spearmanr

from .config import ScenarioConfig
from .metrics import MetricsReport, records_csv, sweep_csv, write_atomic
from .simulation import run

DEFAULT_SWEEP = tuple(round(0.1 * k, 1) for k in range(1, 10))


def _run_all(configs: Sequence[ScenarioConfig], jobs: int) -> list[MetricsReport]:
    if jobs <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, configs))


@dataclass
class Comparison:
    sociable: MetricsReport
    flooding: MetricsReport

    @property
    def epo_reduction_pct(self) -> float | None:
        base = self.flooding.epo
        if base == 0:
            return None
        return 100.0 * (base - self.sociable.epo) / base

    @property
    def ngm_equal(self) -> bool:
        return self.sociable.ngm_stream() == self.flooding.ngm_stream()

    def summary(self) -> dict:
        return {
            "seed": self.sociable.seed,
            "epo_reduction_pct": self.epo_reduction_pct,
            "ncv_max_sociable": self.sociable.ncv_max,
            "ncv_max_flooding": self.flooding.ncv_max,
            "add_ms_sociable": self.sociable.add_ms,
            "add_ms_flooding": self.flooding.add_ms,
            "ngm_equal": self.ngm_equal,
        }

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        paths = []
        for rep in (self.sociable, self.flooding):
            p = out_dir / f"{rep.protocol}_seed{rep.seed}.csv"
            write_atomic(p, records_csv(rep.records))
            paths.append(p)
        return paths[0], paths[1]


def run_comparison(config: ScenarioConfig, jobs: int = 1) -> Comparison:
    """Both protocols on the same seed, so mobility, communities and detections match."""
    soc, flood = _run_all(
        [config.replace(protocol="sociable"), config.replace(protocol="flooding")], jobs
    )
    return Comparison(soc, flood)


@dataclass(frozen=True)
class SweepRow:
    w_ec: float
    add_ms: float | None
    ndm: int


@dataclass
class SweepReport:
    seed: int
    rows: list[SweepRow]

    def csv(self) -> str:
        return sweep_csv((r.w_ec, r.add_ms, r.ndm) for r in self.rows)

    def write(self, path) -> None:
        write_atomic(path, self.csv())

    def spearman(self) -> float | None:
        return spearman([r.w_ec for r in self.rows], [r.add_ms for r in self.rows])


def _check_sweep_values(values: Iterable[float]) -> list[float]:
    out = []
    for v in values:
        v = float(v)
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"sweep value {v!r} outside [0, 1]")
        out.append(v)
    if not out:
        raise ValueError("sweep needs at least one value")
    return out


def run_sweep(
    config: ScenarioConfig, values: Iterable[float] = DEFAULT_SWEEP, jobs: int = 1
) -> SweepReport:
    """One SOCIABLE run per value with the STR weights pinned at ``W_EC = value``."""
    values = _check_sweep_values(values)
    configs = [config.replace(protocol="sociable", fixed_w_ec=v) for v in values]
    reports = _run_all(configs, jobs)
    rows = [SweepRow(v, rep.add_ms, rep.ndm) for v, rep in zip(values, reports)]
    return SweepReport(config.seed, rows)


def spearman(xs: Sequence[float], ys: Sequence[float | None]) -> float | None:
    """Rank correlation over the points where ``y`` exists; ``None`` if undefined."""
    pts = [(x, y) for x, y in zip(xs, ys) if y is not None]
    if len(pts) < 2:
        return None
    x, y = zip(*pts)
    if len(set(x)) < 2 or len(set(y)) < 2:
        return None
    rho = spearmanr(x, y).correlation
    return None if math.isnan(rho) else float(rho)


def format_summary(summary: dict) -> str:
    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.3f}"
        return str(v)

    width = max(len(k) for k in summary)
    return "\n".join(f"{k:<{width}}  {fmt(v)}" for k, v in summary.items())
