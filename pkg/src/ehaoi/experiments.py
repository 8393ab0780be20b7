"""Solve/evaluate/sweep drivers producing flat CSV rows."""
from __future__ import annotations

import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from . import chain
from .approx import find_amax
from .errors import EhaoiError
from .model import RecoveryModel, SystemConfig, config_hash, prepare
from .policy import Policy
from .rewards import RewardSpec, reward_vector
from .solver import DEFAULT_EPS_C, DEFAULT_MAX_ITER, SolveResult, relative_value_iteration
from .statespace import TransitionKernel, build_kernel

log = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "objective", "alpha", "b_max", "p_rec", "n_rec",
    "avg_age", "peak_hit_prob", "avg_tx_power", "avg_battery", "gain", "iterations",
]
SWEEP_EXTRA = ["a_max", "modes", "x_term", "y_term", "config_hash", "error"]


@dataclass
class Solved:
    cfg: SystemConfig
    kernel: TransitionKernel
    result: SolveResult
    metrics: chain.Metrics
    dist: object


def solve(cfg: SystemConfig, spec: RewardSpec, eps_c: float = DEFAULT_EPS_C,
          max_iter: int = DEFAULT_MAX_ITER) -> Solved:
    kernel = build_kernel(prepare(cfg))
    res = relative_value_iteration(kernel, spec, eps_c=eps_c, max_iter=max_iter)
    m, dist = chain.evaluate(kernel, res.policy)
    return Solved(cfg, kernel, res, m, dist)


def metrics_row(cfg: SystemConfig, spec: RewardSpec, m: chain.Metrics, gain: float, iterations: int) -> dict:
    alpha = spec.alpha_or_none
    return {
        "objective": spec.objective,
        "alpha": "" if alpha is None else repr(float(alpha)),
        "b_max": cfg.b_max,
        "p_rec": repr(float(cfg.recovery.p_rec)),
        "n_rec": cfg.recovery.n_rec,
        "avg_age": repr(m.avg_age),
        "peak_hit_prob": repr(m.peak_hit_prob),
        "avg_tx_power": repr(m.avg_tx_power),
        "avg_battery": repr(m.avg_battery),
        "gain": repr(float(gain)),
        "iterations": iterations,
    }


def solved_row(s: Solved, spec: RewardSpec) -> dict:
    row = metrics_row(s.cfg, spec, s.metrics, s.result.gain, s.result.iterations)
    x, y = chain.age_components(s.dist, s.kernel.space)
    row.update(
        a_max=s.cfg.a_max,
        modes="+".join(str(p.power) for p in s.cfg.modes),
        x_term=repr(x),
        y_term=repr(y),
        config_hash=config_hash(s.cfg),
        error="",
    )
    return row


def evaluate_row(kernel: TransitionKernel, policy: Policy, spec: RewardSpec) -> dict:
    m, dist = chain.evaluate(kernel, policy)
    r = reward_vector(kernel.space.arrays[0], kernel.cfg.a_max, spec)
    row = metrics_row(kernel.cfg.source, spec, m, float(dist @ r), 0)
    row["config_hash"] = config_hash(kernel.cfg.source)
    return row


@dataclass(frozen=True)
class SweepPoint:
    cfg: SystemConfig
    spec: RewardSpec
    eps_c: float = DEFAULT_EPS_C
    max_iter: int = DEFAULT_MAX_ITER
    auto_amax: bool = False
    amax_epsilon: float = 1e-6

    def key(self) -> tuple:
        return (
            self.spec.objective,
            str(self.cfg.b_max),
            repr(float(self.cfg.recovery.p_rec)),
            str(self.cfg.recovery.n_rec),
            "+".join(str(p.power) for p in self.cfg.modes),
            "" if self.spec.alpha_or_none is None else repr(float(self.spec.alpha)),
        )


def run_point(point: SweepPoint) -> dict:
    """Solve one sweep point; failures become a row with the ``error`` column set."""
    cfg = point.cfg
    try:
        if point.auto_amax and point.spec.objective == "avg":
            cfg = cfg.replace(a_max=find_amax(cfg, k0=2, epsilon=point.amax_epsilon).a_max_final)
        return solved_row(solve(cfg, point.spec, point.eps_c, point.max_iter), point.spec)
    except EhaoiError as exc:
        alpha = point.spec.alpha_or_none
        row = {c: "" for c in METRIC_COLUMNS + SWEEP_EXTRA}
        row.update(
            objective=point.spec.objective,
            alpha="" if alpha is None else repr(float(alpha)),
            b_max=cfg.b_max,
            p_rec=repr(float(cfg.recovery.p_rec)),
            n_rec=cfg.recovery.n_rec,
            a_max=cfg.a_max,
            modes="+".join(str(p.power) for p in cfg.modes),
            config_hash=config_hash(cfg),
            error=f"{type(exc).__name__}: {str(exc).splitlines()[0]}",
        )
        return row


def mode_subsets(num_modes: int) -> list[tuple[int, ...]]:
    """Each mode alone, then all modes together."""
    full = tuple(range(1, num_modes + 1))
    return [(m,) for m in full] + ([full] if num_modes > 1 else [])


def bmax_points(base: SystemConfig, b_values: Sequence[int], spec: RewardSpec,
                subsets: Sequence[Sequence[int]] | None = None, **kw) -> list[SweepPoint]:
    """Grid over B_max x {recovery on, off} x mode subsets, ordered by B_max."""
    if subsets is None:
        subsets = mode_subsets(base.num_modes)
    points = []
    for b in b_values:
        for rec in (True, False):
            for subset in subsets:
                cfg = base.replace(b_max=b).with_modes(subset)
                if not rec:
                    cfg = cfg.without_recovery()
                points.append(SweepPoint(cfg, spec, **kw))
    return points


def alpha_points(base: SystemConfig, alphas: Sequence[float], p_recs: Sequence[float] | None = None,
                 **kw) -> list[SweepPoint]:
    p_recs = list(p_recs) if p_recs else [base.recovery.p_rec]
    points = []
    for p in p_recs:
        cfg = base.replace(recovery=RecoveryModel(base.recovery.n_rec, p))
        for a in alphas:
            points.append(SweepPoint(cfg, RewardSpec.weighted(a), **kw))
    return points


def check_increasing(values: Sequence[float], what: str) -> None:
    if not values:
        raise ValueError(f"{what}: sweep values must be nonempty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{what}: sweep values must be strictly increasing")


def run_points(points: Sequence[SweepPoint], jobs: int = 1) -> Iterator[dict]:
    """Rows in input order, whatever the completion order."""
    if jobs <= 1 or len(points) <= 1:
        yield from map(run_point, points)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(run_point, points)


def write_rows(rows: Iterable[dict], path: str | Path | None, columns: Sequence[str],
               append: bool = False) -> int:
    """Stream rows to CSV (stdout when ``path`` is None), flushing each one."""
    fresh = path is None or not append or not Path(path).exists() or Path(path).stat().st_size == 0
    fh = sys.stdout if path is None else open(path, "a" if append else "w", newline="")
    count = 0
    try:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        if fresh:
            w.writeheader()
        for row in rows:
            w.writerow(row)
            fh.flush()
            count += 1
    finally:
        if path is not None:
            fh.close()
    return count


def existing_keys(path: str | Path) -> set:
    """Keys of rows already in a sweep file; error rows count as finished (the failures are deterministic)."""
    p = Path(path)
    if not p.exists() or p.stat().st_size == 0:
        return set()
    with open(p, newline="") as fh:
        return {
            (r["objective"], r["b_max"], r["p_rec"], r["n_rec"], r["modes"], r["alpha"])
            for r in csv.DictReader(fh)
        }


def parse_grid(text: str, cast=float) -> list:
    """``"2:30"`` (inclusive, step 1), ``"0:1:0.1"`` or ``"1,2,5"``."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1.0
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [cast(round(lo + i * step, 12)) for i in range(n)]
    return [cast(x) for x in text.split(",") if x.strip()]
