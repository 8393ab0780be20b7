"""Monte Carlo simulation of the sensor, slot by slot.

The simulator replays the physical story (transmit or idle, channel error,
probabilistic recovery, harvest, clamp, harvester move) without touching the
transition kernel, so agreement with the analytical chain is a real check.

Randomness comes from three independent streams spawned from one seed:
stream 0 drives channel errors, stream 1 recovery draws, stream 2 the
harvester. Each slot consumes exactly one uniform from every stream, whether
or not it is used, so two policies run with the same seed see common random
numbers.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import InfeasiblePolicyAction
from .model import ScaledConfig
from .policy import Policy
from .statespace import IDLE, State, StateSpace, TransitionKernel

CHUNK = 1 << 20
N_BATCHES = 100
DEFAULT_BURN_IN = 10_000

OUTCOME_NONE, OUTCOME_SUCCESS, OUTCOME_ERROR = 0, 1, 2
OUTCOME_NAMES = ("none", "success", "error")


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    burn_in: int = DEFAULT_BURN_IN
    seed: int = 0
    start: State | None = None

    def __post_init__(self):
        if not self.horizon > self.burn_in >= 0:
            raise ValueError("need horizon > burn_in >= 0")


@dataclass
class EmpiricalMetrics:
    avg_age: float
    peak_hit_prob: float
    avg_tx_power: float
    avg_battery: float
    se_avg_age: float
    se_peak_hit_prob: float
    se_avg_tx_power: float
    se_avg_battery: float
    slots: int
    visit_counts: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class TraceEvent:
    slot: int
    state: State
    action: int
    tx_outcome: str
    recovered: int  # scaled units
    harvested: int  # scaled units


@numba.njit(cache=True)
def _run(state, t0, n, burn_in, n_eff, n_batches, policy, powers, errs, incs, harvest, cumq,
         p_rec, n_rec, n_tx, a_max, b_max, n_modes, n_h, n_b,
         u_err, u_rec, u_harv, batch_sums, batch_counts, visits, record, out):
    age, mode, h, b = state[0], state[1], state[2], state[3]
    for i in range(n):
        t = t0 + i
        sid = (((age - 1) * n_modes + mode) * n_h + h) * n_b + b
        d = policy[sid]
        harvested = harvest[h]
        recovered = 0
        spent = 0
        outcome = 0
        if d > 0:
            spent = powers[d - 1]
            if b + harvested - spent < 0:
                state[0], state[1], state[2], state[3] = age, mode, h, b
                return t
            if u_err[i] < errs[d - 1]:
                outcome = 2
                new_age = min(age + 1, a_max)
            else:
                outcome = 1
                new_age = 1
            new_mode = d
        else:
            new_age = min(age + 1, a_max)
            if mode == 0:
                new_mode = 0
            else:
                if mode <= n_tx:
                    m, j = mode, 0
                else:
                    m = (mode - n_tx - 1) // n_rec + 1
                    j = (mode - n_tx - 1) % n_rec + 1
                if j < n_rec:
                    new_mode = n_tx + (m - 1) * n_rec + j + 1
                    if u_rec[i] < p_rec:
                        recovered = incs[m - 1]
                else:
                    new_mode = 0
        new_b = b + harvested + recovered - spent
        if new_b > b_max:
            new_b = b_max
        nh = 0
        while nh < n_h - 1 and u_harv[i] >= cumq[h, nh]:
            nh += 1

        if t >= burn_in:
            k = (t - burn_in) * n_batches // n_eff
            batch_sums[k, 0] += age
            batch_sums[k, 1] += 1.0 if age == a_max else 0.0
            batch_sums[k, 2] += spent
            batch_sums[k, 3] += b
            batch_counts[k] += 1
            visits[sid] += 1
        if record:
            out[i, 0] = age
            out[i, 1] = mode
            out[i, 2] = h
            out[i, 3] = b
            out[i, 4] = d
            out[i, 5] = outcome
            out[i, 6] = recovered
            out[i, 7] = harvested
        age, mode, h, b = new_age, new_mode, nh, new_b
    state[0], state[1], state[2], state[3] = age, mode, h, b
    return -1


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]


def _drive(cfg: ScaledConfig, policy: Policy, sim: SimConfig, record: bool):
    space = StateSpace(cfg)
    if len(policy) != space.size:
        raise InfeasiblePolicyAction(f"policy covers {len(policy)} states, instance has {space.size}")
    start = sim.start or space.decode(space.canonical_start())
    state = np.array(start, dtype=np.int64)
    cum = np.cumsum(cfg.matrix, axis=1)
    cumq = cum / cum[:, -1:]
    gens = _streams(sim.seed)
    n_eff = sim.horizon - sim.burn_in
    batches = min(N_BATCHES, n_eff)
    batch_sums = np.zeros((batches, 4))
    batch_counts = np.zeros(batches, dtype=np.int64)
    visits = np.zeros(space.size, dtype=np.int64)
    rows = []
    t = 0
    while t < sim.horizon:
        n = min(CHUNK, sim.horizon - t)
        u_err, u_rec, u_harv = (g.random(n) for g in gens)
        out = np.zeros((n if record else 0, 8), dtype=np.int64)
        bad = _run(
            state, t, n, sim.burn_in, n_eff, batches, policy.actions,
            cfg.powers, cfg.error_probs, cfg.increments, cfg.harvest, cumq,
            cfg.p_rec, cfg.n_rec, cfg.num_modes, cfg.a_max, cfg.b_max,
            space.n_modes, space.n_harvester, space.n_battery,
            u_err, u_rec, u_harv, batch_sums, batch_counts, visits, record, out,
        )
        if bad >= 0:
            s = State(*(int(x) for x in state))
            raise InfeasiblePolicyAction(f"slot {bad}: policy action infeasible in {s}")
        if record:
            rows.append(out)
        t += n
    return space, batch_sums, batch_counts, visits, rows


def simulate(cfg: ScaledConfig, policy: Policy, sim: SimConfig) -> EmpiricalMetrics:
    _, sums, counts, visits, _ = _drive(cfg, policy, sim, record=False)
    per_batch = sums / counts[:, None]
    means = sums.sum(axis=0) / counts.sum()
    k = len(counts)
    se = per_batch.std(axis=0, ddof=1) / np.sqrt(k) if k > 1 else np.full(4, np.nan)
    s = cfg.scale
    return EmpiricalMetrics(
        avg_age=float(means[0]),
        peak_hit_prob=float(means[1]),
        avg_tx_power=float(means[2]) / s,
        avg_battery=float(means[3]) / s,
        se_avg_age=float(se[0]),
        se_peak_hit_prob=float(se[1]),
        se_avg_tx_power=float(se[2]) / s,
        se_avg_battery=float(se[3]) / s,
        slots=int(counts.sum()),
        visit_counts=visits,
    )


def trace(cfg: ScaledConfig, policy: Policy, sim: SimConfig) -> list[TraceEvent]:
    """Per-slot event log for every slot of the horizon (burn-in included)."""
    _, _, _, _, rows = _drive(cfg, policy, sim, record=True)
    table = np.concatenate(rows) if rows else np.zeros((0, 8), dtype=np.int64)
    return [
        TraceEvent(
            slot=t,
            state=State(int(r[0]), int(r[1]), int(r[2]), int(r[3])),
            action=int(r[4]),
            tx_outcome=OUTCOME_NAMES[r[5]],
            recovered=int(r[6]),
            harvested=int(r[7]),
        )
        for t, r in enumerate(table)
    ]


def trace_inconsistencies(events: list[TraceEvent], kernel: TransitionKernel) -> list[int]:
    """Slots whose observed next state has zero probability under the kernel."""
    space = kernel.space
    bad = []
    for ev, nxt in zip(events, events[1:]):
        sid = space.encode(ev.state)
        if not kernel.feasible[ev.action, sid]:
            bad.append(ev.slot)
            continue
        target = space.encode(nxt.state)
        if not any(j == target and p > 0 for j, p in kernel.row(sid, ev.action)):
            bad.append(ev.slot)
    return bad


TRACE_COLUMNS = ["slot", "age", "mode", "harvester", "battery", "action", "outcome", "recovered", "harvested"]


def _fmt_energy(x: int, scale: int) -> str:
    return str(x // scale) if x % scale == 0 else repr(x / scale)


def write_trace_csv(events: list[TraceEvent], cfg: ScaledConfig, path: str | Path | None = None) -> str:
    """Trace as CSV with energies in config units."""
    space = StateSpace(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    s = cfg.scale
    for ev in events:
        w.writerow([
            ev.slot, ev.state.age, space.mode_label(ev.state.mode), ev.state.harvester,
            _fmt_energy(ev.state.battery, s), ev.action, ev.tx_outcome,
            _fmt_energy(ev.recovered, s), _fmt_energy(ev.harvested, s),
        ])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def spent_energy(ev: TraceEvent, cfg: ScaledConfig) -> int:
    return 0 if ev.action == IDLE else int(cfg.powers[ev.action - 1])
