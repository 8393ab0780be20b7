"""State enumeration, feasible actions and the transition kernel.

A state is ``(age, mode, harvester, battery)``. ``mode`` is a dense integer
code for the system mode:

* ``0`` -- long idle (no recovery pending),
* ``m`` for ``1 <= m <= M`` -- transmitted with mode ``m`` in the last slot,
* ``M + (m - 1) * n_rec + j`` -- idle for ``j`` slots (``1 <= j <= n_rec``)
  after a transmission with mode ``m``.

Actions are integers: ``0`` is idle, ``m`` transmits with mode ``m``.
Harvester indices are 0-based; battery levels are in scaled units.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import InfeasibleAction, StateSpaceTooLarge
from .model import ScaledConfig

IDLE = 0
DEFAULT_MAX_STATES = 10**7
ROW_SUM_TOL = 1e-12


class State(NamedTuple):
    age: int
    mode: int
    harvester: int
    battery: int


class StateSpace:
    """Mixed-radix bijection between :class:`State` tuples and dense ids."""

    def __init__(self, cfg: ScaledConfig, max_states: int = DEFAULT_MAX_STATES):
        self.a_max = cfg.a_max
        self.num_tx_modes = cfg.num_modes
        self.n_rec = cfg.n_rec
        self.n_modes = 1 + cfg.num_modes * (1 + cfg.n_rec)
        self.n_harvester = cfg.num_harvester_states
        self.n_battery = cfg.b_max + 1
        self.size = self.a_max * self.n_modes * self.n_harvester * self.n_battery
        if self.size > max_states:
            raise StateSpaceTooLarge(f"{self.size} states exceeds the cap of {max_states}")

    def __len__(self) -> int:
        return self.size

    def encode(self, s: State) -> int:
        age, mode, h, b = s
        if not (1 <= age <= self.a_max and 0 <= mode < self.n_modes
                and 0 <= h < self.n_harvester and 0 <= b < self.n_battery):
            raise ValueError(f"state out of range: {s}")
        return ((((age - 1) * self.n_modes + mode) * self.n_harvester + h) * self.n_battery) + b

    def decode(self, sid: int) -> State:
        if not 0 <= sid < self.size:
            raise ValueError(f"state id out of range: {sid}")
        sid, b = divmod(int(sid), self.n_battery)
        sid, h = divmod(sid, self.n_harvester)
        age0, mode = divmod(sid, self.n_modes)
        return State(age0 + 1, mode, h, b)

    def __iter__(self) -> Iterator[State]:
        for sid in range(self.size):
            yield self.decode(sid)

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized decode of every id: ``(ages, modes, harvesters, batteries)``."""
        ids = np.arange(self.size, dtype=np.int64)
        ids, b = np.divmod(ids, self.n_battery)
        ids, h = np.divmod(ids, self.n_harvester)
        age0, mode = np.divmod(ids, self.n_modes)
        return age0 + 1, mode, h, b

    def encode_many(self, age, mode, h, b) -> np.ndarray:
        return (((np.asarray(age) - 1) * self.n_modes + mode) * self.n_harvester + h) * self.n_battery + b

    # system-mode codes

    def just_tx(self, m: int) -> int:
        return m

    def post_tx(self, m: int, j: int) -> int:
        return self.num_tx_modes + (m - 1) * self.n_rec + j

    def mode_parts(self, code: int) -> tuple[int, int]:
        """``(m, j)``: ``(0, 0)`` long idle, ``(m, 0)`` just transmitted, ``(m, j)`` recovering."""
        if code == 0:
            return 0, 0
        if code <= self.num_tx_modes:
            return code, 0
        m0, j0 = divmod(code - self.num_tx_modes - 1, self.n_rec)
        return m0 + 1, j0 + 1

    def mode_label(self, code: int) -> str:
        m, j = self.mode_parts(code)
        if m == 0:
            return "idle"
        return f"tx{m}" if j == 0 else f"rec{m}.{j}"

    def parse_mode(self, label: str) -> int:
        if label == "idle":
            return 0
        if label.startswith("tx"):
            return self.just_tx(int(label[2:]))
        if label.startswith("rec"):
            m, j = label[3:].split(".")
            return self.post_tx(int(m), int(j))
        raise ValueError(f"unknown mode label {label!r}")

    def canonical_start(self) -> int:
        """Cold start: age at the cap, long idle, first harvester state, empty battery."""
        return self.encode(State(self.a_max, 0, 0, 0))


def enumerate_states(cfg: ScaledConfig, max_states: int = DEFAULT_MAX_STATES) -> StateSpace:
    return StateSpace(cfg, max_states)


def feasible_actions(s: State, cfg: ScaledConfig) -> list[int]:
    available = s.battery + int(cfg.harvest[s.harvester])
    return [IDLE] + [m for m in range(1, cfg.num_modes + 1) if available >= cfg.powers[m - 1]]


def transition(s: State, d: int, cfg: ScaledConfig, space: StateSpace | None = None) -> dict[State, float]:
    """Next-state distribution of a single (state, action) pair.

    Written case by case, deliberately independent of :func:`build_kernel`.
    """
    if d not in feasible_actions(s, cfg):
        raise InfeasibleAction(f"action {d} is not feasible in {s}")
    space = space or StateSpace(cfg)
    M, N = cfg.num_modes, cfg.n_rec
    B, A = cfg.b_max, cfg.a_max
    age, mode, h, b = s
    aged = min(age + 1, A)
    gain = int(cfg.harvest[h])
    out: dict[State, float] = {}

    def put(state: State, p: float) -> None:
        if p > 0.0:
            out[state] = out.get(state, 0.0) + p

    m, j = space.mode_parts(mode)
    for nh in range(cfg.num_harvester_states):
        q = float(cfg.matrix[h, nh])
        if d == IDLE:
            if m == 0:
                put(State(aged, 0, nh, min(b + gain, B)), q)
            elif j < N:
                # still inside the recovery window: j == 0 is the slot right after transmitting
                nxt = space.post_tx(m, j + 1)
                inc = int(cfg.increments[m - 1])
                put(State(aged, nxt, nh, min(b + gain + inc, B)), q * cfg.p_rec)
                put(State(aged, nxt, nh, min(b + gain, B)), q * (1.0 - cfg.p_rec))
            else:
                put(State(aged, 0, nh, min(b + gain, B)), q)
        else:
            err = float(cfg.error_probs[d - 1])
            b_t = min(b + gain - int(cfg.powers[d - 1]), B)
            put(State(1, space.just_tx(d), nh, b_t), q * (1.0 - err))
            put(State(aged, space.just_tx(d), nh, b_t), q * err)
    return out


@dataclass(eq=False)
class TransitionKernel:
    """Per-action sparse transition matrices over dense state ids.

    ``matrices[d]`` has a nonzero row exactly where ``feasible[d]`` is true.
    """

    cfg: ScaledConfig
    space: StateSpace
    matrices: list[sp.csr_matrix]
    feasible: np.ndarray  # (M + 1, n) bool

    @property
    def num_actions(self) -> int:
        return len(self.matrices)

    @property
    def num_states(self) -> int:
        return self.space.size

    @cached_property
    def stacked(self) -> sp.csr_matrix:
        """All actions stacked row-wise: row ``d * n + s`` is the (s, d) distribution."""
        return sp.vstack(self.matrices, format="csr")

    def row(self, sid: int, d: int) -> list[tuple[int, float]]:
        if not self.feasible[d, sid]:
            raise InfeasibleAction(f"action {d} is not feasible in state {sid}")
        mat = self.matrices[d]
        lo, hi = mat.indptr[sid], mat.indptr[sid + 1]
        return list(zip(mat.indices[lo:hi].tolist(), mat.data[lo:hi].tolist()))

    def feasible_actions(self, sid: int) -> list[int]:
        return [int(d) for d in np.flatnonzero(self.feasible[:, sid])]

    def export(self, path=None) -> str:
        """Debug dump: one ``state_id action next_id prob`` line per stored entry."""
        lines = []
        for sid in range(self.num_states):
            for d in range(self.num_actions):
                if self.feasible[d, sid]:
                    for nxt, p in self.row(sid, d):
                        lines.append(f"{sid} {d} {nxt} {p!r}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _assemble(rows, cols, vals, n) -> sp.csr_matrix:
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    keep = vals > 0.0
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def build_kernel(cfg: ScaledConfig, space: StateSpace | None = None) -> TransitionKernel:
    space = space or StateSpace(cfg)
    n = space.size
    M, N = cfg.num_modes, cfg.n_rec
    B, A = cfg.b_max, cfg.a_max
    ages, modes, hs, bs = space.arrays
    ids = np.arange(n, dtype=np.int64)
    aged = np.minimum(ages + 1, A)
    gain = cfg.harvest[hs]
    n_h = cfg.num_harvester_states

    # idle: mode bookkeeping
    is_just = (modes >= 1) & (modes <= M)
    is_post = modes > M
    post_off = np.where(is_post, modes - M - 1, 0)
    m_of = np.where(is_just, modes, np.where(is_post, post_off // max(N, 1) + 1, 0))
    j_of = np.where(is_post, post_off % max(N, 1) + 1, 0)
    recovering = (is_just | is_post) & (j_of < N)
    next_mode = np.where(recovering, M + (m_of - 1) * N + j_of + 1, 0)
    inc = np.where(recovering, cfg.increments[np.maximum(m_of - 1, 0)], 0)
    b_plain = np.minimum(bs + gain, B)
    b_rec = np.minimum(bs + gain + inc, B)
    p_hit = np.where(recovering, cfg.p_rec, 1.0)

    rows, cols, vals = [], [], []
    for nh in range(n_h):
        q = cfg.matrix[hs, nh]
        rows += [ids, ids]
        cols += [
            space.encode_many(aged, next_mode, nh, b_rec),
            space.encode_many(aged, next_mode, nh, b_plain),
        ]
        vals += [q * p_hit, q * (1.0 - p_hit)]
    matrices = [_assemble(rows, cols, vals, n)]
    feasible = np.zeros((M + 1, n), dtype=bool)
    feasible[0] = True

    for d in range(1, M + 1):
        ok = bs + gain - cfg.powers[d - 1] >= 0
        feasible[d] = ok
        src = ids[ok]
        b_t = np.minimum(bs[ok] + gain[ok] - cfg.powers[d - 1], B)
        err = cfg.error_probs[d - 1]
        rows, cols, vals = [], [], []
        for nh in range(n_h):
            q = cfg.matrix[hs[ok], nh]
            rows += [src, src]
            cols += [
                space.encode_many(np.ones_like(src), d, nh, b_t),
                space.encode_many(aged[ok], d, nh, b_t),
            ]
            vals += [q * (1.0 - err), q * err]
        matrices.append(_assemble(rows, cols, vals, n))

    for d, mat in enumerate(matrices):
        sums = np.asarray(mat.sum(axis=1)).ravel()
        bad = feasible[d] & (np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.any():
            raise AssertionError(f"action {d}: {bad.sum()} rows not stochastic")
    return TransitionKernel(cfg, space, matrices, feasible)
