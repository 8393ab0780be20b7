"""Markov chains induced by fixed policies and their steady-state metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from .errors import MultipleRecurrentClasses, PeriodicChain, SingularSystem
from .model import ScaledConfig
from .policy import Policy
from .statespace import StateSpace, TransitionKernel

RESIDUAL_TOL = 1e-12
# sparse LU stays cheap well past this; power iteration only for huge classes
DIRECT_SOLVE_MAX = 200_000


@dataclass(frozen=True)
class Metrics:
    avg_age: float
    peak_hit_prob: float
    avg_tx_power: float
    avg_battery: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def induce_chain(kernel: TransitionKernel, policy: Policy) -> sp.csr_matrix:
    policy.check_feasible(kernel)
    n = kernel.num_states
    return kernel.stacked[policy.actions * n + np.arange(n)]


def reachable_from(chain: sp.csr_matrix, start: int) -> np.ndarray:
    order = csgraph.breadth_first_order(chain, start, directed=True, return_predecessors=False)
    return np.sort(order)


def closed_classes(chain: sp.csr_matrix, start: int) -> list[np.ndarray]:
    """Closed communicating classes reachable from ``start``, each sorted."""
    reach = reachable_from(chain, start)
    sub = chain[reach][:, reach]
    n_comp, labels = csgraph.connected_components(sub, directed=True, connection="strong")
    coo = sub.tocoo()
    leaks = labels[coo.row] != labels[coo.col]
    open_comp = np.zeros(n_comp, dtype=bool)
    open_comp[labels[coo.row[leaks]]] = True
    classes = [reach[labels == c] for c in range(n_comp) if not open_comp[c]]
    classes.sort(key=lambda c: int(c[0]))
    return classes


def recurrent_class(chain: sp.csr_matrix, start: int) -> np.ndarray:
    classes = closed_classes(chain, start)
    if len(classes) != 1:
        raise MultipleRecurrentClasses(
            f"{len(classes)} closed classes reachable from state {start} "
            f"(sizes {[len(c) for c in classes]})"
        )
    return classes[0]


def period(chain: sp.csr_matrix, cls: np.ndarray) -> int:
    sub = chain[cls][:, cls]
    order, pred = csgraph.breadth_first_order(sub, 0, directed=True, return_predecessors=True)
    level = np.zeros(len(cls), dtype=np.int64)
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    coo = sub.tocoo()
    return int(np.gcd.reduce(np.abs(level[coo.row] + 1 - level[coo.col])))


def steady_state(chain: sp.csr_matrix, cls: np.ndarray, allow_periodic: bool = False) -> np.ndarray:
    """Stationary distribution supported on the closed class ``cls``.

    Returned as a full-length vector (zero off the class).
    """
    if not allow_periodic:
        d = period(chain, cls)
        if d > 1:
            raise PeriodicChain(f"recurrent class has period {d}")
    k = len(cls)
    sub = chain[cls][:, cls].tocsr()
    if k == 1:
        pi = np.ones(1)
    elif k <= DIRECT_SOLVE_MAX:
        a = (sub.T - sp.identity(k, format="csr")).tolil()
        a[0, :] = np.ones(k)
        rhs = np.zeros(k)
        rhs[0] = 1.0
        pi = spla.spsolve(a.tocsc(), rhs)
    else:
        pi = _power_iteration(sub)
    if not np.all(np.isfinite(pi)):
        raise SingularSystem("stationary solve produced non-finite values")
    if pi.min() < -1e-9:
        raise SingularSystem(f"stationary solve produced negative mass {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    pi /= math.fsum(pi)
    resid = np.abs(sub.T @ pi - pi).max()
    if resid > RESIDUAL_TOL:
        pi = _power_iteration(sub, pi)
    full = np.zeros(chain.shape[0])
    full[cls] = pi
    return full


def _power_iteration(sub: sp.csr_matrix, x0: np.ndarray | None = None, max_iter: int = 1_000_000) -> np.ndarray:
    # lazy chain (I + P) / 2: same stationary vector, and it converges on periodic classes too
    k = sub.shape[0]
    x = np.full(k, 1.0 / k) if x0 is None else x0.copy()
    pt = sub.T.tocsr()
    for _ in range(max_iter):
        y = 0.5 * (x + pt @ x)
        y /= y.sum()
        if np.abs(y - x).max() <= RESIDUAL_TOL / 10:
            return y
        x = y
    raise SingularSystem("power iteration did not reach the residual tolerance")


def limiting_distribution(chain: sp.csr_matrix, start: int) -> np.ndarray:
    """Cesaro-limit occupation from ``start``; tolerates several closed classes.

    Mass is split across closed classes by absorption probability. Periodic
    classes are allowed since only time averages are needed.
    """
    classes = closed_classes(chain, start)
    if len(classes) == 1:
        return steady_state(chain, classes[0], allow_periodic=True)
    reach = reachable_from(chain, start)
    in_class = np.zeros(chain.shape[0], dtype=bool)
    for c in classes:
        in_class[c] = True
    transient = reach[~in_class[reach]]
    out = np.zeros(chain.shape[0])
    if in_class[start]:
        for c in classes:
            if start in c:
                return steady_state(chain, c, allow_periodic=True)
    p_tt = chain[transient][:, transient]
    lhs = (sp.identity(len(transient), format="csc") - p_tt).tocsc()
    lu = spla.splu(lhs)
    pos = int(np.searchsorted(transient, start))
    for c in classes:
        into = np.asarray(chain[transient][:, c].sum(axis=1)).ravel()
        absorb = lu.solve(into)[pos]
        if absorb > 0.0:
            out += absorb * steady_state(chain, c, allow_periodic=True)
    return out


def metrics(dist: np.ndarray, space: StateSpace, policy: Policy, cfg: ScaledConfig) -> Metrics:
    ages, _, _, batteries = space.arrays
    power_of_action = np.concatenate(([0], cfg.powers)) / cfg.scale
    return Metrics(
        avg_age=float(dist @ ages),
        peak_hit_prob=float(dist[ages == space.a_max].sum()),
        avg_tx_power=float(dist @ power_of_action[policy.actions]),
        avg_battery=float(dist @ batteries) / cfg.scale,
    )


def age_components(dist: np.ndarray, space: StateSpace) -> tuple[float, float]:
    """``(sum_{k < a_max} k p_k, a_max p_{a_max})``, the two terms the weighted objective trades off."""
    ages = space.arrays[0]
    at_cap = ages == space.a_max
    return float(dist[~at_cap] @ ages[~at_cap]), float(space.a_max * dist[at_cap].sum())


def evaluate(kernel: TransitionKernel, policy: Policy, start: int | None = None) -> tuple[Metrics, np.ndarray]:
    """Induce, find the recurrent class, solve, summarize.

    A periodic class is accepted: its stationary vector is still unique and is
    the long-run fraction of time in each state, which is what the metrics
    report. Several closed classes raise ``MultipleRecurrentClasses``.
    """
    chain = induce_chain(kernel, policy)
    start = kernel.space.canonical_start() if start is None else start
    cls = recurrent_class(chain, start)
    dist = steady_state(chain, cls, allow_periodic=True)
    return metrics(dist, kernel.space, policy, kernel.cfg), dist
