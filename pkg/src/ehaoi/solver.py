"""Average-reward optimal policies by relative value iteration.

``policy_enumeration_oracle`` is a brute-force cross-check for small
instances: it scores every stationary deterministic policy through its
induced chain's limiting distribution.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import MatrixRankWarning

from .chain import induce_chain, limiting_distribution, reachable_from
from .errors import EmptyKernel, NotConverged, SingularSystem, TooManyPolicies
from .policy import Policy
from .rewards import RewardSpec, reward_vector
from .statespace import TransitionKernel

log = logging.getLogger(__name__)

DEFAULT_EPS_C = 1e-10
DEFAULT_MAX_ITER = 10**6
APERIODICITY_DAMPING = 0.5
STALL_SWEEPS = 100
REFERENCE_STATE = 0


@dataclass(eq=False)
class SolveResult:
    policy: Policy
    gain: float
    values: np.ndarray | None
    iterations: int
    span_at_stop: float
    converged: bool = True
    damping: float = 0.0
    span_monotone: bool = True


def _needs_damping(kernel: TransitionKernel) -> bool:
    return not bool((np.diag(kernel.cfg.matrix) > 0).any())


def greedy_policy(kernel: TransitionKernel, rewards: np.ndarray, values: np.ndarray) -> Policy:
    """Greedy action per state; exact ties (up to rounding) go to the lowest action index."""
    n = kernel.num_states
    q = (kernel.stacked @ values).reshape(kernel.num_actions, n)
    q = np.where(kernel.feasible, q, -np.inf)
    best = q.max(axis=0)
    tol = 1e-12 * max(1.0, float(np.abs(values).max()), float(np.abs(rewards).max()))
    return Policy(np.argmax(q >= (best - tol)[None, :], axis=0))


def relative_value_iteration(
    kernel: TransitionKernel,
    spec: RewardSpec,
    eps_c: float = DEFAULT_EPS_C,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float | None = None,
) -> SolveResult:
    """Synchronous relative value iteration.

    Each sweep computes ``T V = r + max_d P_d V`` from the previous values only,
    then subtracts the value at state 0. Stops once the span of ``T V - V``
    drops below ``eps_c``; the gain is the midpoint of its range.

    ``damping`` mixes the old values back in (``tau * V + (1 - tau) * T V``),
    which makes every induced chain aperiodic without moving the optimum. By
    default it is enabled when no harvester state has a self-loop, and is
    switched on mid-run if the span stops shrinking for ``STALL_SWEEPS``
    sweeps (an optimal chain can still be periodic, e.g. a battery that
    alternates between two levels).
    """
    n = kernel.num_states
    if n == 0:
        raise EmptyKernel("kernel has no states")
    if eps_c <= 0:
        raise ValueError("eps_c must be positive")
    tau = (APERIODICITY_DAMPING if _needs_damping(kernel) else 0.0) if damping is None else damping
    r = reward_vector(kernel.space.arrays[0], kernel.cfg.a_max, spec)
    stacked = kernel.stacked
    blocked = np.where(kernel.feasible, 0.0, -np.inf)
    n_act = kernel.num_actions

    v = np.zeros(n)
    prev_span = math.inf
    monotone = True
    span = math.inf
    diff = np.zeros(n)
    stalled = 0
    it = 0
    for it in range(1, max_iter + 1):
        q = (stacked @ v).reshape(n_act, n) + blocked
        tv = r + q.max(axis=0)
        if tau:
            tv = tau * v + (1.0 - tau) * tv
        diff = tv - v
        hi, lo = diff.max(), diff.min()
        span = hi - lo
        if span > prev_span * (1 + 1e-9) + 1e-14:
            monotone = False
        stalled = stalled + 1 if span >= prev_span * (1 - 1e-12) else 0
        prev_span = span
        v = tv - tv[REFERENCE_STATE]
        if span < eps_c:
            break
        if stalled >= STALL_SWEEPS and not tau and damping is None:
            log.info("span stalled at %.3e; switching to damped iteration", span)
            tau = APERIODICITY_DAMPING
            prev_span = math.inf
            stalled = 0

    gain = 0.5 * (diff.max() + diff.min()) / (1.0 - tau)
    converged = bool(span < eps_c)
    if not monotone:
        log.warning("span of successive value differences increased during iteration")
    result = SolveResult(
        policy=greedy_policy(kernel, r, v),
        gain=float(gain),
        values=v,
        iterations=it,
        span_at_stop=float(span),
        converged=converged,
        damping=tau,
        span_monotone=monotone,
    )
    if not converged:
        raise NotConverged(f"span {span:.3e} still above {eps_c:.1e} after {it} iterations", result)
    return result


def evaluate_policy(
    kernel: TransitionKernel,
    policy: Policy,
    spec: RewardSpec,
    start: int | None = None,
) -> float:
    """Gain of a fixed policy from its evaluation equations ``g + h = r + P h``.

    Solved directly with ``h`` pinned to zero at the first reachable state, on
    the states reachable from ``start`` (the canonical cold start by default).
    This is the dynamic-programming route to the gain; it never forms the
    stationary distribution. Raises ``SingularSystem`` when the reachable
    chain has more than one closed class.
    """
    chain = induce_chain(kernel, policy)
    start = kernel.space.canonical_start() if start is None else start
    reach = reachable_from(chain, start)
    sub = chain[reach][:, reach].tocsc()
    r = reward_vector(kernel.space.arrays[0][reach], kernel.cfg.a_max, spec)
    k = len(reach)
    lhs = (sp.identity(k, format="csc") - sub)[:, 1:]
    lhs = sp.hstack([sp.csc_matrix(np.ones((k, 1))), lhs], format="csc")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        x = spla.spsolve(lhs, r)
    resid = np.abs(lhs @ x - r).max() if np.all(np.isfinite(x)) else np.inf
    if not resid <= 1e-9 * max(1.0, np.abs(r).max()):
        raise SingularSystem("policy evaluation equations are singular (more than one closed class?)")
    return float(x[0])


def policy_enumeration_oracle(
    kernel: TransitionKernel,
    spec: RewardSpec,
    max_policies: int = 10**6,
    start: int | None = None,
) -> SolveResult:
    """Best stationary deterministic policy by exhaustive enumeration.

    Only states reachable from ``start`` under some action sequence carry a
    decision; everywhere else the policy idles, which cannot change the gain
    seen from ``start``. Ties keep the lexicographically smallest action vector.
    """
    n = kernel.num_states
    if n == 0:
        raise EmptyKernel("kernel has no states")
    start = kernel.space.canonical_start() if start is None else start
    union = sum(kernel.matrices[1:], kernel.matrices[0]).tocsr()
    reach = reachable_from(union, start)
    choice = [int(s) for s in reach if kernel.feasible[:, s].sum() > 1]
    options = [kernel.feasible_actions(s) for s in choice]
    count = math.prod(len(o) for o in options)
    if count > max_policies:
        raise TooManyPolicies(f"{count} policies exceed the limit of {max_policies}")

    r = reward_vector(kernel.space.arrays[0], kernel.cfg.a_max, spec)
    base = np.zeros(n, dtype=np.int64)
    stacked = kernel.stacked
    rows = np.arange(n)
    best_gain, best_actions = -math.inf, None
    evaluated = 0
    for combo in itertools.product(*options):
        actions = base.copy()
        actions[choice] = combo
        chain = sp.csr_matrix(stacked[actions * n + rows])
        gain = float(limiting_distribution(chain, start) @ r)
        evaluated += 1
        if best_actions is None or gain > best_gain + 1e-12 * max(1.0, abs(best_gain)):
            best_gain, best_actions = gain, actions
    return SolveResult(
        policy=Policy(best_actions),
        gain=best_gain,
        values=None,
        iterations=evaluated,
        span_at_stop=0.0,
    )
