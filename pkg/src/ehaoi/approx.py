"""Choosing the age cap for the average-age objective.

The average-age MDP is infinite in principle; it is truncated at ``a_max``.
:func:`find_amax` grows the cap until the average-optimal policy on the
truncated model reaches the cap with probability at most ``epsilon``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .chain import evaluate
from .errors import Diverged
from .model import SystemConfig, prepare
from .policy import Policy
from .rewards import RewardSpec
from .solver import DEFAULT_EPS_C, relative_value_iteration
from .statespace import build_kernel

log = logging.getLogger(__name__)


@dataclass
class ApproxResult:
    a_max_final: int
    policy: Policy
    peak_prob_final: float
    history: list[tuple[int, float]] = field(default_factory=list)


def cap_probability(base_cfg: SystemConfig, k: int, eps_c: float = DEFAULT_EPS_C) -> tuple[float, Policy]:
    """Solve the average-age problem with cap ``k``; return its cap-hitting probability and policy."""
    kernel = build_kernel(prepare(base_cfg.replace(a_max=k)))
    res = relative_value_iteration(kernel, RewardSpec.average(), eps_c=eps_c)
    m, _ = evaluate(kernel, res.policy)
    return m.peak_hit_prob, res.policy


def find_amax(
    base_cfg: SystemConfig,
    k0: int = 2,
    epsilon: float = 1e-6,
    step: int = 5,
    ceiling: int = 500,
    refine: bool = True,
    eps_c: float = DEFAULT_EPS_C,
) -> ApproxResult:
    """Smallest scanned cap ``K >= k0`` whose average-optimal policy hits ``K`` w.p. <= ``epsilon``.

    ``base_cfg.a_max`` is ignored. The cap grows by ``step``; once a step
    overshoots, the skipped caps are rescanned one at a time (``refine``) so
    the answer matches a unit-step scan. ``history`` keeps ``(K, p)`` for every
    cap that failed plus the accepted one.
    """
    if k0 < 2 or epsilon <= 0 or step < 1:
        raise ValueError("need k0 >= 2, epsilon > 0, step >= 1")
    history: list[tuple[int, float]] = []
    k = k0
    last_fail = None
    while True:
        if k > ceiling:
            raise Diverged(f"cap exceeded the ceiling {ceiling} without reaching epsilon={epsilon}")
        p, policy = cap_probability(base_cfg, k, eps_c)
        if p <= epsilon:
            break
        if history and p > history[-1][1]:
            log.warning("cap-hitting probability rose from %.3e to %.3e at K=%d", history[-1][1], p, k)
        history.append((k, p))
        last_fail = k
        k += step

    if refine and step > 1 and last_fail is not None:
        for kk in range(last_fail + 1, k):
            pp, pol = cap_probability(base_cfg, kk, eps_c)
            if pp <= epsilon:
                k, p, policy = kk, pp, pol
                break
            history.append((kk, pp))
    history.append((k, p))
    return ApproxResult(k, policy, p, history)


def grid_scan(base_cfg: SystemConfig, k_lo: int, k_hi: int, epsilon: float, eps_c: float = DEFAULT_EPS_C) -> int | None:
    """First cap in ``[k_lo, k_hi]`` meeting ``epsilon``, by solving every cap independently."""
    probs = {k: cap_probability(base_cfg, k, eps_c)[0] for k in range(k_lo, k_hi + 1)}
    hits = [k for k, p in probs.items() if p <= epsilon]
    return min(hits) if hits else None
