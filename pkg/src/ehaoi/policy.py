"""Stationary deterministic policies and their text interchange format.

File layout (whitespace separated, ``#`` lines are comments)::

    # ehaoi-policy v1
    # config_hash=<hex> scale=<int> a_max=<int> states=<int>
    state_id age mode harvester battery action
    0 1 idle 0 0 0
    ...

``battery`` is in scaled integer units; ``state_id`` is authoritative and the
remaining state columns are cross-checked on load.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InfeasiblePolicyAction
from .model import config_hash
from .statespace import State, TransitionKernel

HEADER = "state_id age mode harvester battery action"


@dataclass(frozen=True, eq=False)
class Policy:
    actions: np.ndarray  # (n,) int, 0 = idle, m = transmit with mode m

    def __post_init__(self):
        object.__setattr__(self, "actions", np.asarray(self.actions, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, sid: int) -> int:
        return int(self.actions[sid])

    def __eq__(self, other) -> bool:
        return isinstance(other, Policy) and np.array_equal(self.actions, other.actions)

    @classmethod
    def all_idle(cls, n: int) -> "Policy":
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def greedy_transmit(cls, kernel: TransitionKernel, mode: int | None = None) -> "Policy":
        """Transmit whenever possible: with ``mode`` if given, else the highest feasible index."""
        if mode is not None:
            return cls(np.where(kernel.feasible[mode], mode, 0))
        idx = np.arange(kernel.num_actions)[:, None]
        return cls(np.max(np.where(kernel.feasible, idx, 0), axis=0))

    @classmethod
    def random(cls, kernel: TransitionKernel, rng: np.random.Generator) -> "Policy":
        """Uniform draw over each state's feasible actions."""
        counts = kernel.feasible.sum(axis=0)
        pick = rng.integers(0, counts)
        order = np.cumsum(kernel.feasible, axis=0) - 1
        hit = kernel.feasible & (order == pick[None, :])
        return cls(np.argmax(hit, axis=0))

    def check_feasible(self, kernel: TransitionKernel) -> "Policy":
        if len(self) != kernel.num_states:
            raise InfeasiblePolicyAction(f"policy covers {len(self)} states, kernel has {kernel.num_states}")
        if self.actions.min() < 0 or self.actions.max() >= kernel.num_actions:
            raise InfeasiblePolicyAction("policy uses an unknown action")
        ok = kernel.feasible[self.actions, np.arange(len(self))]
        if not ok.all():
            sid = int(np.flatnonzero(~ok)[0])
            raise InfeasiblePolicyAction(
                f"action {self[sid]} is infeasible in state {sid} {kernel.space.decode(sid)}"
            )
        return self


def dump_policy(policy: Policy, kernel: TransitionKernel, path: str | Path | None = None) -> str:
    space, cfg = kernel.space, kernel.cfg
    ages, modes, hs, bs = space.arrays
    lines = [
        "# ehaoi-policy v1",
        f"# config_hash={config_hash(cfg.source)} scale={cfg.scale} a_max={cfg.a_max} states={space.size}",
        HEADER,
    ]
    labels = [space.mode_label(c) for c in range(space.n_modes)]
    for sid in range(space.size):
        lines.append(f"{sid} {ages[sid]} {labels[modes[sid]]} {hs[sid]} {bs[sid]} {policy.actions[sid]}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_policy(path: str | Path, kernel: TransitionKernel) -> Policy:
    space = kernel.space
    actions = np.full(space.size, -1, dtype=np.int64)
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line == HEADER:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 columns, got {len(fields)}")
            sid = int(fields[0])
            state = State(int(fields[1]), space.parse_mode(fields[2]), int(fields[3]), int(fields[4]))
            if space.decode(sid) != state:
                raise ValueError(f"{path}:{lineno}: state columns disagree with id {sid}")
            actions[sid] = int(fields[5])
    if (actions < 0).any():
        raise ValueError(f"{path}: policy is missing {(actions < 0).sum()} states")
    return Policy(actions).check_feasible(kernel)
