"""Problem instances: transmission modes, harvester chain, battery recovery.

Energies in a :class:`SystemConfig` are positive integers in *config units*.
Solvers work on a :class:`ScaledConfig`, where every energy is multiplied by
``max(n_rec, 1)`` so that the per-slot recovery increment ``power / n_rec``
is an exact integer.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .errors import (
    ConfigError,
    EmptyModeList,
    InfeasibleInstance,
    InvalidStochasticMatrix,
    NegativeQuantity,
)

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class TxMode:
    power: int
    error_prob: float


@dataclass(frozen=True)
class HarvesterModel:
    matrix: tuple[tuple[float, ...], ...]
    powers: tuple[int, ...]

    @property
    def num_states(self) -> int:
        return len(self.powers)

    @classmethod
    def constant(cls, power: int) -> "HarvesterModel":
        return cls(((1.0,),), (power,))

    @classmethod
    def on_off(cls, p_stay_off: float, p_stay_on: float, on_power: int) -> "HarvesterModel":
        """Two-state harvester; state 0 harvests nothing, state 1 harvests ``on_power``."""
        return cls(
            ((p_stay_off, _complement(p_stay_off)), (_complement(p_stay_on), p_stay_on)),
            (0, on_power),
        )


def _complement(p: float) -> float:
    # decimal complement, so 0.9 pairs with 0.1 rather than 0.09999999999999998
    return float(Decimal(1) - Decimal(repr(float(p))))


@dataclass(frozen=True)
class RecoveryModel:
    n_rec: int = 0
    p_rec: float = 0.0

    @property
    def enabled(self) -> bool:
        return self.n_rec > 0


@dataclass(frozen=True)
class SystemConfig:
    b_max: int
    a_max: int
    modes: tuple[TxMode, ...]
    harvester: HarvesterModel
    recovery: RecoveryModel = field(default_factory=RecoveryModel)

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "b_max": self.b_max,
            "a_max": self.a_max,
            "modes": [{"power": m.power, "error_prob": m.error_prob} for m in self.modes],
            "harvester": {
                "matrix": [list(row) for row in self.harvester.matrix],
                "powers": list(self.harvester.powers),
            },
            "recovery": {"n_rec": self.recovery.n_rec, "p_rec": self.recovery.p_rec},
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SystemConfig":
        try:
            harvester = raw["harvester"]
            recovery = raw.get("recovery") or {}
            return cls(
                b_max=raw["b_max"],
                a_max=raw["a_max"],
                modes=tuple(TxMode(m["power"], m["error_prob"]) for m in raw["modes"] or ()),
                harvester=HarvesterModel(
                    tuple(tuple(row) for row in harvester["matrix"]),
                    tuple(harvester["powers"]),
                ),
                recovery=RecoveryModel(recovery.get("n_rec", 0), recovery.get("p_rec", 0.0)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: missing or mistyped field {exc}") from None

    def replace(self, **changes) -> "SystemConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def with_modes(self, indices: Sequence[int]) -> "SystemConfig":
        """Keep only the given 1-based mode indices, in order."""
        return self.replace(modes=tuple(self.modes[i - 1] for i in indices))

    def without_recovery(self) -> "SystemConfig":
        return self.replace(recovery=RecoveryModel(0, self.recovery.p_rec))


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_prob(x) -> bool:
    return isinstance(x, (int, float, np.floating)) and not isinstance(x, bool) and 0.0 <= x <= 1.0


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Return ``cfg`` unchanged if it is a well-formed instance, else raise.

    All violations are collected; the raised exception is an instance of the
    first violation's class and lists the rest in ``.violations``.
    """
    problems: list[ConfigError] = []

    if not _is_int(cfg.b_max) or cfg.b_max < 0:
        problems.append(NegativeQuantity(f"b_max must be a nonnegative integer, got {cfg.b_max!r}"))
    if not _is_int(cfg.a_max) or cfg.a_max < 2:
        problems.append(ConfigError(f"a_max must be an integer >= 2, got {cfg.a_max!r}"))

    if not cfg.modes:
        problems.append(EmptyModeList("at least one transmission mode is required"))
    for i, mode in enumerate(cfg.modes, start=1):
        if not _is_int(mode.power) or mode.power < 1:
            problems.append(NegativeQuantity(f"mode {i}: power must be an integer >= 1, got {mode.power!r}"))
        if not _is_prob(mode.error_prob):
            problems.append(ConfigError(f"mode {i}: error_prob must lie in [0, 1], got {mode.error_prob!r}"))

    h = cfg.harvester
    n_h = len(h.powers)
    if n_h < 1:
        problems.append(ConfigError("harvester needs at least one state"))
    for i, p in enumerate(h.powers):
        if not _is_int(p) or p < 0:
            problems.append(NegativeQuantity(f"harvester state {i}: power must be a nonnegative integer, got {p!r}"))
    if len(h.matrix) != n_h or any(len(row) != n_h for row in h.matrix):
        problems.append(InvalidStochasticMatrix(f"harvester matrix must be {n_h}x{n_h}"))
    else:
        for i, row in enumerate(h.matrix):
            if any(not _is_prob(q) for q in row):
                problems.append(InvalidStochasticMatrix(f"harvester row {i}: entries must lie in [0, 1]"))
            elif abs(math.fsum(row) - 1.0) > ROW_SUM_TOL:
                problems.append(
                    InvalidStochasticMatrix(f"harvester row {i} sums to {math.fsum(row)!r}, not 1")
                )

    rec = cfg.recovery
    if not _is_int(rec.n_rec) or rec.n_rec < 0:
        problems.append(NegativeQuantity(f"n_rec must be a nonnegative integer, got {rec.n_rec!r}"))
    if not _is_prob(rec.p_rec):
        problems.append(ConfigError(f"p_rec must lie in [0, 1], got {rec.p_rec!r}"))

    if not problems and cfg.modes:
        cheapest = min(m.power for m in cfg.modes)
        if cheapest > cfg.b_max + max(h.powers):
            problems.append(
                InfeasibleInstance(
                    f"no mode can ever transmit: cheapest power {cheapest} exceeds "
                    f"b_max + max harvest = {cfg.b_max + max(h.powers)}"
                )
            )

    if problems:
        first = problems[0]
        raise type(first)("; ".join(str(p) for p in problems), problems)
    return cfg


@dataclass(frozen=True, eq=False)
class ScaledConfig:
    """Integer-lattice view of a validated config (energies times ``scale``)."""

    source: SystemConfig
    scale: int
    b_max: int
    a_max: int
    powers: np.ndarray  # (M,) int, scaled
    error_probs: np.ndarray  # (M,)
    increments: np.ndarray  # (M,) int, scaled recovery per successful idle slot
    harvest: np.ndarray  # (N_H,) int, scaled
    matrix: np.ndarray  # (N_H, N_H)
    n_rec: int
    p_rec: float

    @property
    def num_modes(self) -> int:
        return len(self.powers)

    @property
    def num_harvester_states(self) -> int:
        return len(self.harvest)

    def descale(self) -> SystemConfig:
        s = self.scale
        return SystemConfig(
            b_max=int(self.b_max // s),
            a_max=self.a_max,
            modes=tuple(
                TxMode(int(p // s), float(e)) for p, e in zip(self.powers, self.error_probs)
            ),
            harvester=HarvesterModel(
                tuple(tuple(float(q) for q in row) for row in self.matrix),
                tuple(int(p // s) for p in self.harvest),
            ),
            recovery=RecoveryModel(self.n_rec, self.p_rec),
        )


def scale_energies(cfg: SystemConfig) -> ScaledConfig:
    s = max(cfg.recovery.n_rec, 1)
    powers = np.array([m.power * s for m in cfg.modes], dtype=np.int64)
    if cfg.recovery.n_rec > 0:
        increments = powers // cfg.recovery.n_rec
    else:
        increments = np.zeros_like(powers)
    return ScaledConfig(
        source=cfg,
        scale=s,
        b_max=cfg.b_max * s,
        a_max=cfg.a_max,
        powers=powers,
        error_probs=np.array([m.error_prob for m in cfg.modes], dtype=float),
        increments=increments,
        harvest=np.array(cfg.harvester.powers, dtype=np.int64) * s,
        matrix=np.array(cfg.harvester.matrix, dtype=float),
        n_rec=cfg.recovery.n_rec,
        p_rec=float(cfg.recovery.p_rec),
    )


def prepare(cfg: SystemConfig) -> ScaledConfig:
    return scale_energies(validate_config(cfg))


def config_hash(cfg: SystemConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path: str | Path) -> SystemConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return SystemConfig.from_dict(raw)


def dump_config(cfg: SystemConfig, path: str | Path | None = None) -> str:
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
    if path is not None:
        Path(path).write_text(text)
    return text
