"""State rewards whose long-run average encodes each age objective."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

Objective = Literal["peak", "avg", "weighted"]


@dataclass(frozen=True)
class RewardSpec:
    """Objective selector.

    ``peak`` pays ``r_prime`` (< 0) in states at the age cap and nothing
    elsewhere, so the gain is ``r_prime`` times the cap-hitting probability.
    ``avg`` pays ``-age``. ``weighted`` pays ``-alpha * age`` below the cap and
    ``-a_max`` at the cap.
    """

    objective: Objective = "avg"
    alpha: float = 1.0
    r_prime: float = -1.0

    def __post_init__(self):
        if self.objective not in ("peak", "avg", "weighted"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.objective == "peak" and not self.r_prime < 0:
            raise ValueError("r_prime must be negative")
        if self.objective == "weighted" and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @classmethod
    def peak(cls, r_prime: float = -1.0) -> "RewardSpec":
        return cls("peak", r_prime=r_prime)

    @classmethod
    def average(cls) -> "RewardSpec":
        return cls("avg")

    @classmethod
    def weighted(cls, alpha: float) -> "RewardSpec":
        return cls("weighted", alpha=alpha)

    @property
    def alpha_or_none(self) -> float | None:
        return self.alpha if self.objective == "weighted" else None


def reward(age: int, a_max: int, spec: RewardSpec) -> float:
    if spec.objective == "peak":
        return spec.r_prime if age == a_max else 0.0
    if spec.objective == "avg":
        return -float(age)
    return -float(a_max) if age == a_max else -spec.alpha * age


def reward_vector(ages: np.ndarray, a_max: int, spec: RewardSpec) -> np.ndarray:
    ages = np.asarray(ages)
    at_cap = ages == a_max
    if spec.objective == "peak":
        return np.where(at_cap, spec.r_prime, 0.0)
    if spec.objective == "avg":
        return -ages.astype(float)
    return np.where(at_cap, -float(a_max), -spec.alpha * ages)
