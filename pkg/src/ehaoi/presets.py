"""Ready-made instances.

Only parameters that are pinned down by the modeled scenario are filled in;
everything else (recovery probability and window, on-state harvest power,
battery size, error probabilities where unspecified) is a required argument.
"""
from __future__ import annotations

from .model import HarvesterModel, RecoveryModel, SystemConfig, TxMode

# low-power/high-error and high-power/low-error LTE-like modes
LTE_MODES = (TxMode(3, 0.4), TxMode(6, 1e-3))
ON_OFF_STAY = 0.9
PEAK_A_MAX = 20


def two_mode_lte(*, p_rec: float, n_rec: int, harvest_on: int, b_max: int,
                 a_max: int = PEAK_A_MAX, modes: tuple[int, ...] = (1, 2)) -> SystemConfig:
    """On-off harvester (stay probability 0.9) feeding two LTE-like TX modes."""
    return SystemConfig(
        b_max=b_max,
        a_max=a_max,
        modes=tuple(LTE_MODES[i - 1] for i in modes),
        harvester=HarvesterModel.on_off(ON_OFF_STAY, ON_OFF_STAY, harvest_on),
        recovery=RecoveryModel(n_rec, p_rec),
    )


def sample_path(*, p_rec: float, error_probs: tuple[float, float], p_stay: float,
                b_max: int, a_max: int = PEAK_A_MAX) -> SystemConfig:
    """Powers 2 and 4, on-off harvest of 0 or 2 units, two-slot recovery window."""
    return SystemConfig(
        b_max=b_max,
        a_max=a_max,
        modes=(TxMode(2, error_probs[0]), TxMode(4, error_probs[1])),
        harvester=HarvesterModel.on_off(p_stay, p_stay, 2),
        recovery=RecoveryModel(2, p_rec),
    )


PRESETS = {
    "two-mode-lte": two_mode_lte,
    "sample-path": sample_path,
}
