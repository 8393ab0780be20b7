"""Optimal transmission policies for energy-harvesting age-of-information sensors."""

from .model import (
    HarvesterModel,
    RecoveryModel,
    ScaledConfig,
    SystemConfig,
    TxMode,
    prepare,
    scale_energies,
    validate_config,
)
from .policy import Policy
from .rewards import RewardSpec
from .solver import SolveResult, policy_enumeration_oracle, relative_value_iteration
from .statespace import State, StateSpace, TransitionKernel, build_kernel, enumerate_states

__version__ = "0.1.0"
