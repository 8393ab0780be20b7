"""Exception hierarchy shared across the package."""


class EhaoiError(Exception):
    """Base class for all package errors."""


class ConfigError(EhaoiError):
    """An instance failed validation.

    ``violations`` lists every problem found, not only the first; the raised
    exception's class is that of the first violation.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [self]


class InvalidStochasticMatrix(ConfigError):
    pass


class NegativeQuantity(ConfigError):
    pass


class EmptyModeList(ConfigError):
    pass


class InfeasibleInstance(ConfigError):
    pass


class StateSpaceTooLarge(EhaoiError):
    pass


class InfeasibleAction(EhaoiError):
    pass


class InfeasiblePolicyAction(InfeasibleAction):
    pass


class EmptyKernel(EhaoiError):
    pass


class NotConverged(EhaoiError):
    """Raised when value iteration hits ``max_iter``; carries the partial result."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TooManyPolicies(EhaoiError):
    pass


class StructuralError(EhaoiError):
    """Chain structure contradicts a modeling premise."""


class MultipleRecurrentClasses(StructuralError):
    pass


class PeriodicChain(StructuralError):
    pass


class SingularSystem(StructuralError):
    pass


class Diverged(EhaoiError):
    pass
