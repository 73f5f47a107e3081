"""Exception and warning types raised across the package."""


class KinoRRTError(Exception):
    """Base class for all package errors."""


class InvalidInputError(KinoRRTError, ValueError):
    """An argument is out of its domain (non-finite, negative time, bad shape)."""


class DegenerateHorizonError(KinoRRTError):
    """The steering linear system is numerically singular at the requested arrival time."""


class NoConnectionError(KinoRRTError):
    """Every candidate arrival time was degenerate; the two states cannot be connected."""


class EnvironmentSaturatedError(KinoRRTError):
    """Rejection sampling exhausted its attempt budget."""


class InvalidScenarioError(KinoRRTError, ValueError):
    """A scenario is inconsistent (bad dimensions, start in collision, unknown built-in)."""


class IllConditionedWarning(UserWarning):
    """A Gramian or steering matrix is close to singular."""
