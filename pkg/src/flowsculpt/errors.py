"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: usage problems exit 1, data problems
(malformed files, incompatible checkpoints, bad payloads) exit 2.
"""


class FlowSculptError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(FlowSculptError, ValueError):
    """An argument value violates a precondition (bad fraction, bad action id, ...)."""


class GridMismatchError(FlowSculptError, ValueError):
    """Two objects that must share a grid do not."""


class EmptyTargetError(FlowSculptError, ValueError):
    """The pixel-match metric is undefined for a target with no on-pixels."""


class UsageError(FlowSculptError, RuntimeError):
    """An operation was invoked in a state that forbids it (step after done, ...)."""


class NumericError(FlowSculptError, ArithmeticError):
    """A non-finite value appeared where finite math is required."""


class DocumentError(FlowSculptError, ValueError):
    """A shape/library/config document failed to parse or validate."""


class CheckpointError(FlowSculptError, ValueError):
    """A checkpoint file is malformed or incompatible with the requested use."""
