class ParameterError(ValueError):
    """A parameter violates an operation's precondition."""


class DisconnectedGraphError(ValueError):
    """Raised when an operation needs every node reachable from every other."""


class IntegrityError(RuntimeError):
    """Internal consistency failure in the simulator (a bug, not bad input)."""


class InputError(ValueError):
    """Malformed input file."""
