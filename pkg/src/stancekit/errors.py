"""Exception types mapped to CLI exit codes."""


class DataError(Exception):
    """Input data violates a file format or precondition (exit code 2)."""


class ConsistencyError(Exception):
    """Internal invariant broken, e.g. contradictory transitive output (exit code 3)."""
