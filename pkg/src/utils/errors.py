"""
Exception types shared by the library and the command-line interface.

Library code raises these; only the CLI turns them into exit codes.
"""


class LabError(Exception):
    """Base class for all recoverable lab failures."""

    exit_code = 1


class ConfigError(LabError):
    """Malformed or invalid configuration."""

    exit_code = 2


class SolverError(LabError):
    """A numerical solve failed (eigensolver, gauge, NaN in an iteration)."""

    exit_code = 3


class BudgetError(LabError):
    """A computation would exceed the configured memory budget."""

    exit_code = 4

    def __init__(self, message: str, term: str = '', n_k: int = 0):
        super().__init__(message)
        self.term = term
        self.n_k = n_k
