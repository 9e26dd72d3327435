"""
Utility modules: CLI interface, error types and the thread pool helper.
"""

from .errors import LabError, ConfigError, SolverError, BudgetError
from .parallel import parallel_map, pairwise_sum

__all__ = [
    'LabError', 'ConfigError', 'SolverError', 'BudgetError',
    'parallel_map', 'pairwise_sum',
]
