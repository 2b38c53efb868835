"""Numerical tools for multipartite correlation Bell inequalities."""

__version__ = "0.1.0"

from .tensor_core import (
    BellFunctional,
    BudgetError,
    Observable,
    ObservableSet,
    QuantumState,
    ValidationError,
    bell_operator,
    expectation,
    make_traceless,
)
from .classical_value import classical_value_exact, classical_value_heuristic
from .quantum_value import SeesawConfig, ViolationReport, seesaw
from .functionals import builtin_functional, chsh, mermin

__all__ = [
    "BellFunctional",
    "BudgetError",
    "Observable",
    "ObservableSet",
    "QuantumState",
    "SeesawConfig",
    "ValidationError",
    "ViolationReport",
    "bell_operator",
    "builtin_functional",
    "chsh",
    "classical_value_exact",
    "classical_value_heuristic",
    "expectation",
    "make_traceless",
    "mermin",
    "seesaw",
]
