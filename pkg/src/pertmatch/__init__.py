"""Online bipartite matching with perturbation functions: algorithms,
adversarial instances, exact optima and numerical bound checks."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ADWORDS, BUDGET_ADDITIVE, VERTEX_WEIGHTED, Allocation, EdgeBlock, Instance, OfflineBlock, OnlineBlock,
    PerturbationFunction, RunReport, Trace, load_function, load_instance, save_instance,
)
from .errors import (  # noqa: E402
    ArgumentError, CapacityError, DegenerateError, DomainError, FormatError, InconclusiveError, ModeError,
    PertMatchError,
)

__all__ = [
    "__version__", "ADWORDS", "BUDGET_ADDITIVE", "VERTEX_WEIGHTED", "Allocation", "EdgeBlock", "Instance",
    "OfflineBlock", "OnlineBlock", "PerturbationFunction", "RunReport", "Trace", "load_function",
    "load_instance", "save_instance", "ArgumentError", "CapacityError", "DegenerateError", "DomainError",
    "FormatError", "InconclusiveError", "ModeError", "PertMatchError",
]
