"""Exact multiplicity-adjusted p-values for temporal and spatial scan statistics.

Given per-cell event counts that are conditionally multinomial on their
total, the distribution of the maximum scan statistic over a family of
candidate windows is evaluated exactly: the window family induces an
intersection graph, a chordal extension of it yields a clique tree, and the
conditional expectation of the product of per-window indicators factorizes
into a leaves-to-root recursion whose cost is polynomial in the total count
instead of exponential in the number of cells.

The hot table-filling loop runs in a compiled Cython kernel when available
and in a pure-Python twin otherwise; see exactscan.engine.kernel_backend().
"""

from .engine import (
    CellModel,
    CliquePredicate,
    CostReport,
    SumTest,
    evaluate_expectation,
    kernel_backend,
)
from .errors import AuditFailure, BudgetExceededError, ConsistencyError, InputError
from .graph import (
    ChordalExtension,
    CliqueTree,
    EliminationOrdering,
    UndirectedGraph,
    build_clique_tree,
)
from .scan import (
    ScanReport,
    WindowStatistic,
    exact_pvalue,
    grouped_pvalue,
    kulldorff_statistic,
    scan_all_windows,
    stepdown_pvalues,
)
from .windows import Adjacency, WindowFamily, partition_windows, spatial_windows, temporal_windows

__version__ = "0.1.0"

__all__ = [
    "Adjacency",
    "AuditFailure",
    "BudgetExceededError",
    "CellModel",
    "ChordalExtension",
    "CliquePredicate",
    "CliqueTree",
    "ConsistencyError",
    "CostReport",
    "EliminationOrdering",
    "InputError",
    "ScanReport",
    "SumTest",
    "UndirectedGraph",
    "WindowFamily",
    "WindowStatistic",
    "build_clique_tree",
    "evaluate_expectation",
    "exact_pvalue",
    "grouped_pvalue",
    "kernel_backend",
    "kulldorff_statistic",
    "partition_windows",
    "scan_all_windows",
    "spatial_windows",
    "stepdown_pvalues",
    "temporal_windows",
    "__version__",
]
