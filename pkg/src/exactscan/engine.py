"""Recursive evaluation of conditional multinomial expectations on a clique tree.

Given cell counts X_1..X_n that are conditionally multinomial on their total
N, and per-clique indicator predicates, this module computes

    E[ prod_i chi_i(X_{B_i}) | N ]

by dynamic programming over a perfect clique sequence.  Each clique i owns a
table of conditional expectations indexed by (n_i, x_C): the probability-
weighted product of all predicates in the subtree rooted at clique i, given
that the subtree support holds n_i events and the separator cells hold x_C.
Tables are filled leaves-first; each parent consumes and frees its children,
and the final clique's single entry at n_m = N is the answer.

The number of innermost summation terms admits a closed form driven by
clique sizes and fan-ins, and the kernel's term counter is checked against
it after every full evaluation.  Work is proportional to N**degree where
`degree` is the cost exponent reported by summation_degree, so a budget
guard refuses infeasible runs up-front.

Two interchangeable kernels do the table filling: a compiled Cython
extension and a pure-Python twin, selected at import (see kernel_backend).
An exact big-rational mode is available for audits at small N.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, exp, lgamma, log
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernel_py
from .errors import BudgetExceededError, ConsistencyError, InputError
from .graph import CliqueTree, EliminationOrdering, verify_rip

try:
    from . import _kernel as _kernel_compiled
except ImportError:  # extension not built; pure fallback only
    _kernel_compiled = None

__all__ = [
    "CellModel",
    "SumTest",
    "CliquePredicate",
    "CliqueTable",
    "CostReport",
    "DEFAULT_BUDGET",
    "kernel_backend",
    "available_backends",
    "enumerate_compositions",
    "log_multinomial_pmf",
    "naive_summation_count",
    "predicted_summation_count",
    "summation_degree",
    "leaf_table",
    "internal_table",
    "evaluate_expectation",
]

DEFAULT_BUDGET = 1e10


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _kernel_compiled is not None else ("python",)


def kernel_backend() -> str:
    """Name of the kernel used by default ('compiled' or 'python')."""
    if os.environ.get("EXACTSCAN_PURE"):
        return "python"
    return "compiled" if _kernel_compiled is not None else "python"


def _kernel_module(backend: str | None):
    name = backend or kernel_backend()
    if name == "compiled":
        if _kernel_compiled is None:
            raise InputError("compiled kernel requested but the extension is not built")
        return _kernel_compiled
    if name == "python":
        return _kernel_py
    raise InputError(f"unknown kernel backend {name!r}")


# ---------------------------------------------------------------------------
# model


@dataclass
class CellModel:
    """Observed counts and baseline masses per cell, with derived quantities.

    probabilities[i] = baselines[i] / sum(baselines); total = sum(counts).
    Baselines must be strictly positive so every cell carries probability
    mass.
    """

    counts: tuple[int, ...]
    baselines: tuple[float, ...]
    probabilities: np.ndarray = field(init=False, repr=False)
    total: int = field(init=False)

    def __post_init__(self):
        self.counts = tuple(int(c) for c in self.counts)
        self.baselines = tuple(float(b) for b in self.baselines)
        if len(self.counts) != len(self.baselines):
            raise InputError("counts and baselines differ in length")
        if not self.counts:
            raise InputError("empty cell model")
        if any(c < 0 for c in self.counts):
            raise InputError("negative count")
        if any(b <= 0 for b in self.baselines):
            raise InputError("baselines must be strictly positive")
        lam = np.asarray(self.baselines, dtype=np.float64)
        self.probabilities = lam / lam.sum()
        assert abs(self.probabilities.sum() - 1.0) <= 1e-12
        self.total = sum(self.counts)

    @classmethod
    def with_uniform_baselines(cls, counts: Sequence[int]) -> "CellModel":
        return cls(tuple(counts), (1.0,) * len(tuple(counts)))

    @property
    def vertex_count(self) -> int:
        return len(self.counts)

    def reorder(self, ordering: EliminationOrdering) -> "CellModel":
        """Model in renumbered label space: new cell i = old cell ordering[i]."""
        if len(ordering) != self.vertex_count:
            raise InputError("ordering length does not match the model")
        return CellModel(
            tuple(self.counts[v - 1] for v in ordering.order),
            tuple(self.baselines[v - 1] for v in ordering.order),
        )

    def window_sum(self, window: Iterable[int]) -> int:
        return sum(self.counts[v - 1] for v in window)

    def window_share(self, window: Iterable[int]) -> float:
        lam = self.baselines
        return sum(lam[v - 1] for v in window) / sum(lam)


# ---------------------------------------------------------------------------
# predicates


@dataclass(frozen=True)
class SumTest:
    """Indicator test: sum of the member cells is strictly below `bound`."""

    members: tuple[int, ...]
    bound: int

    def __post_init__(self):
        if not self.members:
            raise InputError("sum test over no cells")


@dataclass(frozen=True)
class CliquePredicate:
    """Product of sum tests attached to one clique (all members inside it)."""

    clique_index: int
    tests: tuple[SumTest, ...]

    def always_true(self) -> bool:
        return not self.tests


# ---------------------------------------------------------------------------
# tables and cost accounting


def _log_factorials(n: int) -> np.ndarray:
    return np.array([lgamma(i + 1) for i in range(n + 1)], dtype=np.float64)


def _binom_table(max_n: int, max_k: int) -> np.ndarray:
    table = np.zeros((max_n + 1, max_k + 1), dtype=np.int64)
    for a in range(max_n + 1):
        for b in range(min(a, max_k) + 1):
            value = comb(a, b)
            if value >= 2**63:
                raise BudgetExceededError(value, float(2**63))
            table[a, b] = value
    return table


def _simplex_rank(vector: Sequence[int], budget: int) -> int:
    """Rank of a nonnegative vector with sum <= budget, lex-ascending order."""
    r = 0
    b = budget
    d = len(vector)
    for k, v in enumerate(vector):
        e = d - k
        r += comb(b + e, e) - comb(b - v + e, e)
        b -= v
    return r


@dataclass
class CliqueTable:
    """Conditional-expectation table for one clique.

    Entries are indexed by (subtree total, separator counts) over the simplex
    n_i + sum(x_C) <= total, stored in lex-ascending enumeration order.  A
    restricted table (the final clique) holds the single entry at the full
    total.  `term_count` is the number of summation terms spent filling it.
    """

    clique_index: int
    separator: tuple[int, ...]
    total: int
    values: np.ndarray | list
    restricted: bool = False
    term_count: int = 0

    def __len__(self) -> int:
        return len(self.values)

    def expected_entry_count(self) -> int:
        if self.restricted:
            return 1
        s = len(self.separator)
        return comb(self.total + s + 1, s + 1)

    def lookup(self, subtree_total: int, sep_counts: Sequence[int] = ()):
        if self.restricted:
            if subtree_total != self.total or tuple(sep_counts):
                raise InputError("restricted table holds only the full-total entry")
            return self.values[0]
        key = (subtree_total, *sep_counts)
        if len(key) != len(self.separator) + 1 or sum(key) > self.total or min(key) < 0:
            raise InputError(f"key {key} outside the table simplex")
        return self.values[_simplex_rank(key, self.total)]

    def entries(self):
        """Yield ((subtree_total, *separator_counts), value) in storage order."""
        if self.restricted:
            yield (self.total,), self.values[0]
            return
        dim = len(self.separator) + 1
        for idx, key in enumerate(enumerate_compositions(dim, self.total, "at-most")):
            yield key, self.values[idx]


@dataclass
class CostReport:
    """Summation-cost accounting for one evaluation."""

    predicted: int
    actual: int
    degree: int
    naive: int
    peak_table_entries: int = 0
    exact_value: Fraction | None = None


# ---------------------------------------------------------------------------
# counting utilities


def enumerate_compositions(dimension: int, total: int, mode: str = "exact"):
    """Yield nonnegative integer vectors of the given dimension, lex ascending.

    mode 'exact' yields vectors summing to `total` (count C(total+d-1, d-1));
    mode 'at-most' yields vectors with sum <= total (count C(total+d, d)).
    """
    if dimension < 1:
        raise InputError("dimension must be >= 1")
    if total < 0:
        raise InputError("total must be >= 0")
    if mode not in ("exact", "at-most"):
        raise InputError(f"unknown mode {mode!r}")

    if mode == "at-most":
        y = [0] * dimension
        while True:
            yield tuple(y)
            etotal = sum(y)
            suffix = 0
            for k in range(dimension - 1, -1, -1):
                if etotal - suffix + 1 <= total:
                    y[k] += 1
                    for t in range(k + 1, dimension):
                        y[t] = 0
                    break
                suffix += y[k]
            else:
                return
    else:
        if dimension == 1:
            yield (total,)
            return
        for head in enumerate_compositions(dimension - 1, total, "at-most"):
            yield head + (total - sum(head),)


def log_multinomial_pmf(counts: Sequence[int], probabilities: Sequence[float]) -> float:
    """Log-probability of `counts` under Mult(sum(counts); probabilities).

    Zero probability paired with a positive count yields -inf (weight zero).
    """
    counts = tuple(int(c) for c in counts)
    probabilities = tuple(float(p) for p in probabilities)
    if len(counts) != len(probabilities):
        raise InputError("counts and probabilities differ in length")
    if any(c < 0 for c in counts):
        raise InputError("negative count")
    if abs(sum(probabilities) - 1.0) > 1e-12:
        raise InputError("probabilities do not sum to 1")
    n = sum(counts)
    lf = _log_factorials(n)
    out = lf[n]
    for c, p in zip(counts, probabilities):
        if c:
            if p <= 0.0:
                return float("-inf")
            out += c * log(p) - lf[c]
    return float(out)


def naive_summation_count(vertex_count: int, total: int) -> int:
    """Terms needed to evaluate the expectation by full enumeration."""
    if vertex_count < 1 or total < 0:
        raise InputError("need vertex_count >= 1 and total >= 0")
    return comb(total + vertex_count - 1, vertex_count - 1)


def predicted_summation_count(tree: CliqueTree, total: int) -> int:
    """Closed-form term count for one evaluation over this clique tree."""
    m = tree.size
    out = 0
    for i in range(1, m + 1):
        d = len(tree.cliques[i - 1]) + tree.fan_in(i)
        if i == m:
            d -= 1
        out += comb(total + d, d)
    return out


def summation_degree(tree: CliqueTree) -> int:
    """Cost exponent: the evaluation costs O(total**degree) terms."""
    m = tree.size
    degrees = []
    for i in range(1, m + 1):
        d = len(tree.cliques[i - 1]) + tree.fan_in(i)
        if i == m:
            d -= 1
        degrees.append(d)
    return max(degrees)


# ---------------------------------------------------------------------------
# table filling


def _combined_layout(tree: CliqueTree, i: int) -> tuple[list[int], dict[int, int]]:
    sep = sorted(tree.separators[i - 1]) if i < tree.size else []
    res = sorted(tree.residuals[i - 1])
    layout = sep + res
    return layout, {v: pos for pos, v in enumerate(layout)}


def _mass_arrays(model: CellModel, tree: CliqueTree, i: int):
    """Log mass ratios for the extended coordinates of clique i.

    Residual cells come first (sorted), then one coordinate per child
    subtree (children in ascending clique order); all masses are divided by
    the mass of this clique's subtree support.
    """
    p = model.probabilities
    res = sorted(tree.residuals[i - 1])
    children = tree.children(i)
    support_mass = sum(p[v - 1] for v in tree.supports[i - 1])
    if support_mass <= 0.0:
        raise ConsistencyError(f"zero probability mass on the support of clique {i}")
    logs = [log(p[v - 1] / support_mass) for v in res]
    logs += [
        log(sum(p[v - 1] for v in tree.supports[j - 1]) / support_mass) for j in children
    ]
    return np.asarray(logs, dtype=np.float64), res, children


def _coord_ctab(logmass: np.ndarray, log_fact: np.ndarray) -> np.ndarray:
    v = np.arange(len(log_fact), dtype=np.float64)
    return np.ascontiguousarray(v[None, :] * logmass[:, None] - log_fact[None, :])


def _prepare_tests(predicate: CliquePredicate | None, position: Mapping[int, int], i: int, total: int):
    test_positions: list[tuple[int, ...]] = []
    test_bounds: list[int] = []
    if predicate is not None:
        if predicate.clique_index != i:
            raise ConsistencyError(
                f"predicate for clique {predicate.clique_index} given to clique {i}"
            )
        for test in predicate.tests:
            if test.bound > total:
                continue  # cannot fail: cell sums never exceed the total
            try:
                test_positions.append(tuple(position[v] for v in test.members))
            except KeyError as e:
                raise ConsistencyError(
                    f"test cell {e.args[0]} is not a member of clique {i}"
                ) from None
            test_bounds.append(int(test.bound))
    return test_positions, test_bounds


def _fill_table(
    tree: CliqueTree,
    model: CellModel,
    i: int,
    predicate: CliquePredicate | None,
    child_tables: Mapping[int, CliqueTable],
    backend: str | None,
    log_fact: np.ndarray,
    binom: np.ndarray,
) -> CliqueTable:
    total = model.total
    only_total = i == tree.size
    sep = sorted(tree.separators[i - 1]) if not only_total else []
    layout, position = _combined_layout(tree, i)
    logmass, res, children = _mass_arrays(model, tree, i)
    if not res and not children:
        raise ConsistencyError(f"clique {i} has an empty residual and no children")

    child_dims = []
    child_positions = []
    tables = []
    for j in children:
        if j not in child_tables:
            raise ConsistencyError(f"child table {j} of clique {i} not yet computed")
        child_sep = sorted(tree.separators[j - 1])
        if not set(child_sep) <= set(layout):
            raise ConsistencyError(
                f"separator of child clique {j} is not contained in clique {i}"
            )
        child_dims.append(len(child_sep) + 1)
        child_positions.append(tuple(position[v] for v in child_sep))
        tables.append(np.asarray(child_tables[j].values, dtype=np.float64))

    test_positions, test_bounds = _prepare_tests(predicate, position, i, total)

    n_entries = 1 if only_total else comb(total + len(sep) + 1, len(sep) + 1)
    out = np.empty(n_entries, dtype=np.float64)
    kernel = _kernel_module(backend)
    count = kernel.fill_clique_table(
        total,
        log_fact,
        len(sep),
        len(res),
        len(children),
        _coord_ctab(logmass, log_fact),
        np.asarray(child_dims, dtype=np.int64),
        child_positions,
        tables,
        test_positions,
        np.asarray(test_bounds, dtype=np.int64),
        binom,
        only_total,
        out,
    )
    return CliqueTable(
        clique_index=i,
        separator=tuple(sep),
        total=total,
        values=out,
        restricted=only_total,
        term_count=int(count),
    )


def _fill_table_exact(
    tree: CliqueTree,
    model: CellModel,
    i: int,
    predicate: CliquePredicate | None,
    child_tables: Mapping[int, CliqueTable],
    binom: np.ndarray,
) -> CliqueTable:
    total = model.total
    only_total = i == tree.size
    sep = sorted(tree.separators[i - 1]) if not only_total else []
    layout, position = _combined_layout(tree, i)
    res = sorted(tree.residuals[i - 1])
    children = tree.children(i)
    if not res and not children:
        raise ConsistencyError(f"clique {i} has an empty residual and no children")

    lam = [Fraction(b) for b in model.baselines]
    masses = [lam[v - 1] for v in res]
    masses += [sum(lam[v - 1] for v in tree.supports[j - 1]) for j in children]
    support_mass = sum(lam[v - 1] for v in tree.supports[i - 1])

    child_dims = []
    child_positions = []
    tables = []
    for j in children:
        if j not in child_tables:
            raise ConsistencyError(f"child table {j} of clique {i} not yet computed")
        child_sep = sorted(tree.separators[j - 1])
        child_dims.append(len(child_sep) + 1)
        child_positions.append(tuple(position[v] for v in child_sep))
        tables.append(child_tables[j].values)

    test_positions, test_bounds = _prepare_tests(predicate, position, i, total)

    values, count = _kernel_py.fill_clique_table_exact(
        total,
        len(sep),
        len(res),
        len(children),
        masses,
        support_mass,
        child_dims,
        child_positions,
        tables,
        test_positions,
        test_bounds,
        binom,
        only_total,
    )
    return CliqueTable(
        clique_index=i,
        separator=tuple(sep),
        total=total,
        values=values,
        restricted=only_total,
        term_count=int(count),
    )


def _max_key_dim(tree: CliqueTree) -> int:
    return max(len(s) for s in tree.separators) + 1


def leaf_table(
    i: int,
    tree: CliqueTree,
    model: CellModel,
    predicate: CliquePredicate | None = None,
    *,
    backend: str | None = None,
) -> CliqueTable:
    """Table for a childless clique (model given in tree label space)."""
    if tree.children(i):
        raise ConsistencyError(f"clique {i} has children; use internal_table")
    if not tree.residuals[i - 1]:
        raise ConsistencyError(f"clique {i} carries no probability mass (empty residual)")
    log_fact = _log_factorials(model.total)
    binom = _binom_table(model.total + _max_key_dim(tree), _max_key_dim(tree))
    return _fill_table(tree, model, i, predicate, {}, backend, log_fact, binom)


def internal_table(
    i: int,
    tree: CliqueTree,
    model: CellModel,
    predicate: CliquePredicate | None,
    child_tables: Mapping[int, CliqueTable],
    *,
    backend: str | None = None,
) -> CliqueTable:
    """Table for a clique with children, consuming their finished tables."""
    if not tree.children(i):
        raise ConsistencyError(f"clique {i} has no children; use leaf_table")
    log_fact = _log_factorials(model.total)
    binom = _binom_table(model.total + _max_key_dim(tree), _max_key_dim(tree))
    return _fill_table(tree, model, i, predicate, child_tables, backend, log_fact, binom)


def evaluate_expectation(
    tree: CliqueTree,
    model: CellModel,
    predicates: Sequence[CliquePredicate] = (),
    *,
    backend: str | None = None,
    arithmetic: str = "float",
    budget: float | None = DEFAULT_BUDGET,
    force: bool = False,
) -> tuple[float, CostReport]:
    """Expectation of the product of all clique predicates, given the total.

    The model must be in the tree's label space (reorder it first when the
    tree was built with a renumbering).  Tables are computed in clique order;
    each child table is freed as soon as its parent has consumed it, and the
    peak number of live table entries is reported.  Returns the expectation
    and a cost report whose actual term count provably equals the closed-form
    prediction.
    """
    if model.vertex_count != tree.vertex_count:
        raise InputError(
            f"model has {model.vertex_count} cells but the tree covers "
            f"{tree.vertex_count} vertices"
        )
    if not verify_rip(tree):
        raise ConsistencyError("clique sequence fails the running intersection property")
    if arithmetic not in ("float", "exact"):
        raise InputError(f"unknown arithmetic mode {arithmetic!r}")

    predicted = predicted_summation_count(tree, model.total)
    if budget is not None and predicted > budget and not force:
        raise BudgetExceededError(predicted, budget)

    by_clique: dict[int, list[SumTest]] = {}
    for pred in predicates:
        if not 1 <= pred.clique_index <= tree.size:
            raise InputError(f"predicate clique index {pred.clique_index} out of range")
        by_clique.setdefault(pred.clique_index, []).extend(pred.tests)

    log_fact = _log_factorials(model.total)
    binom = _binom_table(model.total + _max_key_dim(tree), _max_key_dim(tree))

    live: dict[int, CliqueTable] = {}
    live_entries = 0
    peak = 0
    actual = 0
    for i in range(1, tree.size + 1):
        pred = CliquePredicate(i, tuple(by_clique.get(i, ())))
        children = tree.children(i)
        if arithmetic == "exact":
            table = _fill_table_exact(tree, model, i, pred, live, binom)
        else:
            table = _fill_table(tree, model, i, pred, live, backend, log_fact, binom)
        actual += table.term_count
        live[i] = table
        live_entries += len(table)
        peak = max(peak, live_entries)
        for j in children:  # parent consumed; release child tables
            live_entries -= len(live[j])
            del live[j]

    root = live[tree.size]
    exact_value = None
    if arithmetic == "exact":
        exact_value = root.values[0]
        value = float(exact_value)
    else:
        value = float(root.values[0])

    if actual != predicted:
        raise ConsistencyError(
            f"summand counter {actual} disagrees with prediction {predicted}"
        )
    report = CostReport(
        predicted=predicted,
        actual=actual,
        degree=summation_degree(tree),
        naive=naive_summation_count(tree.vertex_count, model.total),
        peak_table_entries=peak,
        exact_value=exact_value,
    )
    return value, report
