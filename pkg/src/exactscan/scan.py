"""Kulldorff likelihood-ratio scan statistic and exact adjusted p-values.

The per-window statistic compares the window's share of observed events
against its share of baseline mass; it is the conditional Poisson LRT, equals
N times the Kullback-Leibler divergence between the observed and expected
binomial splits, and is zero when the window is not in excess.  Because it
depends on the data only through the window's count sum, every threshold on
the statistic reduces to an integer threshold on that sum, and the exact
distribution of the maximum over all windows is a product of sum tests that
the clique-tree engine evaluates.

The multiplicity-adjusted p-value of a threshold c is

    1 - E[ prod_Z 1{ stat_Z < c } | N ]  =  P( max_Z stat_Z >= c | N ),

so outcomes tying the threshold count as extreme (the conservative exact-test
convention).  Passing ties='excluded' flips the inner comparison to <=,
giving P(max > c).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import engine
from .engine import CellModel, CliquePredicate, CostReport, SumTest
from .errors import InputError
from .graph import CliqueTree, assign_windows, build_clique_tree
from .windows import WindowFamily

__all__ = [
    "WindowStatistic",
    "ScanReport",
    "kulldorff_statistic",
    "critical_sum",
    "scan_all_windows",
    "exact_pvalue",
    "stepdown_pvalues",
    "grouped_pvalue",
]


@dataclass(frozen=True)
class WindowStatistic:
    """One window's observed sum, expected share, and statistic value."""

    window: tuple[int, ...]
    observed_sum: int
    expected_share: float
    value: float
    note: str | None = None


@dataclass
class ScanReport:
    """Ranked statistics plus the exact p-values computed from them."""

    statistics: list[WindowStatistic]
    threshold: float
    p_value: float
    cost: CostReport
    ties: str = "extreme"
    stepdown: list[tuple[float, tuple[int, ...], float]] = field(default_factory=list)
    group_p_values: list[float] | None = None
    p_value_bonferroni: float | None = None


def kulldorff_statistic(observed_sum: int, total: int, expected_share: float) -> float:
    """Poisson LRT scan statistic for a window.

    With phat = observed_sum/total and p the window's baseline share:
    total * KL(Bernoulli(phat) || Bernoulli(p)) when phat >= p, else 0.
    The 0*log(0) limits at phat in {0, 1} are taken as 0.
    """
    if total < 1:
        raise InputError("total must be >= 1")
    if not 0 <= observed_sum <= total:
        raise InputError(f"observed sum {observed_sum} outside 0..{total}")
    p = expected_share
    if not 0.0 < p < 1.0:
        raise InputError(f"expected share {p} outside the open interval (0, 1)")
    phat = observed_sum / total
    if phat <= p:
        return 0.0
    r = phat / p
    s = (1.0 - phat) / (1.0 - p)
    term_r = r * math.log(r) - r + 1.0
    term_s = s * math.log(s) - s + 1.0 if s > 0.0 else 1.0
    return total * (p * term_r + (1.0 - p) * term_s)


def critical_sum(threshold: float, total: int, expected_share: float, ties: str = "extreme") -> int:
    """Smallest window sum whose statistic reaches the threshold.

    Returns total+1 when no attainable sum reaches it.  The returned value t
    makes {statistic meets threshold} == {window sum >= t}, so the engine
    test 'sum < t' is the complement.  ties='extreme' means 'reaches' is >=
    (ties count as extreme); 'excluded' means strict >.
    """
    if ties not in ("extreme", "excluded"):
        raise InputError(f"unknown tie convention {ties!r}")
    for o in range(total + 1):
        stat = kulldorff_statistic(o, total, expected_share)
        reached = stat >= threshold if ties == "extreme" else stat > threshold
        if reached:
            return o
    return total + 1


def scan_all_windows(model: CellModel, windows: WindowFamily) -> list[WindowStatistic]:
    """Statistic for every window, ranked descending (ties by member list)."""
    out = []
    for w in windows:
        obs = model.window_sum(w)
        share = model.window_share(w)
        if share >= 1.0:
            warnings.warn(
                f"window {w} carries the entire baseline mass; its statistic is 0"
            )
            out.append(WindowStatistic(w, obs, share, 0.0, note="degenerate: share = 1"))
            continue
        out.append(WindowStatistic(w, obs, share, kulldorff_statistic(obs, model.total, share)))
    out.sort(key=lambda ws: (-ws.value, ws.window))
    return out


def _window_predicates(
    model: CellModel,
    windows: WindowFamily,
    tree: CliqueTree,
    threshold: float,
    ties: str,
) -> list[CliquePredicate]:
    window_map = tree.window_map
    if window_map is None:
        window_map = assign_windows(tree, windows)
    tests: dict[int, list[SumTest]] = {}
    for j, w in enumerate(windows):
        share = model.window_share(w)
        if share >= 1.0:
            continue  # statistic is identically 0; never exceeds a positive threshold
        bound = critical_sum(threshold, model.total, share, ties)
        if bound > model.total:
            continue  # unattainable: the test is always true
        members = (
            tuple(sorted(tree.ordering.renumber_set(w)))
            if tree.ordering is not None
            else tuple(w)
        )
        tests.setdefault(window_map[j], []).append(SumTest(members, bound))
    return [CliquePredicate(i, tuple(ts)) for i, ts in sorted(tests.items())]


def exact_pvalue(
    model: CellModel,
    windows: WindowFamily,
    tree: CliqueTree,
    threshold: float,
    *,
    ties: str = "extreme",
    backend: str | None = None,
    arithmetic: str = "float",
    budget: float | None = engine.DEFAULT_BUDGET,
    force: bool = False,
) -> tuple[float, CostReport]:
    """Exact multiplicity-adjusted p-value of a threshold on the maximum.

    Evaluates P(max over all windows >= threshold | total) via the clique
    tree; with threshold equal to the observed maximum this is the adjusted
    p-value of the most significant window.
    """
    if threshold < 0:
        raise InputError("threshold must be >= 0")
    predicates = _window_predicates(model, windows, tree, threshold, ties)
    tree_model = model.reorder(tree.ordering) if tree.ordering is not None else model
    value, cost = engine.evaluate_expectation(
        tree,
        tree_model,
        predicates,
        backend=backend,
        arithmetic=arithmetic,
        budget=budget,
        force=force,
    )
    return min(1.0, max(0.0, 1.0 - value)), cost


def stepdown_pvalues(
    model: CellModel,
    windows: WindowFamily,
    tree: CliqueTree,
    top_k: int,
    *,
    ties: str = "extreme",
    backend: str | None = None,
    budget: float | None = engine.DEFAULT_BUDGET,
    force: bool = False,
    threads: int = 1,
) -> list[tuple[float, tuple[int, ...], float]]:
    """Exact p-value at each of the top-k observed statistics as thresholds.

    Returns (statistic, window, p_value) rows in rank order; p-values are
    non-decreasing down the list.  Distinct thresholds are independent engine
    runs and may be evaluated concurrently.
    """
    if top_k < 1:
        raise InputError("top_k must be >= 1")
    ranked = scan_all_windows(model, windows)[:top_k]
    thresholds = sorted({ws.value for ws in ranked}, reverse=True)

    def run(c: float) -> float:
        return exact_pvalue(
            model, windows, tree, c, ties=ties, backend=backend, budget=budget, force=force
        )[0]

    if threads > 1 and len(thresholds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pv = dict(zip(thresholds, pool.map(run, thresholds)))
    else:
        pv = {c: run(c) for c in thresholds}
    return [(ws.value, ws.window, pv[ws.value]) for ws in ranked]


def grouped_pvalue(
    model: CellModel,
    window_groups: list[WindowFamily],
    threshold: float,
    *,
    ties: str = "extreme",
    backend: str | None = None,
    budget: float | None = engine.DEFAULT_BUDGET,
    force: bool = False,
) -> tuple[float, list[float]]:
    """Conservative p-value by summing exact group p-values (union bound).

    Each group gets its own graph and clique tree over the full cell set;
    cells outside the group's windows stay in the model as isolated vertices
    so they keep their probability mass.
    """
    if not window_groups:
        raise InputError("no window groups given")
    per_group = []
    for fam in window_groups:
        tree = build_clique_tree(fam, model.vertex_count)
        p, _ = exact_pvalue(
            model, fam, tree, threshold, ties=ties, backend=backend, budget=budget, force=force
        )
        per_group.append(p)
    return min(1.0, sum(per_group)), per_group
