"""Independent ground-truth implementations for audits and property tests.

Two deliberately engine-free routes to the same quantities:

* brute_force_expectation enumerates every outcome of the conditional
  multinomial and applies the window indicators directly to each outcome's
  statistic values (no clique tree, no integer-threshold reduction, scipy's
  multinomial pmf, exact fsum accumulation of chunk sums);

* monte_carlo_pvalue estimates the p-value by simulation, sampling the
  multinomial through sequential binomial conditionals from a seeded PCG64
  generator so runs are reproducible across platforms.
"""

from __future__ import annotations

from itertools import islice
from math import comb, fsum, sqrt

import numpy as np
from scipy.stats import multinomial

from .engine import CellModel, enumerate_compositions
from .errors import BudgetExceededError, InputError
from .scan import kulldorff_statistic
from .windows import WindowFamily

__all__ = ["brute_force_expectation", "monte_carlo_pvalue", "SAMPLER_VERSION"]

# bump when the sampling algorithm changes; recorded in audit reports
SAMPLER_VERSION = "pcg64-sequential-binomial-1"

_CHUNK = 1 << 14


def _statistic_tables(model: CellModel, windows: WindowFamily) -> np.ndarray:
    """Per-window lookup: statistic value as a function of the window sum."""
    n_obs = model.total + 1
    out = np.empty((len(windows), n_obs))
    for j, w in enumerate(windows):
        share = model.window_share(w)
        if share >= 1.0:
            out[j, :] = 0.0
            continue
        out[j, :] = [kulldorff_statistic(o, model.total, share) for o in range(n_obs)]
    return out


def _membership(model: CellModel, windows: WindowFamily) -> np.ndarray:
    mat = np.zeros((model.vertex_count, len(windows)))
    for j, w in enumerate(windows):
        for v in w:
            mat[v - 1, j] = 1.0
    return mat


def brute_force_expectation(
    model: CellModel,
    windows: WindowFamily,
    threshold: float,
    *,
    ties: str = "extreme",
    max_terms: int = 1_000_000,
) -> float:
    """E[ prod_Z 1{stat_Z below threshold} | N ] by full enumeration.

    'below' is strict for ties='extreme' (matching the scan module's p-value
    convention) and non-strict for ties='excluded'.  Refuses to enumerate
    more than max_terms outcomes.
    """
    if ties not in ("extreme", "excluded"):
        raise InputError(f"unknown tie convention {ties!r}")
    n = model.vertex_count
    total = model.total
    n_terms = comb(total + n - 1, n - 1)
    if n_terms > max_terms:
        raise BudgetExceededError(n_terms, max_terms)

    stat_tab = _statistic_tables(model, windows)
    member = _membership(model, windows)
    dist = multinomial(total, model.probabilities)

    gen = enumerate_compositions(n, total, "exact")
    chunk_sums: list[float] = []
    while True:
        block = list(islice(gen, _CHUNK))
        if not block:
            break
        x = np.asarray(block, dtype=np.int64)
        pmf = dist.pmf(x) if len(x) > 1 else np.atleast_1d(dist.pmf(x[0]))
        sums = x @ member.astype(np.int64)  # window sums per outcome
        stats = stat_tab[np.arange(stat_tab.shape[0])[None, :], sums]
        below = stats < threshold if ties == "extreme" else stats <= threshold
        keep = below.all(axis=1)
        chunk_sums.append(float(np.sum(pmf * keep)))
    return fsum(chunk_sums)


def _sample_multinomial(rng: np.random.Generator, total: int, p: np.ndarray, size: int) -> np.ndarray:
    """Sequential binomial conditionals; one row per replicate."""
    n = len(p)
    out = np.zeros((size, n), dtype=np.int64)
    remaining = np.full(size, total, dtype=np.int64)
    mass_left = 1.0
    for i in range(n - 1):
        q = min(1.0, max(0.0, p[i] / mass_left))
        out[:, i] = rng.binomial(remaining, q)
        remaining -= out[:, i]
        mass_left -= p[i]
    out[:, n - 1] = remaining
    return out


def monte_carlo_pvalue(
    model: CellModel,
    windows: WindowFamily,
    threshold: float,
    replicates: int,
    seed: int,
    *,
    ties: str = "extreme",
) -> tuple[float, float]:
    """Fraction of simulated outcomes whose maximum statistic is extreme.

    Returns (estimate, binomial standard error).  ties='extreme' counts
    outcomes hitting the threshold exactly, matching exact_pvalue.
    """
    if replicates < 1:
        raise InputError("replicates must be >= 1")
    if ties not in ("extreme", "excluded"):
        raise InputError(f"unknown tie convention {ties!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    stat_tab = _statistic_tables(model, windows)
    member = _membership(model, windows).astype(np.int64)

    hits = 0
    done = 0
    while done < replicates:
        size = min(_CHUNK * 4, replicates - done)
        x = _sample_multinomial(rng, model.total, model.probabilities, size)
        sums = x @ member
        stats = stat_tab[np.arange(stat_tab.shape[0])[None, :], sums]
        max_stat = stats.max(axis=1)
        extreme = max_stat >= threshold if ties == "extreme" else max_stat > threshold
        hits += int(extreme.sum())
        done += size
    est = hits / replicates
    return est, sqrt(est * (1.0 - est) / replicates)
