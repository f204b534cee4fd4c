"""Pure-Python table-filling kernel.

This mirrors the compiled Cython kernel in exactscan._kernel and is selected
automatically when the extension is not built.  Both kernels fill one clique
table: for every admissible pair (subtree total n_i, separator counts x_C)
they sum, over all compositions of n_i into the clique's residual cells plus
one slot per child subtree, the multinomial weight of the composition times
the clique's indicator tests times the child-table values looked up at the
child separators.

Enumeration is lexicographic ascending (first coordinate major), identical in
both kernels so float results agree bit for bit.  The returned term count is
the number of innermost weighted terms, which the caller checks against the
closed-form prediction.

An exact big-rational variant (Fraction arithmetic) lives here only; it is an
audit tool for small totals and is never compiled.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, exp

BACKEND = "python"


def fill_clique_table(
    total,            # global multinomial total N
    log_fact,         # numpy float64[N+1]
    sep_size,         # |C_i|
    n_res,            # |R_i|
    n_children,
    coord_ctab,       # numpy float64[D, N+1]: v*log(mass ratio of coord t) - log(v!)
    child_dims,       # int sequence, per child: |C_j| + 1
    child_positions,  # per child: tuple of positions into the combined vector
    child_tables,     # per child: numpy float64 array in enumeration order
    test_positions,   # per indicator test: tuple of positions into combined
    test_bounds,      # per indicator test: strict integer upper bound on the sum
    binom,            # numpy int64[, ]: binomial coefficients
    only_total,       # compute just the entry with n_i == total (root clique)
    out,              # numpy float64 array of the right size, filled in place
):
    """Fill one clique table; returns the number of summation terms."""
    lf = log_fact.tolist()
    ctab = [row.tolist() for row in coord_ctab]
    bin_ = [row.tolist() for row in binom]
    tables = [t.tolist() for t in child_tables]
    n_tests = len(test_bounds)
    dim = n_res + n_children

    combined = [0] * (sep_size + n_res)
    values = []
    count = 0

    # entry odometer over (n_i, x_C): dimension sep_size+1, sum <= total
    y = [0] * (sep_size + 1)
    if only_total:
        if sep_size != 0:
            raise ValueError("only_total requires an empty separator")
        y[0] = total
    entries_done = False
    while not entries_done:
        n_i = y[0]
        for t in range(sep_size):
            combined[t] = y[t + 1]

        acc = 0.0
        lf_ni = lf[n_i]

        # composition odometer over u: dimension dim, sum == n_i
        u = [0] * dim
        u[dim - 1] = n_i
        ptotal = 0  # sum of u[0:dim-1]
        while True:
            for t in range(n_res):
                combined[sep_size + t] = u[t]
            count += 1

            ok = True
            for t in range(n_tests):
                s = 0
                for p in test_positions[t]:
                    s += combined[p]
                if s >= test_bounds[t]:
                    ok = False
                    break
            if ok:
                logw = lf_ni
                for t in range(dim):
                    logw += ctab[t][u[t]]
                w = exp(logw)
                for c in range(n_children):
                    v = u[n_res + c]
                    b = total
                    e = child_dims[c]
                    r = bin_[b + e][e] - bin_[b - v + e][e]
                    b -= v
                    e -= 1
                    for p in child_positions[c]:
                        v = combined[p]
                        r += bin_[b + e][e] - bin_[b - v + e][e]
                        b -= v
                        e -= 1
                    w *= tables[c][r]
                acc += w

            # advance composition: lex-ascending over u[0:dim-1], last coord is slack
            k = dim - 2
            suffix = 0
            while k >= 0:
                prefix_k = ptotal - suffix  # sum through position k, inclusive
                if prefix_k + 1 <= n_i:
                    u[k] += 1
                    for t in range(k + 1, dim - 1):
                        u[t] = 0
                    ptotal = prefix_k + 1
                    u[dim - 1] = n_i - ptotal
                    break
                suffix += u[k]
                k -= 1
            else:
                break

        values.append(acc)

        if only_total:
            entries_done = True
        else:
            # advance entry odometer: lex-ascending, sum <= total
            k = sep_size
            suffix = 0
            etotal = sum(y)
            while k >= 0:
                prefix_k = etotal - suffix
                if prefix_k + 1 <= total:
                    y[k] += 1
                    for t in range(k + 1, sep_size + 1):
                        y[t] = 0
                    break
                suffix += y[k]
                k -= 1
            else:
                entries_done = True

    out[: len(values)] = values
    return count


def fill_clique_table_exact(
    total,
    sep_size,
    n_res,
    n_children,
    coord_masses,     # per extended coordinate: Fraction mass (residual cell or child support)
    support_mass,     # Fraction: total mass of this clique's subtree support
    child_dims,
    child_positions,
    child_tables,     # per child: list of Fractions in enumeration order
    test_positions,
    test_bounds,
    binom,
    only_total,
):
    """Exact-rational twin of fill_clique_table; returns (values, count)."""
    bin_ = [row.tolist() for row in binom]
    n_tests = len(test_bounds)
    dim = n_res + n_children

    combined = [0] * (sep_size + n_res)
    values = []
    count = 0

    y = [0] * (sep_size + 1)
    if only_total:
        if sep_size != 0:
            raise ValueError("only_total requires an empty separator")
        y[0] = total
    entries_done = False
    while not entries_done:
        n_i = y[0]
        for t in range(sep_size):
            combined[t] = y[t + 1]

        acc = Fraction(0)
        denom = support_mass**n_i

        u = [0] * dim
        u[dim - 1] = n_i
        ptotal = 0
        while True:
            for t in range(n_res):
                combined[sep_size + t] = u[t]
            count += 1

            ok = True
            for t in range(n_tests):
                s = 0
                for p in test_positions[t]:
                    s += combined[p]
                if s >= test_bounds[t]:
                    ok = False
                    break
            if ok:
                coeff = 1
                rem = n_i
                w = Fraction(1)
                for t in range(dim):
                    coeff *= comb(rem, u[t])
                    rem -= u[t]
                    if u[t]:
                        w *= coord_masses[t] ** u[t]
                w = coeff * w / denom
                for c in range(n_children):
                    v = u[n_res + c]
                    b = total
                    e = child_dims[c]
                    r = bin_[b + e][e] - bin_[b - v + e][e]
                    b -= v
                    e -= 1
                    for p in child_positions[c]:
                        v = combined[p]
                        r += bin_[b + e][e] - bin_[b - v + e][e]
                        b -= v
                        e -= 1
                    w *= child_tables[c][r]
                acc += w

            k = dim - 2
            suffix = 0
            while k >= 0:
                prefix_k = ptotal - suffix
                if prefix_k + 1 <= n_i:
                    u[k] += 1
                    for t in range(k + 1, dim - 1):
                        u[t] = 0
                    ptotal = prefix_k + 1
                    u[dim - 1] = n_i - ptotal
                    break
                suffix += u[k]
                k -= 1
            else:
                break

        values.append(acc)

        if only_total:
            entries_done = True
        else:
            k = sep_size
            suffix = 0
            etotal = sum(y)
            while k >= 0:
                prefix_k = etotal - suffix
                if prefix_k + 1 <= total:
                    y[k] += 1
                    for t in range(k + 1, sep_size + 1):
                        y[t] = 0
                    break
                suffix += y[k]
                k -= 1
            else:
                entries_done = True

    return values, count
