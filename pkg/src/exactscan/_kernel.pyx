# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled table-filling kernel.

Mirrors exactscan._kernel_py.fill_clique_table term for term: the same
lex-ascending enumeration and the same accumulation order, so float results
agree with the pure kernel bit for bit.  See the pure module for the
algorithm description.
"""

from libc.math cimport exp
from libc.stdlib cimport free, malloc

import numpy as np

BACKEND = "compiled"


cdef long _fill(
    long total,
    double[::1] log_fact,
    long sep_size,
    long n_res,
    long n_children,
    double[:, ::1] ctab,
    long[::1] child_dims,
    long[::1] cpos_flat,
    long[::1] cpos_off,
    double[::1] tables_flat,
    long[::1] table_off,
    long[::1] tpos_flat,
    long[::1] tpos_off,
    long[::1] test_bounds,
    long[:, ::1] binom,
    bint only_total,
    double[::1] out,
) noexcept nogil:
    cdef long dim = n_res + n_children
    cdef long n_tests = test_bounds.shape[0]
    cdef long *y = <long *> malloc((sep_size + 1) * sizeof(long))
    cdef long *u = <long *> malloc(dim * sizeof(long))
    cdef long *combined = <long *> malloc((sep_size + n_res + 1) * sizeof(long))
    cdef long count = 0
    cdef long entry_idx = 0
    cdef long n_i, t, k, c, p, v, b, e, r, s
    cdef long ptotal, suffix, prefix_k, etotal
    cdef double acc, lf_ni, logw, w
    cdef bint entries_done = False, ok, advanced

    for t in range(sep_size + 1):
        y[t] = 0
    if only_total:
        y[0] = total

    while not entries_done:
        n_i = y[0]
        for t in range(sep_size):
            combined[t] = y[t + 1]

        acc = 0.0
        lf_ni = log_fact[n_i]

        for t in range(dim):
            u[t] = 0
        u[dim - 1] = n_i
        ptotal = 0
        while True:
            for t in range(n_res):
                combined[sep_size + t] = u[t]
            count += 1

            ok = True
            for t in range(n_tests):
                s = 0
                for p in range(tpos_off[t], tpos_off[t + 1]):
                    s += combined[tpos_flat[p]]
                if s >= test_bounds[t]:
                    ok = False
                    break
            if ok:
                logw = lf_ni
                for t in range(dim):
                    logw += ctab[t, u[t]]
                w = exp(logw)
                for c in range(n_children):
                    v = u[n_res + c]
                    b = total
                    e = child_dims[c]
                    r = binom[b + e, e] - binom[b - v + e, e]
                    b -= v
                    e -= 1
                    for p in range(cpos_off[c], cpos_off[c + 1]):
                        v = combined[cpos_flat[p]]
                        r += binom[b + e, e] - binom[b - v + e, e]
                        b -= v
                        e -= 1
                    w *= tables_flat[table_off[c] + r]
                acc += w

            # advance composition: lex-ascending over u[0:dim-1], last is slack
            advanced = False
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
                    advanced = True
                    break
                suffix += u[k]
                k -= 1
            if not advanced:
                break

        out[entry_idx] = acc
        entry_idx += 1

        if only_total:
            entries_done = True
        else:
            # advance entry odometer: lex-ascending, sum <= total
            etotal = 0
            for t in range(sep_size + 1):
                etotal += y[t]
            advanced = False
            k = sep_size
            suffix = 0
            while k >= 0:
                prefix_k = etotal - suffix
                if prefix_k + 1 <= total:
                    y[k] += 1
                    for t in range(k + 1, sep_size + 1):
                        y[t] = 0
                    advanced = True
                    break
                suffix += y[k]
                k -= 1
            if not advanced:
                entries_done = True

    free(y)
    free(u)
    free(combined)
    return count


def fill_clique_table(
    total,
    log_fact,
    sep_size,
    n_res,
    n_children,
    coord_ctab,
    child_dims,
    child_positions,
    child_tables,
    test_positions,
    test_bounds,
    binom,
    only_total,
    out,
):
    """Fill one clique table; returns the number of summation terms."""
    if only_total and sep_size != 0:
        raise ValueError("only_total requires an empty separator")

    cpos_flat: list = []
    cpos_off: list = [0]
    for cp in child_positions:
        cpos_flat.extend(cp)
        cpos_off.append(len(cpos_flat))
    tpos_flat: list = []
    tpos_off: list = [0]
    for tp in test_positions:
        tpos_flat.extend(tp)
        tpos_off.append(len(tpos_flat))

    table_off: list = [0]
    running = 0
    for tab in child_tables:
        running += len(tab)
        table_off.append(running)
    if child_tables:
        tables_flat = np.ascontiguousarray(np.concatenate(child_tables))
    else:
        tables_flat = np.empty(0, dtype=np.float64)

    return _fill(
        total,
        np.ascontiguousarray(log_fact, dtype=np.float64),
        sep_size,
        n_res,
        n_children,
        np.ascontiguousarray(coord_ctab, dtype=np.float64),
        np.ascontiguousarray(child_dims, dtype=np.int64),
        np.asarray(cpos_flat, dtype=np.int64),
        np.asarray(cpos_off, dtype=np.int64),
        tables_flat,
        np.asarray(table_off, dtype=np.int64),
        np.asarray(tpos_flat, dtype=np.int64),
        np.asarray(tpos_off, dtype=np.int64),
        np.ascontiguousarray(test_bounds, dtype=np.int64),
        np.ascontiguousarray(binom, dtype=np.int64),
        bool(only_total),
        out,
    )
