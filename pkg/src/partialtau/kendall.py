"""O(n log n) Kendall tau-a numerator.

Knight's algorithm: order the pairs by ``(a, b)``, count tied groups in ``a``
and jointly tied groups, then count strict inversions of ``b`` with a
bottom-up merge sort.  The numerator

    sum_{i<j} sgn(a_i - a_j) sgn(b_i - b_j)
        = n0 - n_a - n_b + n_ab - 2 * swaps

is accumulated in int64, exact for any n below ~4e9.
"""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _tied_pairs_sorted(v):
    total = 0
    run = 1
    for i in range(1, v.shape[0]):
        if v[i] == v[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@nb.njit(cache=True)
def _merge_count(b, buf):
    """Sort ``b`` in place (ascending) and return its strict inversions.

    ``buf`` is scratch space of the same length.
    """
    n = b.shape[0]
    swaps = 0
    width = 1
    src = b
    dst = buf
    in_buf = False
    while width < n:
        start = 0
        while start < n:
            mid = min(start + width, n)
            end = min(start + 2 * width, n)
            i = start
            j = mid
            k = start
            while i < mid and j < end:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < end:
                dst[k] = src[j]
                j += 1
                k += 1
            start += 2 * width
        src, dst = dst, src
        in_buf = not in_buf
        width *= 2
    if in_buf:
        b[:] = src
    return swaps


@nb.njit(cache=True)
def _numerator_presorted(a_sorted, b_by_a):
    """Numerator given ``a`` sorted and ``b`` permuted alongside it, with
    ties in ``a`` broken by ascending ``b``."""
    n = a_sorted.shape[0]
    n0 = n * (n - 1) // 2
    n_a = _tied_pairs_sorted(a_sorted)
    n_ab = 0
    run = 1
    for i in range(1, n):
        if a_sorted[i] == a_sorted[i - 1] and b_by_a[i] == b_by_a[i - 1]:
            run += 1
        else:
            n_ab += run * (run - 1) // 2
            run = 1
    n_ab += run * (run - 1) // 2
    work = b_by_a.copy()
    swaps = _merge_count(work, np.empty_like(work))
    n_b = _tied_pairs_sorted(work)
    return n0 - n_a - n_b + n_ab - 2 * swaps


@nb.njit(cache=True)
def _has_ties_sorted(v):
    for i in range(1, v.shape[0]):
        if v[i] == v[i - 1]:
            return True
    return False


@nb.njit(cache=True)
def _lex_order(a, b):
    order = np.argsort(a, kind="mergesort")
    if not _has_ties_sorted(a[order]):
        return order
    # lexicographic (a, b) order from two stable sorts
    o1 = np.argsort(b, kind="mergesort")
    o2 = np.argsort(a[o1], kind="mergesort")
    return o1[o2]


@nb.njit(cache=True)
def _numerator(a, b):
    order = _lex_order(a, b)
    return _numerator_presorted(a[order], b[order])


@nb.njit(cache=True)
def _rows_identical(A):
    for m in range(1, A.shape[0]):
        for i in range(A.shape[1]):
            if A[m, i] != A[0, i]:
                return False
    return True


@nb.njit(cache=True)
def _numerators_shared_a(a, B):
    """Numerators of ``a`` against every row of ``B``, sorting ``a`` once.

    Within each tie group of ``a`` the entries of a row of ``B`` are put in
    ascending order (insertion sort; groups are small) before counting.
    """
    M, n = B.shape
    order = np.argsort(a, kind="mergesort")
    a_s = a[order]
    starts = [0]
    for i in range(1, n):
        if a_s[i] != a_s[i - 1]:
            starts.append(i)
    starts.append(n)
    n_a = _tied_pairs_sorted(a_s)
    n0 = n * (n - 1) // 2
    work = np.empty(n)
    buf = np.empty(n)
    out = np.empty(M, dtype=np.int64)
    for m in range(M):
        row = B[m]
        for i in range(n):
            work[i] = row[order[i]]
        n_ab = 0
        if n_a > 0:
            for g in range(len(starts) - 1):
                s0 = starts[g]
                s1 = starts[g + 1]
                if s1 - s0 < 2:
                    continue
                for i in range(s0 + 1, s1):
                    v = work[i]
                    j = i - 1
                    while j >= s0 and work[j] > v:
                        work[j + 1] = work[j]
                        j -= 1
                    work[j + 1] = v
                run = 1
                for i in range(s0 + 1, s1):
                    if work[i] == work[i - 1]:
                        run += 1
                    else:
                        n_ab += run * (run - 1) // 2
                        run = 1
                n_ab += run * (run - 1) // 2
        swaps = _merge_count(work, buf)
        out[m] = n0 - n_a - _tied_pairs_sorted(work) + n_ab - 2 * swaps
    return out


@nb.njit(cache=True)
def _numerators_rows(A, B):
    """Numerators for each row pair of two ``M x n`` matrices."""
    M = A.shape[0]
    if M > 1 and _rows_identical(A):
        return _numerators_shared_a(A[0], B)
    out = np.empty(M, dtype=np.int64)
    for m in range(M):
        out[m] = _numerator(A[m], B[m])
    return out


def tau_numerator(a, b) -> int:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return int(_numerator(a, b))


def tau_numerators_columns(A, B) -> np.ndarray:
    """Numerators for each column pair of two ``n x M`` matrices."""
    At = np.ascontiguousarray(np.asarray(A, dtype=np.float64).T)
    Bt = np.ascontiguousarray(np.asarray(B, dtype=np.float64).T)
    if At.shape[0] > 1 and _rows_identical(Bt) and not _rows_identical(At):
        # tau is symmetric; put the constant side first
        At, Bt = Bt, At
    return _numerators_rows(At, Bt)
