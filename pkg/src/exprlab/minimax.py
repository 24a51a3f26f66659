"""Discrete Chebyshev approximation on integer sample grids.

minimax_gap finds the polynomial of a given degree minimizing the maximum
absolute error over consecutive integer samples, via a small dense linear
program; scan_gap chains interval gaps into a certificate that no
piecewise polynomial with few pieces can evade.

The LP solver is a self-contained two-phase dense simplex with Bland's
rule.  Instances here have a couple dozen rows at most, so clarity and
zero dependencies win over speed.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

_PIVOT_TOL = 1e-11


class NoCertificateError(RuntimeError):
    """Raised when an interval's minimax gap vanishes: the scanned function
    is locally polynomial there and certifies nothing."""

    def __init__(self, interval, start, gap):
        self.interval = interval
        self.start = start
        self.gap = gap
        super().__init__("interval %d starting at %d has vanishing gap %.3e"
                         % (interval, start, gap))


@dataclass
class GapResult:
    gap: float
    best_poly: np.ndarray  # ascending coefficients, length degree + 1
    points: list


def gap_result_to_dict(res):
    return {"gap": res.gap,
            "best_poly": [float(a) for a in res.best_poly],
            "points": list(res.points)}


# ---------------------------------------------------------------------------
# dense simplex

def _pivot_at(T, basis, r, e):
    T[r] = T[r] / T[r, e]
    fac = T[:, e].copy()
    fac[r] = 0.0
    T -= np.outer(fac, T[r])
    basis[r] = e


def _run_simplex(T, basis, cost, allow):
    """Minimize cost over the tableau in place; entering columns are
    restricted to indices below `allow`.  Bland's rule on both the entering
    and the leaving choice guarantees termination."""
    m = T.shape[0]
    while True:
        y = cost[basis]
        reduced = cost[:allow] - T[:, :allow].T @ y
        candidates = np.flatnonzero(reduced < -_PIVOT_TOL)
        if candidates.size == 0:
            return float(y @ T[:, -1])
        e = int(candidates[0])
        col = T[:, e]
        pos = col > _PIVOT_TOL
        if not pos.any():
            raise RuntimeError("unbounded linear program")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = np.flatnonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))
        r = int(ties[np.argmin(basis[ties])])
        _pivot_at(T, basis, r, e)


def _simplex_min(c, A, b):
    """min c @ x subject to A @ x <= b, x >= 0.  Returns (x, value)."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    art_rows = np.flatnonzero(flip)
    n_art = art_rows.size
    width = n + m + n_art
    T = np.zeros((m, width + 1))
    T[:, :n] = A
    T[np.arange(m), n + np.arange(m)] = np.where(flip, -1.0, 1.0)
    T[art_rows, n + m + np.arange(n_art)] = 1.0
    T[:, -1] = b
    basis = n + np.arange(m)
    basis[art_rows] = n + m + np.arange(n_art)
    if n_art:
        cost1 = np.zeros(width)
        cost1[n + m:] = 1.0
        val = _run_simplex(T, basis, cost1, width)
        if val > 1e-8 * max(1.0, float(np.abs(b).max())):
            raise RuntimeError("infeasible linear program")
        for r in np.flatnonzero(basis >= n + m):
            cols = np.flatnonzero(np.abs(T[r, :n + m]) > _PIVOT_TOL)
            if cols.size:
                _pivot_at(T, basis, r, int(cols[0]))
            # else the row is redundant; the artificial stays basic at zero
            # and phase 2 never touches columns past n + m
    cost2 = np.zeros(width)
    cost2[:n] = c
    val = _run_simplex(T, basis, cost2, n + m)
    x = np.zeros(n)
    for r, col in enumerate(basis):
        if col < n:
            x[col] = T[r, -1]
    return x, val


# ---------------------------------------------------------------------------
# minimax fits

def minimax_gap(values, degree, start=0):
    """Best uniform polynomial fit on consecutive integer samples.

    Solves min_p max_i |p(y_i) - values_i| over polynomials of the given
    degree, with y_i = start + i, as the LP "minimize t subject to
    -t <= p(y_i) - values_i <= t".  The LP runs in the shifted basis
    y - start for conditioning and the winner is composed back; the
    reported gap is recomputed from the returned polynomial, so the
    GapResult invariant holds by construction.  The gap is zero exactly
    when the samples lie on a polynomial of the given degree.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    k_n = vals.size
    if k_n < degree + 2:
        raise ValueError("need at least degree + 2 = %d points, got %d"
                         % (degree + 2, k_n))
    n1 = degree + 1
    ys = np.arange(k_n, dtype=float)
    V = np.vander(ys, n1, increasing=True)
    ones = np.ones((k_n, 1))
    A = np.block([[V, -V, -ones], [-V, V, -ones]])
    b = np.concatenate([vals, -vals])
    cost = np.zeros(2 * n1 + 1)
    cost[-1] = 1.0
    x, _ = _simplex_min(cost, A, b)
    poly = Polynomial(x[:n1] - x[n1:2 * n1])
    if start:
        poly = poly(Polynomial([-float(start), 1.0]))
    coefs = np.zeros(n1)
    coefs[:poly.coef.size] = poly.coef
    points = [int(start) + i for i in range(k_n)]
    fitted = Polynomial(coefs)(np.array(points, dtype=float))
    gap = float(np.max(np.abs(fitted - vals)))
    return GapResult(gap=gap, best_poly=coefs, points=points)


def scan_gap(f, q, n, k_n=None):
    """Certified gap for q-piece degree-n piecewise polynomials on [0..T].

    Interval i (1-based) holds the k_n consecutive integers starting at
    T_{i-1}, with T_0 = 0 and T_i = (k_n - 1) i + 1.  A q-piece function on
    the integers has q - 1 transitions between consecutive points, and the
    intervals share at most endpoints, so some interval is served by a
    single polynomial and pays at least its Chebyshev gap there.  Returns
    (T_q, min over intervals); raises NoCertificateError when some
    interval's gap vanishes (relative floor 1e-9), e.g. for f itself a
    polynomial of degree <= n.

    k_n defaults to the minimum n + 2; the right interval length for a
    given f is not computable from samples alone, so it stays a caller
    choice.
    """
    if q < 1:
        raise ValueError("need at least one piece")
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if k_n is None:
        k_n = n + 2
    if k_n < n + 2:
        raise ValueError("k_n must be at least n + 2")
    ts = [0] + [(k_n - 1) * i + 1 for i in range(1, q + 1)]
    deltas = []
    for i in range(1, q + 1):
        s = ts[i - 1]
        vals = [float(f(y)) for y in range(s, s + k_n)]
        res = minimax_gap(vals, n, start=s)
        floor = 1e-9 * max(1.0, max(abs(v) for v in vals))
        if res.gap <= floor:
            raise NoCertificateError(i, s, res.gap)
        deltas.append(res.gap)
    return ts[q], min(deltas)
