"""Piece counting for models whose parts are piecewise polynomial.

piece_bound gives the a-priori bound ((d+1)^l)^m on how many polynomial
pieces a vertex output can have as a function of a single family
parameter; detect_pieces estimates the realized count from integer
samples by scanning finite differences for kinks.
"""

from dataclasses import dataclass

import numpy as np

_UPA_KINDS = ("sum", "mean", "max", "upa")


def piece_bound(gnn):
    """((d+1)^l)^m with l the deepest net, d the widest dense fan-in and m
    the layer count.  Every aggregation must itself be piecewise
    polynomial in the neighborhood parameter, which all supported kinds
    are."""
    for li, layer in enumerate(gnn.layers):
        for agg in layer.aggs:
            if agg.kind not in _UPA_KINDS:
                raise ValueError("layer %d aggregation %r has no piece bound"
                                 % (li, agg.kind))
    l = max(layer.fnn.depth for layer in gnn.layers)
    d = max(fl.w.shape[1] for layer in gnn.layers for fl in layer.fnn.layers)
    m = gnn.n_layers
    return ((d + 1) ** l) ** m


@dataclass
class PieceReport:
    bound: int
    detected_pieces: int
    max_degree_used: int
    sample_range: tuple

    def __post_init__(self):
        if self.detected_pieces < 1:
            raise ValueError("piece count must be positive")


def piece_report_to_dict(rep):
    return {"bound": rep.bound,
            "detected_pieces": rep.detected_pieces,
            "max_degree_used": rep.max_degree_used,
            "sample_range": list(rep.sample_range)}


def detect_pieces(samples, max_degree, bound=None):
    """Greedy piece count from samples {k: value} on consecutive integers.

    A window of max_degree + 2 consecutive samples whose
    (max_degree + 1)-th finite difference exceeds a magnitude-scaled
    tolerance (relative 1e-6) starts a new piece at the window's last
    sample.  Kinks closer together than one window merge, and the reported
    boundary can sit up to a window late, so this counts pieces rather
    than locating them.  max_degree_used is the largest degree any piece
    actually needed.  The bound field is caller-supplied context (see
    piece_bound) and is not computed here.
    """
    ks = sorted(samples)
    if ks != list(range(ks[0], ks[-1] + 1)):
        raise ValueError("samples must cover consecutive integers")
    if ks[-1] - ks[0] < 2 * (max_degree + 2):
        raise ValueError("need a k span of at least 2 * (max_degree + 2) = %d, "
                         "got %d" % (2 * (max_degree + 2), ks[-1] - ks[0]))
    v = np.array([float(samples[k]) for k in ks])
    r = max_degree + 1
    tol = 1e-6 * max(1.0, float(np.abs(v).max()))
    starts = [0]
    j = r
    while j < v.size:
        if abs(np.diff(v[j - r:j + 1], r)[0]) > tol:
            starts.append(j)
            j += r
        else:
            j += 1
    max_deg = max(_observed_degree(v[a:b], max_degree, tol)
                  for a, b in zip(starts, starts[1:] + [v.size]))
    return PieceReport(bound, len(starts), max_deg, (ks[0], ks[-1]))


def _observed_degree(w, max_degree, tol):
    for deg in range(max_degree + 1):
        diffs = np.diff(w, deg + 1)
        if diffs.size == 0 or np.abs(diffs).max() <= tol:
            return deg
    return max_degree  # every full window passed the scan, so unreachable
