"""Explicit sum-aggregation constructions.

Everything here is a closed-form network, no training involved:

* an average-threshold indicator whose output per vertex is a trapezoid in
  the neighborhood average,
* two-layer sum-aggregation models that sandwich neighborhood mean and max
  from above within a chosen tolerance,
* a compiler turning any mean- or max-aggregation model into a
  sum-aggregation model matching its feature maps within eps on graphs with
  features in [0,1]^d and no isolated vertices,
* the growth bound certifying how large such an emulation error budget can
  get, which single-vertex star families saturate.

The mean/max building blocks assume their inputs live in [0,1].  The
compiler keeps that invariant internally by rescaling each stage's feature
range (computed by interval propagation, inflated by the accumulated error
bound) into [0,1] before applying a gadget and undoing the rescale after.
"""

import math
from dataclasses import dataclass

import numpy as np

from .gnn import Aggregation, Gnn, GnnLayer, gnn_apply, gnn_size, max_layer_input_dim, max_lipschitz
from .neural import Fnn, FnnLayer, chain_fnns, lipschitz_upper, output_interval


class EmulationInfeasibleError(RuntimeError):
    """Raised when no finite-precision gadget can meet the error budget."""

    def __init__(self, reason, **diag):
        self.diag = diag
        detail = ", ".join("%s=%r" % kv for kv in sorted(diag.items()))
        super().__init__("%s (%s)" % (reason, detail))


@dataclass
class IndicatorSpec:
    """Average-threshold indicator: threshold s, slack a > 0, feature dim d."""

    s: float
    a: float
    d: int = 1

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("slack a must be positive")
        if self.d < 1:
            raise ValueError("feature dim must be >= 1")


@dataclass
class EmulationReport:
    eps: float
    eps_hat: float
    a: float
    d: int
    m: int
    size_built: int


def _count_and_copy_layer(d):
    # (x, agg) -> (1, x): constant-1 slot lets sum aggregation count neighbors
    w = np.zeros((d + 1, 2 * d))
    w[1:, :d] = np.eye(d)
    b = np.zeros(d + 1)
    b[0] = 1.0
    return Fnn([FnnLayer(w, b, "identity")])


def build_indicator(spec):
    """Two-layer sum-aggregation model computing, per coordinate, a trapezoid
    indicator of "neighborhood average below s":

        0                        for avg >= s
        n (s - avg) / a          for s - a/n <= avg <= s
        1                        for s - a <= avg <= s - a/n
        1 - n (s - avg - a) / a  for s - a - a/n <= avg <= s - a
        0                        for avg <= s - a - a/n

    with n the neighbor count.  Vertices with empty neighborhoods output 0.
    """
    s, a, d = spec.s, spec.a, spec.d
    p = d + 1  # layer-two feature dim: (1, x)
    # hidden units per coordinate: z, z-1, z-y1-1, z-y1 with z = (s*y1 - y2)/a
    w_h = np.zeros((4 * d, 2 * p))
    b_h = np.zeros(4 * d)
    y1_col = p  # first agg coordinate: sum of constant-1 slots = n
    for i in range(d):
        y2_col = p + 1 + i
        for u, (y1_coef, bias) in enumerate([(s / a, 0.0), (s / a, -1.0),
                                             (s / a - 1.0, -1.0), (s / a - 1.0, 0.0)]):
            row = 4 * i + u
            w_h[row, y1_col] = y1_coef
            w_h[row, y2_col] = -1.0 / a
            b_h[row] = bias
    w_o = np.zeros((d, 4 * d))
    for i in range(d):
        w_o[i, 4 * i: 4 * i + 4] = [1.0, -1.0, 1.0, -1.0]
    f2 = Fnn([FnnLayer(w_h, b_h, "relu"), FnnLayer(w_o, np.zeros(d), "identity")])
    return Gnn([
        GnnLayer(_count_and_copy_layer(d), [Aggregation("sum")]),
        GnnLayer(f2, [Aggregation("sum")]),
    ])


def pieces_for(eps):
    """Smallest q with 1/q < eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return int(math.floor(1.0 / eps)) + 1


def _mean_gadget_hidden(p, q, own_offset, agg_offset, in_dim):
    """Hidden ReLU rows estimating the neighborhood average per coordinate.

    Reads y1 = neighbor count at agg_offset + p and y2_i at agg_offset+p+1+i
    (layout produced by _count_and_copy_layer after sum aggregation), plus
    carry pairs for the own feature block at own_offset.  Returns
    (w_hidden, b_hidden, w_combine, b_combine) with combine rows
    [own reconstruction (p); average estimate (p)] scaled back by
    (shift, width).
    """
    n_thresh = q + 1
    rows = 4 * n_thresh * p + 2 * p
    w_h = np.zeros((rows, in_dim))
    b_h = np.zeros(rows)
    y1_col = agg_offset + p
    r = 0
    for i in range(p):
        y2_col = agg_offset + p + 1 + i
        for t in range(1, n_thresh + 1):
            # z = t*y1 - q*y2 equals (s_t*y1 - y2)/a with exact integer weights
            for y1_coef, bias in ((t, 0.0), (t, -1.0), (t - 1, -1.0), (t - 1, 0.0)):
                w_h[r, y1_col] = y1_coef
                w_h[r, y2_col] = -q
                b_h[r] = bias
                r += 1
    carry0 = r
    for i in range(p):
        w_h[r, own_offset + i] = 1.0
        w_h[r + 1, own_offset + i] = -1.0
        r += 2
    return w_h, b_h, carry0


def _mean_combine(p, q, rows, carry0, shift, width):
    a_g = 1.0 / q
    w_c = np.zeros((2 * p, rows))
    b_c = np.zeros(2 * p)
    for i in range(p):
        w_c[i, carry0 + 2 * i] = 1.0
        w_c[i, carry0 + 2 * i + 1] = -1.0
    for i in range(p):
        base = 4 * (q + 1) * i
        for t in range(1, q + 2):
            s_t = t * a_g
            blk = base + 4 * (t - 1)
            w_c[p + i, blk: blk + 4] = width * s_t * np.array([1.0, -1.0, 1.0, -1.0])
        b_c[p + i] = shift
    return w_c, b_c


def _mean_tag(p, shift, width):
    # (x, agg) -> (x, 1, sigma(x)); the constant-1 slot counts neighbors
    # after sum aggregation, sigma rescales the stage range into [0,1]
    w = np.zeros((2 * p + 1, 2 * p))
    w[:p, :p] = np.eye(p)
    w[p + 1:, :p] = np.eye(p) / width
    b = np.zeros(2 * p + 1)
    b[p] = 1.0
    b[p + 1:] = -shift / width
    return Fnn([FnnLayer(w, b, "identity")])


def build_mean_approx(eps, d):
    """Two-layer sum-aggregation model with avg(v) <= out_v <= avg(v) + eps
    per coordinate, for features in [0,1]^d and nonempty neighborhoods."""
    q = pieces_for(eps)
    p_mid = 2 * d + 1
    w_h, b_h, carry0 = _mean_gadget_hidden(d, q, 0, p_mid, 2 * p_mid)
    w_c, b_c = _mean_combine(d, q, w_h.shape[0], carry0, 0.0, 1.0)
    # standalone gadget: emit just the average estimate, not the carries
    f2 = Fnn([FnnLayer(w_h, b_h, "relu"),
              FnnLayer(w_c[d:], b_c[d:], "identity")])
    return Gnn([
        GnnLayer(_mean_tag(d, 0.0, 1.0), [Aggregation("sum")]),
        GnnLayer(f2, [Aggregation("sum")]),
    ])


def _bucket_layer(p, q, shift, width, with_carry, in_dim, own_offset):
    """First max-gadget stage: per coordinate, q capped buckets of the
    rescaled own feature, optionally alongside own-feature carries."""
    a_g = 1.0 / q
    rows = 2 * q * p + (2 * p if with_carry else 0)
    w_h = np.zeros((rows, in_dim))
    b_h = np.zeros(rows)
    r = 0
    for i in range(p):
        for t in range(1, q + 1):
            # relu(sig - (t-1)a) - relu(sig - t a), sig = (x - shift)/width
            for cut in ((t - 1) * a_g, t * a_g):
                w_h[r, own_offset + i] = 1.0 / width
                b_h[r] = -shift / width - cut
                r += 1
    carry0 = r
    if with_carry:
        for i in range(p):
            w_h[r, own_offset + i] = 1.0
            w_h[r + 1, own_offset + i] = -1.0
            r += 2
    out_rows = (p if with_carry else 0) + q * p
    w_c = np.zeros((out_rows, rows))
    b_c = np.zeros(out_rows)
    base_out = 0
    if with_carry:
        for i in range(p):
            w_c[i, carry0 + 2 * i] = 1.0
            w_c[i, carry0 + 2 * i + 1] = -1.0
        base_out = p
    for i in range(p):
        for t in range(q):
            src = 2 * q * i + 2 * t
            w_c[base_out + q * i + t, src] = 1.0
            w_c[base_out + q * i + t, src + 1] = -1.0
    return Fnn([FnnLayer(w_h, b_h, "relu"), FnnLayer(w_c, b_c, "identity")])


def _max_cap_hidden(p, q, own_offset, agg_offset, in_dim, with_carry):
    """Hidden rows capping summed buckets at a and re-emitting own features."""
    a_g = 1.0 / q
    rows = 2 * q * p + (2 * p if with_carry else 0)
    w_h = np.zeros((rows, in_dim))
    b_h = np.zeros(rows)
    r = 0
    for i in range(p):
        for t in range(q):
            y_col = agg_offset + q * i + t
            w_h[r, y_col] = 1.0
            w_h[r + 1, y_col] = 1.0
            b_h[r + 1] = -a_g
            r += 2
    carry0 = r
    if with_carry:
        for i in range(p):
            w_h[r, own_offset + i] = 1.0
            w_h[r + 1, own_offset + i] = -1.0
            r += 2
    return w_h, b_h, carry0


# The exact-arithmetic max sandwich has equality cases on its lower side,
# which float rounding can undercut by a few ulps.  A tiny positive output
# bias keeps max(v) <= out strict; it is absorbed by the eps - a slack.
MAX_LOWER_GUARD = 2.0 ** -40


def _max_combine(p, q, rows, carry0, shift, width, with_carry):
    out_rows = (p if with_carry else 0) + p
    w_c = np.zeros((out_rows, rows))
    b_c = np.zeros(out_rows)
    base_out = 0
    if with_carry:
        for i in range(p):
            w_c[i, carry0 + 2 * i] = 1.0
            w_c[i, carry0 + 2 * i + 1] = -1.0
        base_out = p
    for i in range(p):
        for t in range(q):
            src = 2 * (q * i + t)
            w_c[base_out + i, src] = width
            w_c[base_out + i, src + 1] = -width
        b_c[base_out + i] = shift + width * MAX_LOWER_GUARD
    return w_c, b_c


def build_max_approx(eps, d):
    """Two-layer sum-aggregation model with max(v) <= out_v <= max(v) + eps
    per coordinate, for features in [0,1]^d and nonempty neighborhoods."""
    q = pieces_for(eps)
    f1 = _bucket_layer(d, q, 0.0, 1.0, False, 2 * d, 0)
    p2 = q * d
    in2 = 2 * p2
    w_h, b_h, carry0 = _max_cap_hidden(d, q, 0, p2, in2, False)
    w_c, b_c = _max_combine(d, q, w_h.shape[0], carry0, 0.0, 1.0, False)
    f2 = Fnn([FnnLayer(w_h, b_h, "relu"), FnnLayer(w_c, b_c, "identity")])
    return Gnn([
        GnnLayer(f1, [Aggregation("sum")]),
        GnnLayer(f2, [Aggregation("sum")]),
    ])


# ---------------------------------------------------------------------------
# emulation compiler

def _source_kind(gnn):
    kinds = set()
    for layer in gnn.layers:
        if len(layer.aggs) != 1:
            raise ValueError("emulation needs single-aggregation layers")
        kinds.add(layer.aggs[0].kind)
    if len(kinds) != 1 or kinds & {"sum", "upa"}:
        raise ValueError("emulation source must use mean everywhere or max everywhere, "
                         "got %s" % sorted(kinds))
    return kinds.pop()


def stage_tolerance(eps, a, d, m):
    """Per-stage gadget budget eps_hat for a source with Lipschitz bound a,
    width bound d and m layers: the unique value whose error recurrence
    b_t = 2 a d b_{t-1} + a d eps_hat lands on b_m = eps."""
    ad = a * d
    if ad == 0.0:
        return eps
    x = 2.0 * ad
    if x == 1.0:
        eps_hat = eps / (m * ad)
    else:
        try:
            eps_hat = eps * (1.0 - x) / (ad * (1.0 - x ** m))
        except OverflowError:
            eps_hat = 0.0
    if not eps_hat > 0.0:
        raise EmulationInfeasibleError("per-stage budget underflows to zero",
                                       eps=eps, a=a, d=d, m=m)
    return eps_hat


def error_schedule(eps_hat, a, d, m):
    """Accumulated error bounds b_0..b_m for the compiled model."""
    ad = a * d
    bs = [0.0]
    for _ in range(m):
        bs.append(2.0 * ad * bs[-1] + ad * eps_hat)
    return bs


def compile_to_sum(gnn, eps, max_gadget_pieces=500000):
    """Compile a mean- or max-aggregation model into a sum-aggregation model.

    On any graph without isolated vertices and with features in [0,1]^d, the
    final feature maps of source and compiled model differ by at most eps in
    every coordinate.  Each source layer becomes two layers: one tagging
    features with a constant-1 slot (mean) or bucket slots (max) after an
    affine rescale of the stage's feature range into [0,1], one reading the
    summed tags through the threshold gadget and undoing the rescale before
    the source layer's own net.
    """
    kind = _source_kind(gnn)
    if not eps > 0:
        raise ValueError("eps must be positive")
    a = max_lipschitz(gnn)
    d = max_layer_input_dim(gnn)
    m = gnn.n_layers
    eps_hat = stage_tolerance(eps, a, d, m)
    pads = error_schedule(eps_hat, a, d, m)

    layers = []
    lo, hi = 0.0, 1.0
    for j, src_layer in enumerate(gnn.layers):
        p = src_layer.in_dim
        f_j = src_layer.fnn
        shift = lo - pads[j]
        width = (hi - lo) + 2.0 * pads[j]
        if width == 0.0:
            width = 1.0
        q = int(math.floor(width / eps_hat)) + 1
        if q > max_gadget_pieces:
            raise EmulationInfeasibleError("stage gadget needs too many pieces",
                                           stage=j + 1, pieces=q,
                                           cap=max_gadget_pieces, eps_hat=eps_hat)
        if kind == "mean":
            tag = _mean_tag(p, shift, width)
            p_mid = 2 * p + 1
            w_h, b_h, carry0 = _mean_gadget_hidden(p, q, 0, p_mid, 2 * p_mid)
            w_c, b_c = _mean_combine(p, q, w_h.shape[0], carry0, shift, width)
        else:
            tag = _bucket_layer(p, q, shift, width, True, 2 * p, 0)
            p_mid = p + q * p
            w_h, b_h, carry0 = _max_cap_hidden(p, q, 0, p_mid + p, 2 * p_mid, True)
            w_c, b_c = _max_combine(p, q, w_h.shape[0], carry0, shift, width, True)
        head = Fnn([FnnLayer(w_h, b_h, "relu"), FnnLayer(w_c, b_c, "identity")])
        layers.append(GnnLayer(tag, [Aggregation("sum")]))
        layers.append(GnnLayer(chain_fnns(head, f_j), [Aggregation("sum")]))
        lo, hi = output_interval(f_j, lo, hi)
    compiled = Gnn(layers, gnn.readout)
    report = EmulationReport(eps=float(eps), eps_hat=float(eps_hat), a=float(a),
                             d=int(d), m=int(m), size_built=gnn_size(compiled))
    return compiled, report


def feature_gap(source, compiled, graph):
    """Largest absolute final-feature difference between the two models."""
    hs = gnn_apply(source, graph)
    hc = gnn_apply(compiled, graph)
    if hs.shape != hc.shape:
        raise ValueError("models disagree on output shape: %s vs %s" % (hs.shape, hc.shape))
    return float(np.abs(hs - hc).max())


def growth_bound(gnn):
    """(2 d a)^m bound on feature magnitudes over single-vertex star families
    for mean/max models with inputs in [0,1]; a is the largest layer net
    Lipschitz bound, d the largest layer input dim."""
    for layer in gnn.layers:
        for agg in layer.aggs:
            if agg.kind not in ("mean", "max"):
                raise ValueError("growth bound applies to mean/max aggregation only, "
                                 "got %r" % agg.kind)
    a = max_lipschitz(gnn)
    d = max_layer_input_dim(gnn)
    return (2.0 * d * a) ** gnn.n_layers
