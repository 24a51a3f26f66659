"""Message-passing nets over featured graphs.

A model is a list of layers; layer i maps the current vertex features x_v
to f(x_v, agg_1(neighbors), ..., agg_b(neighbors)) where each agg slot is
one of sum, mean, max, or a univariate polynomial aggregation evaluated on
homogeneous neighbor multisets.  An optional readout pools the final map
over all vertices and applies one more net.

Sums and means reduce neighbor values in canonical ascending order per
coordinate, so results are invariant under vertex relabeling (bit for bit),
not merely up to float associativity.
"""

import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .neural import Fnn, fnn_eval_batch, fnn_from_dict, fnn_to_dict, lipschitz_upper
from .util import write_atomic

AGG_KINDS = ("sum", "mean", "max", "upa")
UPA_MODES = ("of_x", "of_bx")


@dataclass
class Aggregation:
    """Aggregation slot.  kind 'upa' needs poly coeffs (ascending) and mode:
    'of_x' evaluates p(x) on the repeated value, 'of_bx' evaluates p(b*x)
    with b the multiplicity."""

    kind: str
    coeffs: np.ndarray = None
    mode: str = None

    def __post_init__(self):
        if self.kind not in AGG_KINDS:
            raise ValueError("unknown aggregation kind %r" % (self.kind,))
        if self.kind == "upa":
            if self.coeffs is None or self.mode not in UPA_MODES:
                raise ValueError("upa aggregation needs coeffs and a mode in %s"
                                 % (UPA_MODES,))
            self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
            if self.coeffs.ndim != 1 or self.coeffs.size == 0:
                raise ValueError("upa coeffs must be a nonempty 1-d array")
        elif self.coeffs is not None or self.mode is not None:
            raise ValueError("coeffs/mode are only valid for kind 'upa'")


@dataclass
class GnnLayer:
    fnn: Fnn
    aggs: list

    def __post_init__(self):
        if not self.aggs:
            raise ValueError("layer needs at least one aggregation slot")
        slots = 1 + len(self.aggs)
        if self.fnn.input_dim % slots != 0:
            raise ValueError("net input_dim %d is not divisible by %d slots"
                             % (self.fnn.input_dim, slots))

    @property
    def in_dim(self):
        return self.fnn.input_dim // (1 + len(self.aggs))

    @property
    def out_dim(self):
        return self.fnn.output_dim


@dataclass
class Readout:
    agg: str
    fnn: Fnn

    def __post_init__(self):
        if self.agg not in ("sum", "avg"):
            raise ValueError("readout aggregation must be 'sum' or 'avg'")


@dataclass
class Gnn:
    layers: list
    readout: Readout = None

    def __post_init__(self):
        if not self.layers:
            raise ValueError("model needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError("layer dims do not chain: %d -> %d"
                                 % (a.out_dim, b.in_dim))
        if self.readout is not None and self.readout.fnn.input_dim != self.layers[-1].out_dim:
            raise ValueError("readout input_dim %d does not match final features %d"
                             % (self.readout.fnn.input_dim, self.layers[-1].out_dim))

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def n_layers(self):
        return len(self.layers)


def gnn_size(gnn):
    """Node count of the model: sum of layer net sizes (readout excluded)."""
    return sum(layer.fnn.size for layer in gnn.layers)


@dataclass
class LayerTrace:
    """Feature maps per layer; maps[0] is the input features, length m+1."""

    maps: list

    @property
    def final(self):
        return self.maps[-1]


# ---------------------------------------------------------------------------
# aggregation

def _segment_sum(vals, starts):
    return np.add.reduceat(vals, starts, axis=0)


def _sorted_by_segment(vals, seg_of_row):
    # within each segment, ascending per coordinate; one column at a time
    out = np.empty_like(vals)
    for j in range(vals.shape[1]):
        order = np.lexsort((vals[:, j], seg_of_row))
        out[:, j] = vals[order, j]
    return out


def _upa_values(agg, first_rows, counts):
    x = first_rows
    if agg.mode == "of_bx":
        x = counts[:, None] * x
    return npoly.polyval(x, agg.coeffs)


def aggregate(agg, values, canonical=True):
    """Aggregate a multiset of vectors (rows of values) into one vector.

    sum of the empty multiset is the zero vector; mean/max/upa reject it.
    upa requires all rows identical.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals.reshape(0, 0) if vals.size == 0 else vals[None, :]
    if vals.shape[0] == 0:
        if agg.kind == "sum":
            return np.zeros(vals.shape[1])
        raise ValueError("%s aggregation of an empty multiset" % agg.kind)
    if agg.kind == "max":
        return vals.max(axis=0)
    if agg.kind == "upa":
        if not (vals == vals[0]).all():
            raise ValueError("upa aggregation on a non-homogeneous multiset")
        return _upa_values(agg, vals[:1], np.array([vals.shape[0]]))[0]
    if canonical:
        vals = np.sort(vals, axis=0)
    s = _segment_sum(vals, np.array([0]))[0]
    return s / vals.shape[0] if agg.kind == "mean" else s


# ---------------------------------------------------------------------------
# forward pass

class Adjacency:
    """Directed edge structure grouped by destination, built once per graph."""

    def __init__(self, graph):
        e = graph.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((src, dst))
        self.src = src[order]
        self.dst = dst[order]
        self.n = graph.n
        if self.dst.size:
            boundary = np.flatnonzero(np.diff(self.dst)) + 1
            self.starts = np.concatenate([[0], boundary])
            self.seg_dst = self.dst[self.starts]
        else:
            self.starts = np.zeros(0, dtype=np.int64)
            self.seg_dst = np.zeros(0, dtype=np.int64)
        self.counts = np.diff(np.concatenate([self.starts, [self.dst.size]]))
        self.seg_of_edge = np.repeat(np.arange(self.seg_dst.size), self.counts)


def _slot_aggregate(agg, adj, feats, canonical):
    """Per-vertex aggregation over in-neighborhoods; empty ones give zero."""
    p = feats.shape[1]
    out = np.zeros((adj.n, p))
    if adj.seg_dst.size == 0:
        return out
    vals = feats[adj.src]
    if agg.kind == "max":
        seg = np.maximum.reduceat(vals, adj.starts, axis=0)
    elif agg.kind == "upa":
        first = vals[adj.starts]
        if not (vals == first[adj.seg_of_edge]).all():
            raise ValueError("upa aggregation on a non-homogeneous neighborhood")
        seg = _upa_values(agg, first, adj.counts.astype(np.float64))
    else:
        if canonical:
            vals = _sorted_by_segment(vals, adj.seg_of_edge)
        seg = _segment_sum(vals, adj.starts)
        if agg.kind == "mean":
            seg = seg / adj.counts[:, None]
    out[adj.seg_dst] = seg
    return out


def layer_forward(layer, graph, feats, canonical=True, adj=None):
    """One message-passing step: returns the next feature map (n, out_dim)."""
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape != (graph.n, layer.in_dim):
        raise ValueError("feature map shape %s does not match (n=%d, p=%d)"
                         % (feats.shape, graph.n, layer.in_dim))
    if adj is None:
        adj = Adjacency(graph)
    blocks = [feats]
    for agg in layer.aggs:
        blocks.append(_slot_aggregate(agg, adj, feats, canonical))
    return fnn_eval_batch(layer.fnn, np.hstack(blocks))


def gnn_forward(gnn, graph, canonical=True, adj=None):
    """Run all layers; returns the LayerTrace with maps[0] = input features."""
    if graph.d != gnn.input_dim:
        raise ValueError("graph feature dim %d does not match model input dim %d"
                         % (graph.d, gnn.input_dim))
    if adj is None:
        adj = Adjacency(graph)
    maps = [np.array(graph.features, dtype=np.float64)]
    for layer in gnn.layers:
        maps.append(layer_forward(layer, graph, maps[-1], canonical, adj))
    return LayerTrace(maps)


def gnn_apply(gnn, graph, canonical=True, adj=None):
    """Like gnn_forward but keeps only the final map (for large graphs)."""
    if graph.d != gnn.input_dim:
        raise ValueError("graph feature dim %d does not match model input dim %d"
                         % (graph.d, gnn.input_dim))
    if adj is None:
        adj = Adjacency(graph)
    h = np.array(graph.features, dtype=np.float64)
    for layer in gnn.layers:
        h = layer_forward(layer, graph, h, canonical, adj)
    return h


def readout_eval(gnn, graph, canonical=True):
    """Forward pass followed by the whole-graph readout."""
    if gnn.readout is None:
        raise ValueError("model has no readout")
    h = gnn_apply(gnn, graph, canonical)
    h = np.sort(h, axis=0) if canonical else h
    pooled = _segment_sum(h, np.array([0]))[0]
    if gnn.readout.agg == "avg":
        pooled = pooled / graph.n
    return fnn_eval_batch(gnn.readout.fnn, pooled[None, :])[0]


def max_lipschitz(gnn):
    """Largest per-layer net Lipschitz bound in the model."""
    return max(lipschitz_upper(layer.fnn) for layer in gnn.layers)


def max_layer_input_dim(gnn):
    """Largest per-layer feature dimension p_i (layer input side)."""
    return max(layer.in_dim for layer in gnn.layers)


# ---------------------------------------------------------------------------
# serialization

def _agg_to_obj(agg):
    if agg.kind == "upa":
        return {"kind": "upa", "coeffs": agg.coeffs.tolist(), "mode": agg.mode}
    return agg.kind


def _agg_from_obj(obj):
    if isinstance(obj, str):
        return Aggregation(obj)
    return Aggregation("upa", np.array(obj["coeffs"], dtype=np.float64), str(obj["mode"]))


def gnn_to_dict(gnn):
    out = {"layers": [{"fnn": fnn_to_dict(l.fnn), "aggs": [_agg_to_obj(a) for a in l.aggs]}
                      for l in gnn.layers]}
    if gnn.readout is not None:
        out["readout"] = {"agg": gnn.readout.agg, "fnn": fnn_to_dict(gnn.readout.fnn)}
    return out


def gnn_from_dict(obj):
    try:
        layers = [GnnLayer(fnn_from_dict(l["fnn"]), [_agg_from_obj(a) for a in l["aggs"]])
                  for l in obj["layers"]]
        readout = None
        if obj.get("readout") is not None:
            readout = Readout(str(obj["readout"]["agg"]), fnn_from_dict(obj["readout"]["fnn"]))
    except (KeyError, TypeError) as exc:
        raise ValueError("malformed model record: %s" % (exc,)) from exc
    return Gnn(layers, readout)


def load_gnn(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError("%s: line %d column %d: %s"
                             % (path, exc.lineno, exc.colno, exc.msg)) from exc
    try:
        return gnn_from_dict(obj)
    except ValueError as exc:
        raise ValueError("%s: %s" % (path, exc)) from exc


def save_gnn(gnn, path):
    write_atomic(path, json.dumps(gnn_to_dict(gnn)))
