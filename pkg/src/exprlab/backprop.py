"""Batched reverse-mode gradients through message-passing layers.

Forward semantics live in gnn.py; this module packs many graphs into one
disjoint union, replays the forward pass while recording a tape, and runs
the matching backward pass for gradient training.  Subgradient
conventions follow fnn_grad: relu'(0) = 0, and a max slot routes its
gradient to the smallest source index among the maximizers.  upa slots
have no backward pass.

Sum and mean slots are applied through a sparse adjacency matrix on the
fast path; aggregation and accumulation orders are fixed by the edge
ordering, so gradients are reproducible for a given batch.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .families import FeaturedGraph
from .gnn import Adjacency, _slot_aggregate


@dataclass
class GraphBatch:
    """Disjoint union of graphs with one scored vertex per member."""

    graph: FeaturedGraph
    adj: Adjacency
    centers: np.ndarray  # global index of the scored vertex, per member
    targets: np.ndarray  # regression target, per member
    neigh: sparse.csr_matrix = field(repr=False, default=None)
    counts: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.neigh is None:
            ones = np.ones(self.adj.src.size)
            self.neigh = sparse.csr_matrix(
                (ones, (self.adj.dst, self.adj.src)),
                shape=(self.graph.n, self.graph.n))
            # in-degree per vertex; clamped to 1 so isolated vertices keep
            # their zero rows instead of dividing 0/0
            counts = np.zeros(self.graph.n)
            counts[self.adj.seg_dst] = self.adj.counts
            self.counts = np.maximum(counts, 1.0)[:, None]

    @property
    def size(self):
        return self.centers.size


def batch_graphs(samples):
    """Pack (graph, target, target_vertex) triples into one GraphBatch."""
    if not samples:
        raise ValueError("cannot batch zero graphs")
    feats, edges, centers, targets = [], [], [], []
    offset = 0
    for graph, target, vertex in samples:
        if not 0 <= vertex < graph.n:
            raise ValueError("scored vertex %d outside graph of size %d"
                             % (vertex, graph.n))
        feats.append(graph.features)
        if graph.edges.size:
            edges.append(graph.edges + offset)
        centers.append(offset + vertex)
        targets.append(float(target))
        offset += graph.n
    union = FeaturedGraph(
        n=offset,
        features=np.vstack(feats),
        edges=np.vstack(edges) if edges else np.zeros((0, 2), dtype=np.int64))
    return GraphBatch(union, Adjacency(union),
                      np.asarray(centers, dtype=np.int64),
                      np.asarray(targets, dtype=np.float64))


@dataclass
class LayerTape:
    """Per-layer forward record: input features and all fnn activations.

    acts[0] is the concatenated fnn input; acts[i + 1] the activation
    after dense layer i, so acts[-1] is the layer output.
    """

    h_in: np.ndarray
    acts: list


def _slot_forward(agg, batch, h, canonical):
    if not canonical and agg.kind in ("sum", "mean"):
        out = batch.neigh @ h
        return out / batch.counts if agg.kind == "mean" else out
    return _slot_aggregate(agg, batch.adj, h, canonical)


def batch_forward(gnn, batch, canonical=False):
    """Forward pass on the union graph, recording what backward needs.

    Returns (out, tapes).  canonical=True reproduces gnn_forward bit for
    bit but pays a per-coordinate sort; training only needs the fixed
    edge order, which is the default.
    """
    if batch.graph.d != gnn.input_dim:
        raise ValueError("batch feature dim %d does not match model input dim %d"
                         % (batch.graph.d, gnn.input_dim))
    h = np.asarray(batch.graph.features, dtype=np.float64)
    tapes = []
    for layer in gnn.layers:
        blocks = [h]
        for agg in layer.aggs:
            blocks.append(_slot_forward(agg, batch, h, canonical))
        x = np.hstack(blocks)
        acts = [x]
        a = x
        for fl in layer.fnn.layers:
            z = a @ fl.w.T + fl.b
            a = np.maximum(z, 0.0) if fl.act == "relu" else z
            acts.append(a)
        tapes.append(LayerTape(h, acts))
        h = a
    return h, tapes


def _max_backward(adj, h, gslot):
    # route each vertex's gradient to its first maximizing source; the
    # edge list is sorted by (dst, src), so first position = lowest src
    out = np.zeros_like(h)
    if adj.src.size == 0:
        return out
    n_edges = adj.src.size
    vals = h[adj.src]
    seg_max = np.maximum.reduceat(vals, adj.starts, axis=0)
    hit = vals == seg_max[adj.seg_of_edge]
    pos = np.where(hit, np.arange(n_edges)[:, None], n_edges)
    first = np.minimum.reduceat(pos, adj.starts, axis=0)
    rows = adj.src[first]
    cols = np.arange(h.shape[1])[None, :]
    np.add.at(out, (rows, cols), gslot[adj.seg_dst])
    return out


def _slot_backward(agg, batch, h, gslot):
    # the union graph is undirected, so the adjacency operator is its own
    # transpose and sum/mean backward reuse the forward matrix
    if agg.kind == "sum":
        return batch.neigh @ gslot
    if agg.kind == "mean":
        return batch.neigh @ (gslot / batch.counts)
    if agg.kind == "max":
        return _max_backward(batch.adj, h, gslot)
    raise ValueError("%s aggregation has no backward pass" % (agg.kind,))


def batch_backward(gnn, batch, tapes, grad_out):
    """Reverse pass for upstream . output; returns (grad_feats, grads).

    grads[t][i] is (dw, db) for dense layer i of message-passing layer t,
    matching gnn_params order.
    """
    g = np.asarray(grad_out, dtype=np.float64)
    per_layer = []
    for layer, tape in zip(reversed(gnn.layers), reversed(tapes)):
        dense = []
        for i in range(len(layer.fnn.layers) - 1, -1, -1):
            fl = layer.fnn.layers[i]
            gz = g * (tape.acts[i + 1] > 0) if fl.act == "relu" else g
            dense.append((gz.T @ tape.acts[i], gz.sum(axis=0)))
            g = gz @ fl.w
        per_layer.append(dense[::-1])
        p = layer.in_dim
        gh = g[:, :p].copy()
        for s, agg in enumerate(layer.aggs):
            gh += _slot_backward(agg, batch, tape.h_in, g[:, p * (s + 1):p * (s + 2)])
        g = gh
    return g, per_layer[::-1]


def gnn_params(gnn):
    """All trainable arrays in a fixed order: (w, b) per dense layer."""
    out = []
    for layer in gnn.layers:
        for fl in layer.fnn.layers:
            out.append(fl.w)
            out.append(fl.b)
    return out


def set_gnn_params(gnn, arrays):
    """Write arrays (gnn_params order) back into the model in place."""
    params = gnn_params(gnn)
    if len(params) != len(arrays):
        raise ValueError("expected %d arrays, got %d" % (len(params), len(arrays)))
    for dst, src in zip(params, arrays):
        if dst.shape != src.shape:
            raise ValueError("shape mismatch %s vs %s" % (dst.shape, src.shape))
        dst[...] = src


def grads_to_arrays(grads):
    """Flatten batch_backward output to match gnn_params order."""
    out = []
    for dense in grads:
        for dw, db in dense:
            out.append(dw)
            out.append(db)
    return out


def smooth_l1(err, beta=1.0):
    """Pointwise smooth-L1 value and derivative."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    err = np.asarray(err, dtype=np.float64)
    a = np.abs(err)
    quad = a < beta
    val = np.where(quad, 0.5 * err * err / beta, a - 0.5 * beta)
    dv = np.where(quad, err / beta, np.sign(err))
    return val, dv


def batch_loss(gnn, batch, beta=1.0):
    """Mean smooth-L1 loss at the scored vertices, forward only."""
    out, _ = batch_forward(gnn, batch)
    preds = out[batch.centers, 0]
    val, _ = smooth_l1(preds - batch.targets, beta)
    return float(val.mean()), preds


def loss_and_grad(gnn, batch, beta=1.0):
    """Mean smooth-L1 loss at the scored vertices, with parameter grads.

    Only coordinate 0 of each scored vertex enters the loss; every other
    output row gets zero upstream gradient.  Returns (loss, grads, preds).
    """
    out, tapes = batch_forward(gnn, batch)
    preds = out[batch.centers, 0]
    val, dv = smooth_l1(preds - batch.targets, beta)
    grad_out = np.zeros_like(out)
    grad_out[batch.centers, 0] = dv / batch.size
    _, grads = batch_backward(gnn, batch, tapes, grad_out)
    return float(val.mean()), grads, preds
