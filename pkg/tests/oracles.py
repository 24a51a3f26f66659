"""Independent reference implementations the built networks are checked
against.  Everything here is computed directly from graph structure with
plain numpy, never through the constructions under test."""

import numpy as np


def indicator_closed_form(s, a, n, avg):
    """Five-case trapezoid: the target semantics of the threshold indicator."""
    if n == 0:
        return 0.0
    if avg >= s:
        return 0.0
    if avg >= s - a / n:
        return n * (s - avg) / a
    if avg >= s - a:
        return 1.0
    if avg >= s - a - a / n:
        return 1.0 - n * (s - avg - a) / a
    return 0.0


def neighbor_lists(graph):
    adj = [[] for _ in range(graph.n)]
    for u, v in graph.edges:
        adj[u].append(v)
        adj[v].append(u)
    return adj


def neighbor_stats(graph):
    """Per vertex: (count, mean vector, max vector); empty -> (0, None, None)."""
    stats = []
    for nbrs in neighbor_lists(graph):
        if not nbrs:
            stats.append((0, None, None))
            continue
        vals = graph.features[nbrs]
        stats.append((len(nbrs), vals.mean(axis=0), vals.max(axis=0)))
    return stats


def minimax3_line_gap(f0, f1, f2):
    """Chebyshev gap of the best line through three consecutive samples;
    the equioscillation solution gives |second difference| / 4."""
    return abs(f0 - 2.0 * f1 + f2) / 4.0


def minimax_brute(values, ys, degree, rounds=4, steps=41, span=None):
    """Grid search over polynomial coefficients, iteratively refined around
    the best cell.  Lower-bounds nothing; upper-bounds the true gap to
    within the final grid resolution."""
    vals = np.asarray(values, dtype=float)
    ys = np.asarray(ys, dtype=float)
    V = np.vander(ys, degree + 1, increasing=True)
    center = np.linalg.lstsq(V, vals, rcond=None)[0]
    if span is None:
        span = max(1.0, np.abs(vals).max())
    best_err, best = np.inf, center
    for _ in range(rounds):
        axes = [np.linspace(c - span, c + span, steps) for c in center]
        grids = np.meshgrid(*axes, indexing="ij")
        coefs = np.stack([g.ravel() for g in grids], axis=1)
        errs = np.abs(coefs @ V.T - vals).max(axis=1)
        i = int(errs.argmin())
        if errs[i] < best_err:
            best_err, best = float(errs[i]), coefs[i]
        center = coefs[i]
        span *= 2.0 / (steps - 1)
    return best_err, best


def star_uc_states(gnn, k, c):
    """Center state of a sum-aggregation model on the star with k leaves of
    feature c, via the two-role recurrence rather than any graph code."""
    from exprlab.neural import fnn_eval

    d = gnn.input_dim
    u = np.zeros(d)
    v = np.full(d, float(c))
    for layer in gnn.layers:
        slots_u = [k * v] * len(layer.aggs)
        slots_v = [u] * len(layer.aggs)
        u2 = fnn_eval(layer.fnn, np.concatenate([u] + slots_u))
        v2 = fnn_eval(layer.fnn, np.concatenate([v] + slots_v))
        u, v = u2, v2
    return u


def tripartite_sv_states(gnn, k, c):
    """Role states (u, v, w) of a sum-aggregation model on the shared-outer
    family, all-ones features, via the three-role recurrence."""
    from exprlab.neural import fnn_eval

    d = gnn.input_dim
    u = np.ones(d)
    v = np.ones(d)
    w = np.ones(d)
    for layer in gnn.layers:
        a_u = [k * v] * len(layer.aggs)
        a_v = [c * w + u] * len(layer.aggs)
        a_w = [k * v] * len(layer.aggs)
        u2 = fnn_eval(layer.fnn, np.concatenate([u] + a_u))
        v2 = fnn_eval(layer.fnn, np.concatenate([v] + a_v))
        w2 = fnn_eval(layer.fnn, np.concatenate([w] + a_w))
        u, v, w = u2, v2, w2
    return u, v, w


def tripartite_embed_states(gnn, k, c):
    """Role states (u, v, w) of a sum-aggregation model on the embedding
    family (k^2 u's, k^3 v's, k*c w's), via the three-role recurrence."""
    from exprlab.neural import fnn_eval

    d = gnn.input_dim
    u = np.zeros(d)
    v = np.zeros(d)
    w = np.ones(d)
    for layer in gnn.layers:
        a_u = [k ** 3 * v] * len(layer.aggs)
        a_v = [k ** 2 * u + k * c * w] * len(layer.aggs)
        a_w = [k ** 3 * v] * len(layer.aggs)
        u2 = fnn_eval(layer.fnn, np.concatenate([u] + a_u))
        v2 = fnn_eval(layer.fnn, np.concatenate([v] + a_v))
        w2 = fnn_eval(layer.fnn, np.concatenate([w] + a_w))
        u, v, w = u2, v2, w2
    return u, v, w


def _max_pattern(adj, h):
    # first maximizing edge position per (vertex, coordinate); mirrors the
    # training code's tie rule so a changed selection flags a kink
    if adj.src.size == 0:
        return b""
    vals = h[adj.src]
    seg_max = np.maximum.reduceat(vals, adj.starts, axis=0)
    hit = vals == seg_max[adj.seg_of_edge]
    pos = np.where(hit, np.arange(adj.src.size)[:, None], adj.src.size)
    return np.minimum.reduceat(pos, adj.starts, axis=0).tobytes()


def loss_fingerprint(gnn, batch, beta=1.0):
    """Byte signature of every piecewise-linear decision in the loss.

    Covers relu sign patterns, max-slot argmax selections and the
    smooth-L1 quadratic/linear split; two probe points with equal
    fingerprints lie on one smooth piece.
    """
    from exprlab.backprop import batch_forward, smooth_l1

    out, tapes = batch_forward(gnn, batch)
    parts = []
    for layer, tape in zip(gnn.layers, tapes):
        for i, fl in enumerate(layer.fnn.layers):
            if fl.act == "relu":
                parts.append((tape.acts[i + 1] > 0).tobytes())
        for agg in layer.aggs:
            if agg.kind == "max":
                parts.append(_max_pattern(batch.adj, tape.h_in))
    err = out[batch.centers, 0] - batch.targets
    parts.append((np.abs(err) < beta).tobytes())
    return b"".join(parts)


def directional_check(gnn, batch, rng, eps=1e-6, beta=1.0):
    """Compare the analytic loss gradient against central differences.

    Returns (analytic, numeric, clean) for a random unit direction; clean
    is False when the two probe points straddle a piecewise boundary, in
    which case the comparison is meaningless and should be retried.
    """
    from exprlab.backprop import (gnn_params, grads_to_arrays, batch_loss,
                                  loss_and_grad, set_gnn_params)
    from exprlab.optim import params_pack, params_unpack

    _, grads, _ = loss_and_grad(gnn, batch, beta)
    g = params_pack(grads_to_arrays(grads))
    templates = gnn_params(gnn)
    theta = params_pack(templates)
    u = rng.normal(size=theta.size)
    u /= np.linalg.norm(u)

    def probe(vec):
        set_gnn_params(gnn, params_unpack(vec, templates))
        loss, _ = batch_loss(gnn, batch, beta)
        return loss, loss_fingerprint(gnn, batch, beta)

    up, fp_plus = probe(theta + eps * u)
    down, fp_minus = probe(theta - eps * u)
    set_gnn_params(gnn, params_unpack(theta, templates))
    return float(g @ u), (up - down) / (2.0 * eps), fp_plus == fp_minus
