"""Seeded samplers for random graphs and random models.

These feed the verification sweeps (sandwich bounds, emulation, growth,
piecewise structure).  All draws go through an explicit numpy Generator so
every sweep is reproducible from a single seed.
"""

import numpy as np

from .families import FeaturedGraph
from .gnn import Aggregation, Gnn, GnnLayer, max_layer_input_dim, max_lipschitz
from .neural import Fnn, FnnLayer, fnn_eval, lipschitz_upper


def rng_from_seed(seed):
    return np.random.Generator(np.random.PCG64(seed))


def random_graph(rng, n_lo=4, n_hi=50, d=1, p_edge=None, feature_hi=1.0):
    """Random simple graph with minimum degree 1 and features in [0, feature_hi)^d."""
    n = int(rng.integers(n_lo, n_hi + 1))
    if p_edge is None:
        p_edge = float(rng.uniform(0.08, 0.5))
    mask = rng.random((n, n)) < p_edge
    iu = np.triu_indices(n, k=1)
    keep = mask[iu]
    edges = np.column_stack([iu[0][keep], iu[1][keep]])
    present = np.zeros(n, dtype=bool)
    if edges.size:
        present[edges.ravel()] = True
    extra = []
    for v in np.flatnonzero(~present):
        # attach isolated vertices so every neighborhood is nonempty
        w = int(rng.integers(0, n - 1))
        w = w + 1 if w >= v else w
        extra.append((min(v, w), max(v, w)))
        present[v] = True
        present[w] = True
    if extra:
        edges = np.vstack([edges, np.array(extra, dtype=np.int64)]) if edges.size else np.array(extra)
        key = edges[:, 0] * n + edges[:, 1]
        _, idx = np.unique(key, return_index=True)
        edges = edges[np.sort(idx)]
    feats = rng.random((n, d)) * feature_hi
    return FeaturedGraph(n, feats, edges, target=0)


def random_fnn(rng, in_dim, hidden, out_dim, scale=0.5):
    """Two-layer net (one ReLU hidden layer) with uniform weights in [-scale, scale];
    hidden=0 gives a single affine layer."""
    if hidden > 0:
        layers = [
            FnnLayer(rng.uniform(-scale, scale, (hidden, in_dim)),
                     rng.uniform(-scale, scale, hidden), "relu"),
            FnnLayer(rng.uniform(-scale, scale, (out_dim, hidden)),
                     rng.uniform(-scale, scale, out_dim), "identity"),
        ]
    else:
        layers = [FnnLayer(rng.uniform(-scale, scale, (out_dim, in_dim)),
                           rng.uniform(-scale, scale, out_dim), "identity")]
    return Fnn(layers)


def random_gnn(rng, input_dim, layer_kinds, width_hi=3, hidden_hi=3, scale=0.5,
               growth_cap=None, out_dim_last=None):
    """Random model; layer_kinds is a list per layer of aggregation-slot kinds.

    growth_cap, when set, applies constrain_growth so the model provably
    satisfies the (2da)^m feature growth bound on [0,1] inputs.
    """
    layers = []
    p = input_dim
    for i, kinds in enumerate(layer_kinds):
        q = int(rng.integers(1, width_hi + 1))
        if i == len(layer_kinds) - 1 and out_dim_last is not None:
            q = out_dim_last
        hidden = int(rng.integers(1, hidden_hi + 1))
        fnn = random_fnn(rng, p * (1 + len(kinds)), hidden, q, scale)
        layers.append(GnnLayer(fnn, [Aggregation(k) for k in kinds]))
        p = q
    gnn = Gnn(layers)
    if growth_cap is not None:
        constrain_growth(gnn, growth_cap)
    return gnn


def constrain_growth(gnn, cap):
    """Rescale a model in place so |features| <= (2da)^m certifiably holds
    on inputs in [0,1] under mean/max aggregation.

    Two steps: weights are scaled down until 2*d*a <= cap (a the largest
    layer net Lipschitz bound, d the largest layer input dim), then each
    net's biases are scaled until its value at zero fits the per-stage
    slack a*(2d-1)*min(1, (2da)^(m-1)) that the growth induction leaves
    for additive terms.  Scaling only shrinks, so weights stay in range.
    """
    d = max_layer_input_dim(gnn)
    m = gnn.n_layers
    target_a = cap / (2.0 * d)
    for layer in gnn.layers:
        lip = lipschitz_upper(layer.fnn)
        if lip > target_a:
            s = (target_a / lip) ** (1.0 / layer.fnn.depth)
            for fl in layer.fnn.layers:
                fl.w *= s
    a = max_lipschitz(gnn)
    assert 2.0 * a * d <= cap * (1 + 1e-12)
    budget = a * (2 * d - 1) * min(1.0, (2 * a * d) ** (m - 1))
    for layer in gnn.layers:
        fnn = layer.fnn
        at_zero = np.abs(fnn_eval(fnn, np.zeros(fnn.input_dim))).max()
        if at_zero > budget:
            s = 0.0 if budget == 0.0 else budget / at_zero
            for fl in fnn.layers:
                fl.b *= s
    return gnn
