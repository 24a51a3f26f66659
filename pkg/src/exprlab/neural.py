"""Feedforward nets: layered dense affine maps with ReLU or identity units.

A net is a sequence of layers, each y = act(W x + b).  The last layer is
always identity so outputs are unbounded.  Everything is float64 numpy.
The module also provides the structural combinators (chain, stack, affine,
select) used to assemble nets out of verified pieces.
"""

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "identity")


@dataclass
class FnnLayer:
    w: np.ndarray
    b: np.ndarray
    act: str = "relu"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.w.ndim != 2:
            raise ValueError("weight must be a 2-d matrix, got shape %s" % (self.w.shape,))
        if self.b.shape != (self.w.shape[0],):
            raise ValueError("bias shape %s does not match %d output units"
                             % (self.b.shape, self.w.shape[0]))
        if self.act not in ACTIVATIONS:
            raise ValueError("unknown activation %r" % (self.act,))
        if not (np.isfinite(self.w).all() and np.isfinite(self.b).all()):
            raise ValueError("non-finite layer parameters")

    @property
    def in_dim(self):
        return self.w.shape[1]

    @property
    def out_dim(self):
        return self.w.shape[0]


@dataclass
class Fnn:
    """Dense feedforward net.  Final layer activation must be identity."""

    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("net needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError("layer dims do not chain: %d -> %d" % (a.out_dim, b.in_dim))
        if self.layers[-1].act != "identity":
            raise ValueError("final layer must have identity activation")

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def depth(self):
        return len(self.layers)

    @property
    def size(self):
        # node count: input units plus every layer's units
        return self.input_dim + sum(l.out_dim for l in self.layers)


def fnn_eval_batch(fnn, x):
    """Apply the net to a batch of row vectors, shape (n, input_dim)."""
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != fnn.input_dim:
        raise ValueError("batch shape %s does not match input_dim %d"
                         % (h.shape, fnn.input_dim))
    for layer in fnn.layers:
        h = h @ layer.w.T + layer.b
        if layer.act == "relu":
            np.maximum(h, 0.0, out=h)
    return h


def fnn_eval(fnn, x):
    """Apply the net to a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (fnn.input_dim,):
        raise ValueError("input shape %s does not match input_dim %d"
                         % (x.shape, fnn.input_dim))
    return fnn_eval_batch(fnn, x[None, :])[0]


def fnn_grad(fnn, x, upstream):
    """Vector-Jacobian product at x.

    Returns (dx, grads) where grads is a list of (dw, db) per layer, for
    the scalar upstream . fnn(x).  At ReLU kinks the subgradient with
    relu'(0) = 0 is used.
    """
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (fnn.output_dim,):
        raise ValueError("upstream shape %s does not match output_dim %d"
                         % (upstream.shape, fnn.output_dim))
    acts = [x]
    pre = []
    h = x
    for layer in fnn.layers:
        z = layer.w @ h + layer.b
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.act == "relu" else z
        acts.append(h)
    grads = [None] * len(fnn.layers)
    d = upstream
    for i in range(len(fnn.layers) - 1, -1, -1):
        layer = fnn.layers[i]
        dz = d * (pre[i] > 0) if layer.act == "relu" else d
        grads[i] = (np.outer(dz, acts[i]), dz.copy())
        d = layer.w.T @ dz
    return d, grads


def lipschitz_upper(fnn):
    """Upper bound on the sup-norm Lipschitz constant.

    Product over layers of the infinity operator norm max_i sum_j |w_ij|;
    ReLU is 1-Lipschitz so activations do not enter.
    """
    bound = 1.0
    for layer in fnn.layers:
        bound *= float(np.abs(layer.w).sum(axis=1).max()) if layer.w.size else 0.0
    return bound


# ---------------------------------------------------------------------------
# combinators

def affine_fnn(w, b):
    """Single identity-activation layer computing W x + b."""
    return Fnn([FnnLayer(np.asarray(w, dtype=np.float64),
                         np.asarray(b, dtype=np.float64), "identity")])


def identity_fnn(d):
    return affine_fnn(np.eye(d), np.zeros(d))


def select_fnn(indices, in_dim):
    """Affine net projecting the input onto the given coordinates."""
    w = np.zeros((len(indices), in_dim))
    for row, idx in enumerate(indices):
        w[row, idx] = 1.0
    return affine_fnn(w, np.zeros(len(indices)))


def chain_fnns(*fnns):
    """Compose left to right: chain(f, g)(x) = g(f(x))."""
    if not fnns:
        raise ValueError("need at least one net")
    layers = []
    for i, f in enumerate(fnns):
        if i > 0 and f.input_dim != fnns[i - 1].output_dim:
            raise ValueError("cannot chain output_dim %d into input_dim %d"
                             % (fnns[i - 1].output_dim, f.input_dim))
        layers.extend(f.layers)
    # interior identity layers are fine; only the final one must be identity
    fixed = [FnnLayer(l.w, l.b, l.act) for l in layers]
    return Fnn(fixed)


def stack_fnns(f, g):
    """Parallel block composition: inputs concatenated, outputs concatenated.

    The shorter net is padded with trailing identity layers.  When an
    identity layer lines up with a ReLU layer of the other block it is
    encoded as the carry pair x = relu(x) - relu(-x), with the decoding
    matrix folded into the block's next layer, so both blocks compute
    exactly what they did standalone.
    """
    def padded(net, depth):
        layers = list(net.layers)
        d = net.output_dim
        while len(layers) < depth:
            layers.append(FnnLayer(np.eye(d), np.zeros(d), "identity"))
        return layers

    depth = max(f.depth, g.depth)
    blocks = [padded(f, depth), padded(g, depth)]
    decode = [None, None]  # pending carry decode per block
    out_layers = []
    for t in range(depth):
        acts = [blocks[0][t].act, blocks[1][t].act]
        common = "relu" if "relu" in acts else "identity"
        ws, bs = [], []
        for i in (0, 1):
            layer = blocks[i][t]
            w, b = layer.w, layer.b
            if decode[i] is not None:
                w = w @ decode[i]
                decode[i] = None
            if layer.act == "identity" and common == "relu":
                w = np.vstack([w, -w])
                b = np.concatenate([b, -b])
                d = layer.out_dim
                decode[i] = np.hstack([np.eye(d), -np.eye(d)])
            ws.append(w)
            bs.append(b)
        w = np.zeros((ws[0].shape[0] + ws[1].shape[0], ws[0].shape[1] + ws[1].shape[1]))
        w[: ws[0].shape[0], : ws[0].shape[1]] = ws[0]
        w[ws[0].shape[0]:, ws[0].shape[1]:] = ws[1]
        out_layers.append(FnnLayer(w, np.concatenate(bs), common))
    # final layers are identity on both sides, so no decode can be pending
    assert decode == [None, None]
    return Fnn(out_layers)


def output_interval(fnn, lo, hi):
    """Interval bound: range hull of the net over inputs in [lo, hi]^d.

    Standard interval propagation through affine layers and ReLU; returns
    (lo_out, hi_out) covering every output coordinate.
    """
    if not lo <= hi:
        raise ValueError("empty input interval [%g, %g]" % (lo, hi))
    lo_v = np.full(fnn.input_dim, float(lo))
    hi_v = np.full(fnn.input_dim, float(hi))
    for layer in fnn.layers:
        wp = np.maximum(layer.w, 0.0)
        wn = np.minimum(layer.w, 0.0)
        new_lo = wp @ lo_v + wn @ hi_v + layer.b
        new_hi = wp @ hi_v + wn @ lo_v + layer.b
        if layer.act == "relu":
            new_lo = np.maximum(new_lo, 0.0)
            new_hi = np.maximum(new_hi, 0.0)
        lo_v, hi_v = new_lo, new_hi
    return float(lo_v.min()), float(hi_v.max())


# ---------------------------------------------------------------------------
# serialization

def fnn_to_dict(fnn):
    return {
        "input_dim": fnn.input_dim,
        "layers": [
            {"w": l.w.tolist(), "b": l.b.tolist(), "act": l.act} for l in fnn.layers
        ],
    }


def fnn_from_dict(obj):
    try:
        input_dim = int(obj["input_dim"])
        layers = [FnnLayer(np.array(l["w"], dtype=np.float64),
                           np.array(l["b"], dtype=np.float64),
                           str(l["act"]))
                  for l in obj["layers"]]
    except (KeyError, TypeError) as exc:
        raise ValueError("malformed net record: %s" % (exc,)) from exc
    net = Fnn(layers)
    if net.input_dim != input_dim:
        raise ValueError("declared input_dim %d does not match first layer (%d)"
                         % (input_dim, net.input_dim))
    return net
