"""Parametric graph families used by the constructions and experiments.

All graphs are simple and undirected, with float vertex features and a
distinguished target vertex.  Vertex numbering is canonical: center/u-class
first, then the v-class, then (where present) the w-class.
"""

import json
from dataclasses import dataclass

import numpy as np

from .util import write_atomic

FAMILY_NAMES = (
    "star_sv",
    "star_flag",
    "star_uc",
    "bipartite_uc",
    "tripartite_sv",
    "tripartite_embed",
)


@dataclass
class FeaturedGraph:
    """Undirected featured graph.  edges holds each endpoint pair once."""

    n: int
    features: np.ndarray  # (n, d)
    edges: np.ndarray     # (E, 2) int64
    target: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.features.ndim != 2 or self.features.shape[0] != self.n:
            raise ValueError("features must be (n, d), got %s for n=%d"
                             % (self.features.shape, self.n))
        if not (0 <= self.target < self.n):
            raise ValueError("target %d out of range for n=%d" % (self.target, self.n))
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if (self.edges[:, 0] == self.edges[:, 1]).any():
                raise ValueError("self-loops are not allowed")
            key = np.sort(self.edges, axis=1)
            uniq = np.unique(key, axis=0)
            if uniq.shape[0] != self.edges.shape[0]:
                raise ValueError("duplicate edges are not allowed")

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def n_edges(self):
        return self.edges.shape[0]


@dataclass
class FamilySpec:
    name: str
    k: int
    c: int = None
    b: float = None


def _const_features(sizes_values, d):
    # sizes_values: list of (count, value) blocks in vertex order
    parts = [np.full((cnt, d), float(val)) for cnt, val in sizes_values]
    return np.vstack(parts) if parts else np.zeros((0, d))


def _complete_bipartite_edges(a_start, a_count, b_start, b_count):
    a = np.arange(a_start, a_start + a_count, dtype=np.int64)
    b = np.arange(b_start, b_start + b_count, dtype=np.int64)
    return np.column_stack([np.repeat(a, b_count), np.tile(b, a_count)])


def star_sv(k, d=1):
    """Star with k leaves, every feature 1; target is the center."""
    if k < 1:
        raise ValueError("k must be >= 1")
    edges = np.column_stack([np.zeros(k, dtype=np.int64),
                             np.arange(1, k + 1, dtype=np.int64)])
    return FeaturedGraph(k + 1, _const_features([(k + 1, 1.0)], d), edges, target=0)


def star_flag(k, b, d=1):
    """Star with k zero leaves plus one extra leaf carrying feature b."""
    if k < 1:
        raise ValueError("k must be >= 1")
    edges = np.column_stack([np.zeros(k + 1, dtype=np.int64),
                             np.arange(1, k + 2, dtype=np.int64)])
    feats = _const_features([(k + 1, 0.0), (1, float(b))], d)
    return FeaturedGraph(k + 2, feats, edges, target=0)


def star_uc(k, c, d=1):
    """Star with a zero center and k leaves of feature c; target center."""
    if k < 1 or c is None:
        raise ValueError("star_uc needs k >= 1 and c")
    edges = np.column_stack([np.zeros(k, dtype=np.int64),
                             np.arange(1, k + 1, dtype=np.int64)])
    feats = _const_features([(1, 0.0), (k, float(c))], d)
    return FeaturedGraph(k + 1, feats, edges, target=0)


def bipartite_uc(k, c, d=1):
    """Complete bipartite graph: k^2 zero vertices vs k vertices of feature c."""
    if k < 1 or c is None:
        raise ValueError("bipartite_uc needs k >= 1 and c")
    nu, nv = k * k, k
    edges = _complete_bipartite_edges(0, nu, nu, nv)
    feats = _const_features([(nu, 0.0), (nv, float(c))], d)
    return FeaturedGraph(nu + nv, feats, edges, target=0)


def tripartite_sv(k, c, d=1):
    """Center u joined to k middle vertices, each joined to c outer vertices
    (outer layer shared), every feature 1."""
    if k < 1 or c is None or c < 1:
        raise ValueError("tripartite_sv needs k >= 1 and c >= 1")
    nv, nw = k, c
    star = np.column_stack([np.zeros(nv, dtype=np.int64),
                            np.arange(1, 1 + nv, dtype=np.int64)])
    cross = _complete_bipartite_edges(1, nv, 1 + nv, nw)
    feats = _const_features([(1 + nv + nw, 1.0)], d)
    return FeaturedGraph(1 + nv + nw, feats, np.vstack([star, cross]), target=0)


def tripartite_embed(k, c, d=1):
    """k^2 zero u-vertices, k^3 zero v-vertices, k*c one-vertices; complete
    u-v and v-w; target is a u-vertex."""
    if k < 1 or c is None or c < 1:
        raise ValueError("tripartite_embed needs k >= 1 and c >= 1")
    nu, nv, nw = k * k, k ** 3, k * c
    uv = _complete_bipartite_edges(0, nu, nu, nv)
    vw = _complete_bipartite_edges(nu, nv, nu + nv, nw)
    feats = _const_features([(nu, 0.0), (nv, 0.0), (nw, 1.0)], d)
    return FeaturedGraph(nu + nv + nw, feats, np.vstack([uv, vw]), target=0)


_BUILDERS = {
    "star_sv": lambda s: star_sv(s.k),
    "star_flag": lambda s: star_flag(s.k, s.b if s.b is not None else 1.0),
    "star_uc": lambda s: star_uc(s.k, s.c),
    "bipartite_uc": lambda s: bipartite_uc(s.k, s.c),
    "tripartite_sv": lambda s: tripartite_sv(s.k, s.c),
    "tripartite_embed": lambda s: tripartite_embed(s.k, s.c),
}


def make_family(spec):
    """Build the graph described by a FamilySpec."""
    if spec.name not in _BUILDERS:
        raise ValueError("unknown family %r (choose from %s)"
                         % (spec.name, ", ".join(FAMILY_NAMES)))
    if spec.k < 1:
        raise ValueError("k must be >= 1")
    return _BUILDERS[spec.name](spec)


# ---------------------------------------------------------------------------
# serialization

def graph_to_dict(g):
    return {
        "n": g.n,
        "d": g.d,
        "edges": g.edges.tolist(),
        "features": g.features.tolist(),
        "target": g.target,
    }


def graph_from_dict(obj):
    for key in ("n", "d", "edges", "features", "target"):
        if key not in obj:
            raise ValueError("graph record missing field %r" % key)
    g = FeaturedGraph(int(obj["n"]),
                      np.array(obj["features"], dtype=np.float64).reshape(int(obj["n"]), -1),
                      np.array(obj["edges"], dtype=np.int64).reshape(-1, 2),
                      int(obj["target"]))
    if g.d != int(obj["d"]):
        raise ValueError("declared d=%d does not match features (%d)" % (obj["d"], g.d))
    return g


def load_graph(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError("%s: line %d column %d: %s"
                             % (path, exc.lineno, exc.colno, exc.msg)) from exc
    try:
        return graph_from_dict(obj)
    except ValueError as exc:
        raise ValueError("%s: %s" % (path, exc)) from exc


def save_graph(g, path):
    write_atomic(path, json.dumps(graph_to_dict(g)))
