"""Symbolic describability tracking for sum-aggregation models on
parameterized graph families.

Each vertex-state coordinate, viewed as a function of the family
parameters (k, c), is tracked by a finite set of polynomials such that at
every parameter choice some member equals the function exactly (weak
description).  Propagation follows the closure rules of such sets: an
affine combination forms coefficient-weighted sums over the Cartesian
product of the input sets, ReLU adjoins the zero polynomial, and a
neighbor sum multiplies sets by the family's structural monomials (a star
center sees k copies of the leaf state, and so on).

A polynomial is good when every term containing c also carries at least
one factor of k; a set is good when all its members are.  Good sets are
what rule out unbounded-c targets: any polynomial tying c to k runs away
as k grows, so no finite set of good polynomials can track the constant-k
target c.

Set sizes grow doubly exponentially with network depth and width, so all
builders take a cap and abort with a diagnostic rather than truncate.
"""

from dataclasses import dataclass, field

import numpy as np

from .families import FamilySpec, make_family
from .gnn import gnn_apply

_QUANTUM = 1e-9  # coefficient tolerance for set dedupe


class DescribeOverflowError(RuntimeError):
    """Raised when a describing set outgrows the configured cap."""

    def __init__(self, size, cap, where):
        self.size = size
        self.cap = cap
        self.where = where
        super().__init__("describing set reached %d polynomials (cap %d) at %s"
                         % (size, cap, where))


class Poly2:
    """Polynomial in the family parameters: term map (k-deg, c-deg) -> coef.

    Zero coefficients are dropped on construction; the zero polynomial has
    an empty term map.  Instances are treated as immutable.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        data = {}
        items = terms.items() if isinstance(terms, dict) else (terms or ())
        for (i, j), coef in items:
            i, j, coef = int(i), int(j), float(coef)
            if i < 0 or j < 0:
                raise ValueError("term degrees must be nonnegative")
            data[(i, j)] = data.get((i, j), 0.0) + coef
        self.terms = {ij: co for ij, co in data.items() if co != 0.0}

    @classmethod
    def constant(cls, value):
        return cls({(0, 0): float(value)})

    def scale(self, a):
        return Poly2({ij: a * co for ij, co in self.terms.items()})

    def __add__(self, other):
        merged = dict(self.terms)
        for ij, co in other.terms.items():
            merged[ij] = merged.get(ij, 0.0) + co
        return Poly2(merged)

    def shift(self, di, dj):
        """Multiply by the monomial k^di c^dj."""
        return Poly2({(i + di, j + dj): co for (i, j), co in self.terms.items()})

    def eval(self, k, c):
        return float(sum(co * k ** i * c ** j for (i, j), co in self.terms.items()))

    @property
    def is_good(self):
        return all(i >= 1 for (i, j) in self.terms if j >= 1)

    def has_term(self, i, j):
        return (i, j) in self.terms

    def key(self):
        """Canonical hashable form; coefficients bucketed at the dedupe
        tolerance, so near-identical polynomials collapse."""
        return tuple(sorted((i, j, int(round(co / _QUANTUM)))
                            for (i, j), co in self.terms.items()))

    def __repr__(self):
        return "Poly2(%r)" % (sorted(self.terms.items()),)


@dataclass(frozen=True)
class PolySet:
    """Finite describing set; good iff every member polynomial is good."""

    polys: tuple

    @property
    def good(self):
        return all(p.is_good for p in self.polys)

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)


def polyset_to_dict(ps):
    return {
        "good": ps.good,
        "polys": [[[i, j, co] for (i, j), co in sorted(p.terms.items())]
                  for p in ps.polys],
    }


# ---------------------------------------------------------------------------
# set algebra

def _accumulate(acc, addends, cap, where):
    # Cartesian sum with dedupe; aborts as soon as the result passes the cap
    out, seen = [], set()
    for q in acc:
        for p in addends:
            r = q + p
            key = r.key()
            if key in seen:
                continue
            seen.add(key)
            out.append(r)
            if len(out) > cap:
                raise DescribeOverflowError(len(out), cap, where)
    return out


def _affine_sets(sets, weights, bias, cap, where):
    acc = [Poly2.constant(bias)]
    for s, w in zip(sets, weights):
        if w == 0.0:
            continue
        acc = _accumulate(acc, [p.scale(w) for p in s], cap, where)
    return acc


def _monomial_sum(pairs, cap, where):
    """Cartesian sum of sets, each first multiplied by a monomial."""
    acc = [Poly2()]
    for (di, dj), s in pairs:
        acc = _accumulate(acc, [p.shift(di, dj) for p in s], cap, where)
    return acc


def _with_zero(s, cap, where):
    if any(not p.terms for p in s):
        return s
    if len(s) + 1 > cap:
        raise DescribeOverflowError(len(s) + 1, cap, where)
    return s + [Poly2()]


def _fnn_sets(fnn, in_sets, cap, where_prefix):
    sets = list(in_sets)
    for li, fl in enumerate(fnn.layers):
        nxt = []
        for r in range(fl.w.shape[0]):
            where = "%s, dense layer %d unit %d" % (where_prefix, li, r)
            s = _affine_sets(sets, fl.w[r], fl.b[r], cap, where)
            if fl.act == "relu":
                s = _with_zero(s, cap, where)
            nxt.append(s)
        sets = nxt
    return sets


# ---------------------------------------------------------------------------
# family recurrences

# Per family: initial polynomial per vertex role, the monomial-weighted role
# combination each role's neighbor sum aggregates, and the monomial vertex
# counts a whole-graph sum readout applies.
_FAMILY_RULES = {
    "star_uc": {
        "init": {"u": lambda: Poly2(), "v": lambda: Poly2({(0, 1): 1.0})},
        "agg": {"u": (((1, 0), "v"),), "v": (((0, 0), "u"),)},
        "counts": {"u": (0, 0), "v": (1, 0)},
    },
    "bipartite_uc": {
        "init": {"u": lambda: Poly2(), "v": lambda: Poly2({(0, 1): 1.0})},
        "agg": {"u": (((1, 0), "v"),), "v": (((2, 0), "u"),)},
        "counts": {"u": (2, 0), "v": (1, 0)},
    },
    "tripartite_sv": {
        "init": {"u": lambda: Poly2.constant(1.0),
                 "v": lambda: Poly2.constant(1.0),
                 "w": lambda: Poly2.constant(1.0)},
        "agg": {"u": (((1, 0), "v"),),
                "v": (((0, 1), "w"), ((0, 0), "u")),
                "w": (((1, 0), "v"),)},
        "counts": {"u": (0, 0), "v": (1, 0), "w": (0, 1)},
    },
    "tripartite_embed": {
        "init": {"u": lambda: Poly2(), "v": lambda: Poly2(),
                 "w": lambda: Poly2.constant(1.0)},
        "agg": {"u": (((3, 0), "v"),),
                "v": (((2, 0), "u"), ((1, 1), "w")),
                "w": (((3, 0), "v"),)},
        "counts": {"u": (2, 0), "v": (3, 0), "w": (1, 1)},
    },
}

DESCRIBABLE_FAMILIES = tuple(sorted(_FAMILY_RULES))


def describe_roles(gnn, family, cap=100000):
    """Describing sets for every vertex role of a family, per coordinate.

    Propagates through all layers of a sum-aggregation model; returns
    {role: [PolySet for each output coordinate]}.
    """
    if family not in _FAMILY_RULES:
        raise ValueError("no describability rules for family %r (choose from %s)"
                         % (family, ", ".join(DESCRIBABLE_FAMILIES)))
    for li, layer in enumerate(gnn.layers):
        for agg in layer.aggs:
            if agg.kind != "sum":
                raise ValueError("describability tracking needs sum aggregation, "
                                 "layer %d uses %r" % (li, agg.kind))
    rules = _FAMILY_RULES[family]
    state = {role: [[rules["init"][role]()] for _ in range(gnn.input_dim)]
             for role in rules["agg"]}
    for li, layer in enumerate(gnn.layers):
        p = layer.in_dim
        new_state = {}
        for role, pairs in rules["agg"].items():
            agg_sets = []
            for coord in range(p):
                where = "layer %d, role %s, slot coord %d" % (li, role, coord)
                agg_sets.append(_monomial_sum(
                    [(mono, state[src][coord]) for mono, src in pairs], cap, where))
            in_sets = list(state[role])
            for _ in layer.aggs:
                in_sets.extend(agg_sets)
            new_state[role] = _fnn_sets(layer.fnn, in_sets, cap,
                                        "layer %d, role %s" % (li, role))
        state = new_state
    return {role: [PolySet(tuple(s)) for s in sets]
            for role, sets in state.items()}


def describe(gnn, family, cap=100000):
    """Describing set for the family's target vertex after the last layer,
    merged over output coordinates."""
    if family not in ("star_uc", "tripartite_sv"):
        raise ValueError("describe targets star_uc or tripartite_sv, got %r"
                         % (family,))
    roles = describe_roles(gnn, family, cap)
    merged, seen = [], set()
    for ps in roles["u"]:
        for p in ps:
            key = p.key()
            if key not in seen:
                seen.add(key)
                merged.append(p)
    return PolySet(tuple(merged))


def sum_readout_description(gnn, family, cap=100000):
    """Describing sets, one per output coordinate, for the whole-graph sum
    readout (vertex-count-weighted combination of the role states)."""
    if family not in _FAMILY_RULES:
        raise ValueError("no describability rules for family %r" % (family,))
    rules = _FAMILY_RULES[family]
    roles = describe_roles(gnn, family, cap)
    out = []
    for coord in range(gnn.output_dim):
        pairs = [(rules["counts"][role], list(roles[role][coord].polys))
                 for role in sorted(rules["agg"])]
        out.append(PolySet(tuple(_monomial_sum(
            pairs, cap, "sum readout coord %d" % coord))))
    return out


# ---------------------------------------------------------------------------
# numeric check

@dataclass
class CheckReport:
    """Grid check outcome; violations hold (k, c, coord, value, best_miss)."""

    family: str
    n_points: int
    n_coords: int
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations


def check_description(ps, gnn, family, k_range=(1, 20), c_range=(1, 20),
                      rtol=1e-6):
    """Numerically verify weak description on a parameter grid.

    At every grid point each coordinate of the model's target-vertex output
    must match some polynomial within rtol; the tolerance is relative with
    an absolute floor of 1 so near-zero outputs compare absolutely.
    """
    violations = []
    n_points = 0
    for k in range(k_range[0], k_range[1] + 1):
        for c in range(c_range[0], c_range[1] + 1):
            g = make_family(FamilySpec(family, k, c))
            out = gnn_apply(gnn, g)[g.target]
            n_points += 1
            evals = np.array([p.eval(k, c) for p in ps.polys]) if len(ps) else None
            for coord, val in enumerate(out):
                best = float(np.abs(evals - val).min()) if evals is not None else np.inf
                if not best <= rtol * max(1.0, abs(val)):
                    violations.append((k, c, coord, float(val), best))
    return CheckReport(family, n_points, gnn.output_dim, violations)
