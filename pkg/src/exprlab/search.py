"""Budgeted search for family parameters where a model misses its target.

The search is an oracle, not a proof: a returned witness is checked
arithmetic, while exhausting the budget only means no witness was found
within it.
"""

from dataclasses import dataclass

from .families import FamilySpec, make_family
from .gnn import gnn_apply


@dataclass(frozen=True)
class SearchBudget:
    """Parameter ladders, scanned lexicographically (k outer, c inner)."""

    ks: tuple
    cs: tuple

    @classmethod
    def geometric(cls, limit=10000):
        ladder = []
        step = 1
        while step < limit:
            ladder.append(step)
            step *= 2
        ladder.append(limit)
        return cls(tuple(ladder), tuple(ladder))


def counterexample_search(gnn, family, target, eps, budget=None):
    """First (k, c, gap) on the budget grid where the model's value at the
    family's distinguished vertex misses target(k, c) by more than eps;
    None when the budget is exhausted.

    The model value is the first output coordinate at the target vertex.
    Cost per probe scales with the family's graph, so budgets should fit
    the family (star and shared-outer families stay linear in k + c).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if budget is None:
        budget = SearchBudget.geometric()
    for k in budget.ks:
        for c in budget.cs:
            g = make_family(FamilySpec(family, int(k), int(c)))
            val = float(gnn_apply(gnn, g)[g.target, 0])
            gap = abs(val - float(target(k, c)))
            if gap > eps:
                return int(k), int(c), gap
    return None
