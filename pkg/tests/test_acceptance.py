"""Acceptance battery: every advertised guarantee as one pass/fail check.

Each test exercises one end-to-end claim at its stated tolerance and,
where stated, its time budget, so `pytest -v tests/test_acceptance.py`
prints one verdict line per guarantee.  The training trend check and the
counterexample check share one set of trained models through a module
fixture; everything else builds what it needs on the spot.
"""

import time

import numpy as np
import pytest

from oracles import (directional_check, indicator_closed_form,
                     minimax3_line_gap, minimax_brute, neighbor_stats)

from exprlab.backprop import batch_graphs
from exprlab.constructions import (IndicatorSpec, build_indicator,
                                   build_max_approx, build_mean_approx,
                                   compile_to_sum, feature_gap, growth_bound)
from exprlab.describe import check_description, describe, sum_readout_description
from exprlab.experiments import ReTable, TaskSpec, TrainConfig, evaluate_re, train
from exprlab.families import star_flag, star_sv
from exprlab.gnn import Adjacency, Aggregation, Gnn, GnnLayer, gnn_apply
from exprlab.minimax import minimax_gap
from exprlab.pieces import detect_pieces, piece_bound
from exprlab.sampling import random_fnn, random_gnn, random_graph, rng_from_seed
from exprlab.search import SearchBudget, counterexample_search

pytestmark = pytest.mark.acceptance


def narrow_sum_gnn(rng, m):
    # hidden width 1: describing sets double per relu unit and multiply
    # across fan-in, so anything wider overflows the cap at depth 2
    layers = []
    for _ in range(m):
        layers.append(GnnLayer(random_fnn(rng, 2, 1, 1), [Aggregation("sum")]))
    return Gnn(layers)


def random_mupa_gnn(rng, m):
    """Random mix of sum/mean/max slots, sometimes with a polynomial slot."""
    kinds = ("sum", "mean", "max")
    layers, p = [], 1
    for _ in range(m):
        slots = [Aggregation(kinds[int(rng.integers(0, 3))])
                 for _ in range(1 + int(rng.integers(0, 2)))]
        if rng.random() < 0.5:
            slots.append(Aggregation("upa",
                                     coeffs=tuple(rng.uniform(-0.5, 0.5, 3)),
                                     mode=("of_x", "of_bx")[int(rng.integers(0, 2))]))
        layers.append(GnnLayer(random_fnn(rng, p * (1 + len(slots)), 1, 1), slots))
        p = 1
    return Gnn(layers)


@pytest.fixture(scope="module")
def bounded_models():
    """50 mean + 50 max models, m <= 2, rescaled to a certified growth cap."""
    rng = rng_from_seed(2024)
    models = {}
    for kind in ("mean", "max"):
        models[kind] = [
            random_gnn(rng, int(rng.integers(1, 4)),
                       [[kind]] * (1 + int(rng.integers(0, 2))),
                       growth_cap=8.0)
            for _ in range(50)]
    return models


@pytest.fixture(scope="module")
def trained_runs():
    """Desk-scale training: (task, model) -> (pooled test table, models).

    Four configurations, three seeds each, with the defaults the package
    ships; cpu_seconds records the total spent training and evaluating.
    """
    start = time.process_time()
    runs = {}
    for task_name, model_kind in (("uc", "mean"), ("uc", "sum"),
                                  ("sv", "sum"), ("sv", "sum_mean")):
        task = TaskSpec(task=task_name, model=model_kind)
        cfg = TrainConfig()
        table, models = ReTable(), []
        for seed in task.seeds:
            gnn, _ = train(task, cfg, seed)
            models.append(gnn)
            table.merge(evaluate_re(gnn, task.test_range, task, seed=seed))
        runs[(task_name, model_kind)] = (table, models)
    runs["cpu_seconds"] = time.process_time() - start
    return runs


def test_01_threshold_indicator_matches_closed_form():
    rng = rng_from_seed(101)
    t0 = time.perf_counter()
    for _ in range(1000):
        s = float(rng.uniform(0.0, 1.0))
        a = float(rng.uniform(0.01, 1.0))
        d = int(rng.integers(1, 4))
        net = build_indicator(IndicatorSpec(s, a, d))
        g = random_graph(rng, n_lo=2, n_hi=21, d=d)
        out = gnn_apply(net, g)
        for v, (n, avg, _) in enumerate(neighbor_stats(g)):
            for i in range(d):
                want = indicator_closed_form(s, a, n, None if n == 0 else avg[i])
                assert abs(out[v, i] - want) <= 1e-9
    assert time.perf_counter() - t0 < 10.0


def _sandwich_violations(build, ref_kind):
    rng = rng_from_seed(202)
    violations = 0
    for eps in (0.2, 0.1, 0.05):
        for d in (1, 2, 3):
            net = build(eps, d)
            for _ in range(200):
                g = random_graph(rng, n_hi=50, d=d, feature_hi=1.0)
                out = gnn_apply(net, g)
                for v, (n, avg, mx) in enumerate(neighbor_stats(g)):
                    if n == 0:
                        continue
                    ref = avg if ref_kind == "mean" else mx
                    if (out[v] < ref).any() or (out[v] > ref + eps).any():
                        violations += 1
    return violations


def test_02_mean_sandwich_holds_everywhere():
    t0 = time.perf_counter()
    assert _sandwich_violations(build_mean_approx, "mean") == 0
    assert time.perf_counter() - t0 < 30.0


def test_03_max_sandwich_holds_everywhere():
    t0 = time.perf_counter()
    assert _sandwich_violations(build_max_approx, "max") == 0
    assert time.perf_counter() - t0 < 30.0


def test_04_compiled_sum_models_stay_within_gap(bounded_models):
    rng = rng_from_seed(303)
    eps = 0.25
    t0 = time.perf_counter()
    for kind in ("mean", "max"):
        for source in bounded_models[kind]:
            compiled, _ = compile_to_sum(source, eps)
            for _ in range(100):
                g = random_graph(rng, n_hi=50, d=source.input_dim, feature_hi=1.0)
                assert feature_gap(source, compiled, g) <= eps
    assert time.perf_counter() - t0 < 120.0


def test_05_feature_growth_bounded_and_max_flag_constant(bounded_models):
    ks = (1, 10, 10 ** 3, 10 ** 6)
    stars = {}

    def star(name, k, d):
        # the k = 10^6 graphs dominate the cost, so share them across models
        if (name, k, d) not in stars:
            g = star_sv(k, d) if name == "sv" else star_flag(k, 1.0, d)
            stars[(name, k, d)] = (g, Adjacency(g))
        return stars[(name, k, d)]

    for kind in ("mean", "max"):
        for gnn in bounded_models[kind]:
            bound = growth_bound(gnn)
            for k in ks:
                g, adj = star("sv", k, gnn.input_dim)
                peak = float(np.abs(gnn_apply(gnn, g, canonical=False,
                                              adj=adj)[0]).max())
                assert peak <= bound * (1.0 + 1e-12) + 1e-12

    for gnn in bounded_models["max"]:
        outs = []
        for k in ks:
            g, adj = star("flag", k, gnn.input_dim)
            outs.append(gnn_apply(gnn, g, canonical=False, adj=adj)[0])
        for out in outs[1:]:
            assert np.abs(out - outs[0]).max() <= 1e-12


def test_06_sum_descriptions_validate():
    rng = rng_from_seed(404)
    for _ in range(30):
        gnn = narrow_sum_gnn(rng, 1 + int(rng.integers(0, 2)))
        center_sets = describe(gnn, "star_uc")
        assert center_sets.good
        for family, ps in (("star_uc", center_sets),
                           ("tripartite_sv", describe(gnn, "tripartite_sv"))):
            report = check_description(ps, gnn, family,
                                       k_range=(1, 20), c_range=(1, 20),
                                       rtol=1e-6)
            assert report.ok, (family, report.violations[:3])
        for sets in sum_readout_description(gnn, "tripartite_embed"):
            assert not any(p.has_term(3, 1) for p in sets.polys)


def test_07_detected_pieces_within_bound():
    rng = rng_from_seed(505)
    for _ in range(30):
        gnn = random_mupa_gnn(rng, 1 + int(rng.integers(0, 2)))
        samples = {k: float(gnn_apply(gnn, star_sv(k), canonical=False)[0, 0])
                   for k in range(1, 201)}
        report = detect_pieces(samples, 8)
        assert report.detected_pieces <= piece_bound(gnn)


def test_08_minimax_oracle_agrees():
    rng = rng_from_seed(606)
    # doubling map on three points: best line misses by exactly 1/4
    assert abs(minimax_gap(np.array([1.0, 2.0, 4.0]), 1).gap - 0.25) <= 1e-9

    for _ in range(50):
        degree = int(rng.integers(0, 4))
        coef = rng.uniform(-2.0, 2.0, degree + 1)
        ys = np.arange(float(degree + 1 + int(rng.integers(1, 5))))
        vals = np.polyval(coef[::-1], ys)
        assert abs(minimax_gap(vals, degree).gap) <= 1e-9

    for _ in range(50):
        vals = rng.uniform(-5.0, 5.0, 3)
        got = minimax_gap(vals, 1).gap
        brute, _ = minimax_brute(vals, np.arange(3.0), 1, rounds=6)
        assert abs(got - brute) <= 1e-6
        assert abs(got - minimax3_line_gap(*vals)) <= 1e-6


def test_09_gradients_match_central_differences():
    rng = rng_from_seed(707)
    for kind in ("sum", "mean", "max"):
        clean = 0
        for attempt in range(2000):
            gnn = random_gnn(rng, int(rng.integers(1, 3)),
                             [[kind]] * (1 + attempt % 2), out_dim_last=1)
            g = random_graph(rng, n_lo=3, n_hi=10, d=gnn.input_dim)
            batch = batch_graphs([(g, float(rng.uniform(-1, 1)),
                                   int(rng.integers(0, g.n)))])
            analytic, numeric, away_from_kinks = directional_check(gnn, batch, rng)
            if not away_from_kinks:
                continue
            assert abs(analytic - numeric) <= 1e-4 * max(1.0, abs(analytic))
            clean += 1
            if clean == 100:
                break
        assert clean == 100, "too few kink-free probes for %s" % kind


def test_10_extrapolation_trends(trained_runs):
    uc_mean = trained_runs[("uc", "mean")][0].median()
    uc_sum = trained_runs[("uc", "sum")][0].median()
    sv_dual = trained_runs[("sv", "sum_mean")][0].median()
    sv_sum = trained_runs[("sv", "sum")][0].median()

    assert uc_mean < 0.05
    assert uc_mean < 0.1 * uc_sum
    assert sv_dual < sv_sum
    assert trained_runs["cpu_seconds"] < 20 * 60


def test_11_sum_models_admit_counterexamples(trained_runs):
    budget = SearchBudget.geometric(10 ** 4)
    for gnn in trained_runs[("uc", "sum")][1]:
        hit = counterexample_search(gnn, "star_uc",
                                    lambda k, c: float(c), 0.5, budget)
        assert hit is not None
        k, c, gap = hit
        assert k <= 10 ** 4 and c <= 10 ** 4
        assert gap > 0.5
