import numpy as np
import pytest

from exprlab.families import star_sv
from exprlab.gnn import Aggregation, Gnn, GnnLayer, gnn_apply
from exprlab.neural import Fnn, FnnLayer
from exprlab.pieces import PieceReport, detect_pieces, piece_bound, piece_report_to_dict
from exprlab.sampling import random_fnn


def fixed_dims_gnn(rng, slot_counts, hiddens, widths, input_dim=1):
    layers = []
    p = input_dim
    for slots, hidden, q in zip(slot_counts, hiddens, widths):
        fnn = random_fnn(rng, p * (1 + slots), hidden, q)
        layers.append(GnnLayer(fnn, [Aggregation("sum")] * slots))
        p = q
    return Gnn(layers)


class TestPieceBound:
    def test_single_affine_layer(self, rng):
        # one layer, one dense map with fan-in 2: ((2+1)^1)^1
        gnn = Gnn([GnnLayer(Fnn([FnnLayer(np.ones((1, 2)), np.zeros(1), "identity")]),
                            [Aggregation("sum")])])
        assert piece_bound(gnn) == 3

    def test_two_layers_depth_two_fanin_three(self, rng):
        # widths engineered so every dense fan-in is 3: ((3+1)^2)^2
        gnn = fixed_dims_gnn(rng, [2, 2], [3, 3], [1, 1])
        assert max(fl.w.shape[1] for l in gnn.layers for fl in l.fnn.layers) == 3
        assert piece_bound(gnn) == 256

    def test_bound_at_least_one(self, rng):
        assert piece_bound(fixed_dims_gnn(rng, [1], [1], [1])) >= 1

    def test_all_upa_kinds_accepted(self, rng):
        fnn = random_fnn(rng, 5, 1, 1)
        gnn = Gnn([GnnLayer(fnn, [Aggregation("sum"), Aggregation("mean"),
                                  Aggregation("max"),
                                  Aggregation("upa", coeffs=(0.0, 1.0), mode="of_x")])])
        assert piece_bound(gnn) >= 1


class TestDetectPieces:
    def test_single_quadratic_piece(self):
        samples = {k: float(k * k) for k in range(1, 51)}
        rep = detect_pieces(samples, 2)
        assert rep.detected_pieces == 1
        assert rep.max_degree_used == 2
        assert rep.sample_range == (1, 50)

    def test_relu_kink_gives_two_pieces(self):
        samples = {k: max(k - 10.0, 0.0) * k for k in range(1, 51)}
        rep = detect_pieces(samples, 2)
        assert rep.detected_pieces == 2
        assert rep.max_degree_used == 2

    def test_two_kinks_give_three_pieces(self):
        samples = {k: max(k - 10.0, 0.0) + max(k - 30.0, 0.0) for k in range(1, 51)}
        rep = detect_pieces(samples, 1)
        assert rep.detected_pieces == 3
        assert rep.max_degree_used == 1

    def test_constant_samples(self):
        samples = {k: 4.25 for k in range(0, 20)}
        rep = detect_pieces(samples, 2, bound=7)
        assert rep.detected_pieces == 1
        assert rep.max_degree_used == 0
        assert rep.bound == 7

    def test_validation(self):
        with pytest.raises(ValueError, match="consecutive"):
            detect_pieces({1: 0.0, 3: 1.0, 4: 1.0}, 0)
        with pytest.raises(ValueError, match="span"):
            detect_pieces({k: 0.0 for k in range(5)}, 2)
        with pytest.raises(ValueError, match="positive"):
            PieceReport(None, 0, 0, (1, 5))

    def test_report_serialization(self):
        rep = detect_pieces({k: 1.0 * k for k in range(1, 30)}, 1, bound=16)
        obj = piece_report_to_dict(rep)
        assert obj == {"bound": 16, "detected_pieces": 1,
                       "max_degree_used": 1, "sample_range": [1, 29]}


class TestDetectedWithinBound:
    def star_samples(self, gnn, ks):
        return {k: float(gnn_apply(gnn, star_sv(k))[0, 0]) for k in ks}

    def test_random_sum_models(self, rng):
        for _ in range(8):
            gnn = fixed_dims_gnn(rng, [1, 1],
                                 [int(rng.integers(1, 3)), int(rng.integers(1, 3))],
                                 [int(rng.integers(1, 3)), 1])
            rep = detect_pieces(self.star_samples(gnn, range(1, 46)), 6)
            assert rep.detected_pieces <= piece_bound(gnn)

    def test_random_mixed_upa_models(self, rng):
        kinds = ["sum", "mean", "max"]
        for trial in range(6):
            slot = Aggregation(kinds[trial % 3])
            upa = Aggregation("upa", coeffs=(0.0, 0.5, 0.1), mode="of_bx")
            fnn1 = random_fnn(rng, 3, 1, 2)
            fnn2 = random_fnn(rng, 6, 1, 1)
            gnn = Gnn([GnnLayer(fnn1, [slot, upa]),
                       GnnLayer(fnn2, [slot, upa])])
            rep = detect_pieces(self.star_samples(gnn, range(1, 46)), 8)
            assert rep.detected_pieces <= piece_bound(gnn)
