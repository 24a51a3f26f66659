"""Desk-scale extrapolation experiments on the UC and SV tasks.

UC trains on star graphs whose leaves all carry the value c; the center
must output c.  SV trains on tripartite graphs whose center must output
the number of outer vertices.  Both tasks test extrapolation: the test
grid uses larger k and c than training ever saw.  The only ingredient
varied across models is the aggregation wiring (sum, mean, or the
sum-then-mean combination), so differences in test error are down to the
aggregation alone.

Defaults are sized for a CPU desk run: hidden width 64, train grid
k, c in [1..30], test grid [31..100], 200 epochs, 3 seeds.  The original
protocol (width 256, train [1..100], 500 epochs, 5 seeds) remains
reachable through the same knobs.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .backprop import (batch_graphs, batch_forward, batch_loss, gnn_params,
                       grads_to_arrays, loss_and_grad, set_gnn_params)
from .families import FamilySpec, make_family
from .gnn import Aggregation, Gnn, GnnLayer
from .neural import Fnn, FnnLayer
from .optim import AdamState, adam_step, cosine_lr, params_pack, params_unpack
from .sampling import rng_from_seed
from .util import write_atomic

TASKS = ("uc", "sv")
MODEL_KINDS = ("sum", "mean", "sum_mean")

_TASK_FAMILY = {"uc": "star_uc", "sv": "tripartite_sv"}


def _check_range(name, rng):
    (klo, khi), (clo, chi) = rng
    for lo, hi in ((klo, khi), (clo, chi)):
        if not (isinstance(lo, int) and isinstance(hi, int)):
            raise ValueError("%s bounds must be integers" % name)
        if not 1 <= lo <= hi:
            raise ValueError("%s range [%d..%d] is empty or not positive"
                             % (name, lo, hi))


@dataclass(frozen=True)
class TaskSpec:
    """One experiment cell: task, aggregation wiring, grids and sizes.

    Ranges are inclusive ((k_lo, k_hi), (c_lo, c_hi)).  With model
    'sum_mean' the layers alternate a single slot (sum first, mean
    second); dual_slots instead feeds both slots to every layer.
    """

    task: str = "uc"
    model: str = "sum"
    train_range: tuple = ((1, 30), (1, 30))
    test_range: tuple = ((31, 100), (31, 100))
    hidden_dim: int = 64
    layers: int = 2
    seeds: tuple = (0, 1, 2)
    dual_slots: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError("unknown task %r" % (self.task,))
        if self.model not in MODEL_KINDS:
            raise ValueError("unknown model kind %r" % (self.model,))
        _check_range("train_range", self.train_range)
        _check_range("test_range", self.test_range)
        if self.hidden_dim < 1 or self.layers < 1:
            raise ValueError("hidden_dim and layers must be positive")
        if self.model == "sum_mean" and self.layers != 2:
            raise ValueError("sum_mean wiring is defined for exactly 2 layers")
        if not self.seeds:
            raise ValueError("at least one seed is required")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 100
    lr_candidates: tuple = (1e-3, 1e-4, 1e-5)
    val_fraction: float = 0.05
    smooth_l1_beta: float = 1.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.lr_candidates or any(lr <= 0 for lr in self.lr_candidates):
            raise ValueError("lr_candidates must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.smooth_l1_beta <= 0:
            raise ValueError("smooth_l1_beta must be positive")


def _grid(rng):
    (klo, khi), (clo, chi) = rng
    return [(k, c) for k in range(klo, khi + 1) for c in range(clo, chi + 1)]


def make_dataset(task, split="train"):
    """One graph per (k, c) grid point; the target is c at the center."""
    if split not in ("train", "test"):
        raise ValueError("split must be 'train' or 'test'")
    rng = task.train_range if split == "train" else task.test_range
    family = _TASK_FAMILY[task.task]
    out = []
    for k, c in _grid(rng):
        g = make_family(FamilySpec(family, k=k, c=c))
        out.append((g, float(c), g.target))
    return out


def _slot_kinds(task):
    if task.model in ("sum", "mean"):
        return [[task.model]] * task.layers
    if task.dual_slots:
        return [["sum", "mean"]] * task.layers
    return [["sum"] if t % 2 == 0 else ["mean"] for t in range(task.layers)]


def _mlp(rng, in_dim, hidden, out_dim):
    # He-uniform weights, zero biases
    w1 = rng.uniform(-1.0, 1.0, (hidden, in_dim)) * math.sqrt(6.0 / in_dim)
    w2 = rng.uniform(-1.0, 1.0, (out_dim, hidden)) * math.sqrt(6.0 / hidden)
    return Fnn([FnnLayer(w1, np.zeros(hidden), "relu"),
                FnnLayer(w2, np.zeros(out_dim), "identity")])


def build_model(task, rng):
    """Fresh model for the task: per layer, a 2-layer MLP over the slots."""
    widths = [1] + [task.hidden_dim] * (task.layers - 1) + [1]
    layers = []
    for t, kinds in enumerate(_slot_kinds(task)):
        fnn = _mlp(rng, widths[t] * (1 + len(kinds)), task.hidden_dim, widths[t + 1])
        layers.append(GnnLayer(fnn, [Aggregation(kind) for kind in kinds]))
    return Gnn(layers)


def train(task, cfg, seed):
    """Train one model; returns (best-validation model, history rows).

    Every learning-rate candidate is run from the same initialization and
    the checkpoint with the lowest validation loss across all candidates
    is returned, which is also how the rate itself gets selected.  A
    candidate whose loss goes non-finite is recorded with diverged=True
    and abandoned; if every candidate diverges the run fails.

    History rows are dicts with keys lr, epoch, train_loss, val_loss,
    diverged.  With epochs=0 the initialized model and an empty history
    are returned.
    """
    rng = rng_from_seed(seed)
    data = make_dataset(task, "train")
    order = rng.permutation(len(data))
    n_val = int(round(cfg.val_fraction * len(data)))
    if n_val >= len(data):
        raise ValueError("validation split leaves no training data")
    val_batch = batch_graphs([data[i] for i in order[:n_val]]) if n_val else None
    train_idx = order[n_val:]
    batches = [batch_graphs([data[i] for i in train_idx[lo:lo + cfg.batch_size]])
               for lo in range(0, train_idx.size, cfg.batch_size)]

    model = build_model(task, rng)
    if cfg.epochs == 0:
        return model, []
    init = params_pack(gnn_params(model))
    epoch_orders = [rng.permutation(len(batches)) for _ in range(cfg.epochs)]

    history = []
    best = None  # (val_loss, params, lr)
    templates = gnn_params(model)
    for lr in cfg.lr_candidates:
        set_gnn_params(model, params_unpack(init, templates))
        params = init.copy()
        adam = AdamState.init(init.size)
        total_steps = cfg.epochs * len(batches)
        step = 0
        diverged = False
        for epoch in range(cfg.epochs):
            loss_sum = 0.0
            for b in epoch_orders[epoch]:
                loss, grads, _ = loss_and_grad(model, batches[b], cfg.smooth_l1_beta)
                if not math.isfinite(loss):
                    diverged = True
                    break
                grad = params_pack(grads_to_arrays(grads))
                params = adam_step(adam, params, grad, cosine_lr(lr, step, total_steps))
                set_gnn_params(model, params_unpack(params, templates))
                step += 1
                loss_sum += loss
            train_loss = loss_sum / len(batches)
            if not diverged:
                if val_batch is not None:
                    val_loss, _ = batch_loss(model, val_batch, cfg.smooth_l1_beta)
                else:
                    val_loss = train_loss
                diverged = not math.isfinite(val_loss)
            if diverged:
                history.append({"lr": lr, "epoch": epoch, "train_loss": float("nan"),
                                "val_loss": float("nan"), "diverged": True})
                break
            history.append({"lr": lr, "epoch": epoch, "train_loss": train_loss,
                            "val_loss": val_loss, "diverged": False})
            if best is None or val_loss < best[0]:
                best = (val_loss, params.copy(), lr)
    if best is None:
        raise RuntimeError("training diverged at every learning rate %s"
                           % (tuple(cfg.lr_candidates),))
    set_gnn_params(model, params_unpack(best[1], templates))
    return model, history


def selected_lr(history):
    """Learning rate of the best-validation epoch in a history."""
    rows = [r for r in history if not r["diverged"]]
    if not rows:
        raise ValueError("history holds no finished epoch")
    return min(rows, key=lambda r: r["val_loss"])["lr"]


class ReTable:
    """Relative errors keyed by (k, c, seed), with per-point aggregates."""

    def __init__(self, entries=None):
        self.entries = dict(entries) if entries else {}

    def add(self, k, c, seed, re):
        if re < 0:
            raise ValueError("relative error must be nonnegative")
        self.entries[(int(k), int(c), int(seed))] = float(re)

    def merge(self, other):
        self.entries.update(other.entries)
        return self

    def per_point(self):
        """Map (k, c) -> (median, mean) over seeds."""
        buckets = {}
        for (k, c, _), re in self.entries.items():
            buckets.setdefault((k, c), []).append(re)
        return {kc: (float(np.median(v)), float(np.mean(v)))
                for kc, v in buckets.items()}

    def median(self):
        return float(np.median(list(self.entries.values())))

    def mean(self):
        return float(np.mean(list(self.entries.values())))

    def __len__(self):
        return len(self.entries)


def relative_error(pred, truth):
    return abs(pred - truth) / abs(truth)


def evaluate_re(gnn, grid, task, seed=0, chunk=64):
    """Relative error of the center prediction over a (k, c) grid.

    task may be a TaskSpec or a plain task name; evaluation is pure and
    processes the grid in chunks of graphs batched together.
    """
    name = task.task if isinstance(task, TaskSpec) else task
    if name not in TASKS:
        raise ValueError("unknown task %r" % (name,))
    _check_range("grid", grid)
    family = _TASK_FAMILY[name]
    pairs = _grid(grid)
    table = ReTable()
    for lo in range(0, len(pairs), chunk):
        part = pairs[lo:lo + chunk]
        samples = []
        for k, c in part:
            g = make_family(FamilySpec(family, k=k, c=c))
            samples.append((g, float(c), g.target))
        batch = batch_graphs(samples)
        out, _ = batch_forward(gnn, batch)
        preds = out[batch.centers, 0]
        for (k, c), pred in zip(part, preds):
            table.add(k, c, seed, relative_error(float(pred), float(c)))
    return table


METRICS_COLUMNS = ("task", "model", "seed", "k", "c", "re")
HISTORY_COLUMNS = ("lr", "epoch", "train_loss", "val_loss", "diverged")


def model_label(gnn):
    """Short label of a model's aggregation wiring, for metrics rows."""
    per_layer = ["_".join(a.kind for a in layer.aggs) for layer in gnn.layers]
    return "_".join(dict.fromkeys(per_layer))


def write_metrics_csv(path, table, task, model):
    """Metrics rows task,model,seed,k,c,re in sorted key order."""
    rows = [(task, model, seed, k, c, "%.12g" % re)
            for (k, c, seed), re in sorted(table.entries.items(),
                                           key=lambda kv: (kv[0][2],) + kv[0][:2])]
    _write_csv(path, METRICS_COLUMNS, rows)


def write_history_csv(path, history):
    rows = [("%g" % r["lr"], r["epoch"], "%.12g" % r["train_loss"],
             "%.12g" % r["val_loss"], int(r["diverged"])) for r in history]
    _write_csv(path, HISTORY_COLUMNS, rows)


def _write_csv(path, header, rows):
    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    write_atomic(path, buf.getvalue())


def read_metrics_csv(path):
    """Parse a metrics CSV back into (task, model, ReTable) triples."""
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(METRICS_COLUMNS):
            raise ValueError("unexpected metrics header %s in %s"
                             % (reader.fieldnames, path))
        for row in reader:
            key = (row["task"], row["model"])
            groups.setdefault(key, ReTable()).add(
                int(row["k"]), int(row["c"]), int(row["seed"]), float(row["re"]))
    return [(task, model, table) for (task, model), table in sorted(groups.items())]
