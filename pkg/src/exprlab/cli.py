"""Command line for the laboratory.

Verbs: gen (graphs), compile (mean/max models to sum models), verify
(sandwich / growth / emulation checks), analyze (describe / pieces /
minimax / counterexample), train, eval, report.  Every verb is a thin
shell over library calls; results go to --out when given (written
atomically) and to stdout as JSON otherwise.  Exit codes: 0 success,
1 runtime failure (including failed verification), 2 argument errors.
All randomness funnels through --seed.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .constructions import (build_max_approx, build_mean_approx,
                            compile_to_sum, feature_gap, growth_bound)
from .describe import check_description, describe, polyset_to_dict
from .experiments import (TaskSpec, TrainConfig, evaluate_re, model_label,
                          selected_lr, train, write_history_csv,
                          write_metrics_csv)
from .families import FAMILY_NAMES, FamilySpec, graph_to_dict, make_family, save_graph
from .gnn import Aggregation, aggregate, gnn_apply, load_gnn, save_gnn
from .minimax import gap_result_to_dict, minimax_gap
from .pieces import detect_pieces, piece_bound, piece_report_to_dict
from .report import write_report
from .sampling import random_graph, rng_from_seed
from .search import SearchBudget, counterexample_search
from .util import write_atomic


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _parse_square_range(text):
    """'lo:hi' for both k and c, or 'klo:khi,clo:chi'."""
    def one(part):
        lo, sep, hi = part.partition(":")
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))

    parts = text.split(",")
    if len(parts) == 1:
        r = one(parts[0])
        return (r, r)
    if len(parts) == 2:
        return (one(parts[0]), one(parts[1]))
    raise ValueError("range %r is not 'lo:hi' or 'klo:khi,clo:chi'" % (text,))


def _neighbor_features(g):
    neigh = [[] for _ in range(g.n)]
    for a, b in g.edges:
        neigh[a].append(b)
        neigh[b].append(a)
    return [g.features[idx] for idx in neigh]


# ---------------------------------------------------------------------------
# verbs

def _cmd_gen(args):
    spec = FamilySpec(args.family, k=args.k, c=args.c, b=args.b)
    g = make_family(spec)
    if args.out:
        save_graph(g, args.out)
    else:
        _emit(graph_to_dict(g))
    return 0


def _cmd_compile(args):
    source = load_gnn(args.model)
    compiled, rep = compile_to_sum(source, args.eps, args.max_pieces)
    if args.out:
        save_gnn(compiled, args.out)
    report = asdict(rep)
    report["out"] = args.out
    _emit(report)
    return 0


def _verify_sandwich(args, rng):
    kind = args.agg
    net = (build_mean_approx if kind == "mean" else build_max_approx)(args.eps, args.dim)
    ref_agg = Aggregation(kind)
    low = high = -float("inf")
    violations = 0
    for _ in range(args.graphs):
        g = random_graph(rng, n_hi=args.n_hi, d=args.dim, feature_hi=1.0)
        out = gnn_apply(net, g)
        for v, feats in enumerate(_neighbor_features(g)):
            if not len(feats):
                continue
            ref = aggregate(ref_agg, np.asarray(feats))
            low = max(low, float((ref - out[v]).max()))
            high = max(high, float((out[v] - ref - args.eps).max()))
            if (out[v] < ref).any() or (out[v] > ref + args.eps).any():
                violations += 1
    return {"agg": kind, "eps": args.eps, "dim": args.dim,
            "graphs": args.graphs, "violations": violations,
            "max_low_margin": low, "max_high_margin": high,
            "ok": violations == 0}


def _verify_growth(args, rng):
    gnn = load_gnn(args.model)
    bound = growth_bound(gnn)
    ks = [int(k) for k in args.ks.split(",")]
    peaks = {}
    ok = True
    for k in ks:
        g = make_family(FamilySpec("star_sv", k=k))
        peak = float(np.abs(gnn_apply(gnn, g)).max())
        peaks[str(k)] = peak
        ok = ok and peak <= bound * (1.0 + 1e-12) + 1e-12
    return {"model": args.model, "bound": bound, "peaks": peaks, "ok": ok}


def _verify_emulation(args, rng):
    source = load_gnn(args.model)
    compiled, rep = compile_to_sum(source, args.eps, args.max_pieces)
    worst = 0.0
    for _ in range(args.graphs):
        g = random_graph(rng, n_hi=args.n_hi, d=source.input_dim, feature_hi=1.0)
        worst = max(worst, feature_gap(source, compiled, g))
    out = asdict(rep)
    out.update({"model": args.model, "graphs": args.graphs,
                "max_sampled_gap": worst, "ok": worst <= args.eps})
    return out


def _cmd_verify(args):
    rng = rng_from_seed(args.seed)
    fn = {"sandwich": _verify_sandwich, "growth": _verify_growth,
          "emulation": _verify_emulation}[args.kind]
    report = fn(args, rng)
    report["kind"] = args.kind
    _emit(report, args.out)
    return 0 if report["ok"] else 1


def _analyze_minimax(args):
    values = np.array([float(v) for v in args.values.split(",")])
    res = minimax_gap(values, args.degree, start=args.start)
    return gap_result_to_dict(res)


def _analyze_describe(args):
    gnn = load_gnn(args.model)
    ps = describe(gnn, args.family, cap=args.cap)
    out = polyset_to_dict(ps)
    report = check_description(ps, gnn, args.family)
    out["checked_points"] = report.n_points
    out["violations"] = len(report.violations)
    return out


def _analyze_pieces(args):
    gnn = load_gnn(args.model)
    samples = {k: float(gnn_apply(gnn, make_family(
        FamilySpec(args.family, k=k, c=args.c, b=args.b)))[0, args.coord])
        for k in range(args.k_lo, args.k_hi + 1)}
    rep = detect_pieces(samples, args.max_degree, bound=piece_bound(gnn))
    out = piece_report_to_dict(rep)
    out["k_lo"], out["k_hi"] = args.k_lo, args.k_hi
    return out


def _analyze_counterexample(args):
    gnn = load_gnn(args.model)
    target = (lambda k, c: float(c)) if args.target == "c" else (lambda k, c: 0.0)
    budget = SearchBudget.geometric(args.limit)
    hit = counterexample_search(gnn, args.family, target, args.eps, budget)
    if hit is None:
        return {"found": False, "eps": args.eps, "limit": args.limit}
    k, c, gap = hit
    return {"found": True, "eps": args.eps, "k": k, "c": c, "gap": gap}


def _cmd_analyze(args):
    fn = {"minimax": _analyze_minimax, "describe": _analyze_describe,
          "pieces": _analyze_pieces, "counterexample": _analyze_counterexample}[args.kind]
    report = fn(args)
    report["kind"] = args.kind
    _emit(report, args.out)
    return 0


def _cmd_train(args):
    task = TaskSpec(task=args.task, model=args.model,
                    train_range=_parse_square_range(args.train),
                    test_range=_parse_square_range(args.test),
                    hidden_dim=args.hidden_dim, layers=args.layers,
                    seeds=(args.seed,), dual_slots=args.dual_slots)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      lr_candidates=tuple(float(v) for v in args.lrs.split(",")),
                      val_fraction=args.val_fraction,
                      smooth_l1_beta=args.beta)
    model, history = train(task, cfg, args.seed)
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.json")
    save_gnn(model, model_path)
    write_history_csv(os.path.join(args.out, "history.csv"), history)
    lr = selected_lr(history) if history else None
    meta = dict(task=args.task, model=args.model, seed=args.seed,
                epochs=args.epochs, batch_size=args.batch_size,
                hidden_dim=args.hidden_dim, layers=args.layers,
                train_range=args.train, test_range=args.test,
                lr_candidates=args.lrs, val_fraction=args.val_fraction,
                smooth_l1_beta=args.beta, dual_slots=args.dual_slots,
                selected_lr=lr)
    write_atomic(os.path.join(args.out, "config.txt"),
                 "".join("%s=%s\n" % (k, v) for k, v in sorted(meta.items())))
    _emit({"out": args.out, "selected_lr": lr, "epochs_recorded": len(history)})
    return 0


def _cmd_eval(args):
    gnn = load_gnn(args.model)
    grid = _parse_square_range(args.grid)
    table = evaluate_re(gnn, grid, args.task, seed=args.seed)
    label = args.label or model_label(gnn)
    write_metrics_csv(args.out, table, args.task, label)
    _emit({"out": args.out, "n": len(table),
           "median_re": table.median(), "mean_re": table.mean()})
    return 0


def _cmd_report(args):
    ks = [int(k) for k in args.ks.split(",")] if args.ks else None
    written = write_report(args.runs, args.out, svg=args.svg, ks=ks)
    _emit({"out": args.out, "written": written})
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser():
    parser = argparse.ArgumentParser(
        prog="exprlab",
        description="GNN aggregation expressivity laboratory")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen", help="generate a family graph")
    p.add_argument("--family", required=True, choices=FAMILY_NAMES)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--c", type=int)
    p.add_argument("--b", type=float)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("compile", help="compile a mean/max model to sum form")
    p.add_argument("--model", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--max-pieces", type=int, default=500000)
    p.add_argument("--out", help="path for the compiled model JSON")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("verify", help="run a randomized bound check")
    p.add_argument("--kind", required=True,
                   choices=("sandwich", "growth", "emulation"))
    p.add_argument("--model", help="model JSON (growth, emulation)")
    p.add_argument("--agg", choices=("mean", "max"), default="mean")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--graphs", type=int, default=50)
    p.add_argument("--n-hi", type=int, default=30)
    p.add_argument("--ks", default="1,10,1000")
    p.add_argument("--max-pieces", type=int, default=500000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("analyze", help="symbolic and numeric analyses")
    p.add_argument("--kind", required=True,
                   choices=("describe", "pieces", "minimax", "counterexample"))
    p.add_argument("--model", help="model JSON")
    p.add_argument("--family", default="star_sv")
    p.add_argument("--cap", type=int, default=100000)
    p.add_argument("--values", help="comma-separated sample values (minimax)")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--k-lo", type=int, default=1)
    p.add_argument("--k-hi", type=int, default=120)
    p.add_argument("--c", type=int)
    p.add_argument("--b", type=float)
    p.add_argument("--coord", type=int, default=0)
    p.add_argument("--max-degree", type=int, default=6)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--target", choices=("c", "zero"), default="c")
    p.add_argument("--limit", type=int, default=10000)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("train", help="train a task model")
    p.add_argument("--task", required=True, choices=("uc", "sv"))
    p.add_argument("--model", required=True, choices=("sum", "mean", "sum_mean"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--train", default="1:30", help="train range lo:hi[,lo:hi]")
    p.add_argument("--test", default="31:100", help="test range lo:hi[,lo:hi]")
    p.add_argument("--lrs", default="1e-3,1e-4,1e-5")
    p.add_argument("--val-fraction", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--dual-slots", action="store_true")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="relative error of a model over a grid")
    p.add_argument("--model", required=True)
    p.add_argument("--task", required=True, choices=("uc", "sv"))
    p.add_argument("--grid", required=True, help="lo:hi[,lo:hi]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", help="model column value (default: wiring label)")
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="aggregate a run directory")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--ks", help="limit SVGs to these k values, comma-separated")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # argparse errors already exited with 2
        print("error: %s" % (exc,), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
