"""Command-line entry point wiring all stages together.

Subcommands: gen-graphs, build-dataset, normalize, split, train, predict,
optimize, eval, pipeline. The global seed defaults to the QSEER_SEED
environment variable; every stage derives its own seeds deterministically, so
a full pipeline run is a pure function of (config, seed).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, dataset, gnn
from . import graph as graphmod
from . import qaoa
from .errors import ParameterError, QseerError

__version__ = "0.1.0"

log = logging.getLogger("qseer")


def _default_seed() -> int:
    return int(os.environ.get("QSEER_SEED", "0"))


def parse_weights(spec: str):
    """'none' | 'uniform:LO,HI' | 'exp:RATE' -> internal weight spec."""
    if spec == "none":
        return "none"
    if spec.startswith("uniform:"):
        lo, hi = (float(x) for x in spec.split(":", 1)[1].split(","))
        return ("uniform", lo, hi)
    if spec.startswith("exp:"):
        return ("exp", float(spec.split(":", 1)[1]))
    raise ParameterError(f"bad weight spec {spec!r} (none|uniform:LO,HI|exp:RATE)")


# ----------------------------------------------------------------------------
# Stage implementations (shared between subcommands and `pipeline`)
# ----------------------------------------------------------------------------


def stage_gen_graphs(kind, n, count, prob, degree, weights, seed):
    if kind == "enum":
        return graphmod.enumerate_connected_nonisomorphic(n)
    gkind = {"er": "erdos_renyi", "regular": "regular"}.get(kind)
    if gkind is None:
        raise ParameterError(f"unknown graph kind {kind!r} (er|regular|enum)")
    out = []
    for i in range(count):
        out.append(graphmod.gen_random(gkind, n, prob=prob, degree=degree,
                                       weights=weights,
                                       seed=dataset.stage_seed(seed, "gen", kind, n, i)))
    return out


def _load_model_scheme(kind, path):
    return bench.Scheme(kind=kind, model=gnn.load(path))


def _build_schemes(names, records, seed, model_path, plain_model_path, dt):
    train_recs = [r for r in records if r.split == "train"] or records
    schemes = []
    for name in names:
        if name == "random":
            schemes.append(bench.Scheme(kind="random", seed=seed))
        elif name == "transfer":
            schemes.append(bench.Scheme(kind="transfer",
                                        medians=bench.transfer_medians(train_recs)))
        elif name == "labeled":
            schemes.append(bench.Scheme(kind="labeled", labels=bench.label_index(records)))
        elif name in ("gnn", "plain_gnn"):
            if not plain_model_path:
                raise ParameterError("scheme 'gnn' needs --plain-model")
            schemes.append(_load_model_scheme("plain_gnn", plain_model_path))
        elif name == "qseer":
            if not model_path:
                raise ParameterError("scheme 'qseer' needs --model")
            schemes.append(_load_model_scheme("qseer", model_path))
        elif name == "linear_ramp":
            schemes.append(bench.Scheme(kind="linear_ramp", dt=dt))
        else:
            raise ParameterError(f"unknown scheme {name!r}")
    return schemes


def stage_eval(records, split_name, scheme_names, seed, iters, lr, out_dir,
               model_path=None, plain_model_path=None, dt=0.75, bins=40,
               raw_records=None, render_svg=True):
    schemes = _build_schemes(scheme_names, records, seed, model_path,
                             plain_model_path, dt)
    subset = [r for r in records if r.split == split_name] if split_name else records
    if not subset:
        raise ParameterError(f"no records in split {split_name!r}")
    report = bench.EvalReport()
    for scheme in schemes:
        log.info("evaluating scheme %s on %d records", scheme.kind, len(subset))
        report.initial_rows.extend(bench.eval_initial_ar(scheme, subset))
        conv, stab = bench.eval_convergence(scheme, subset, iters=iters, lr=lr)
        report.convergence_rows.extend(conv)
        report.stability_rows.extend(stab)
    report.aggregates = bench.aggregate_initial(report.initial_rows)
    bench.write_report(report, out_dir)
    pre = raw_records if raw_records is not None else subset
    post = subset if all(r.normalized for r in subset) else dataset.normalize_all(subset, seed)
    bench.emit_param_histograms(pre, post, bins, out_dir, render_svg=render_svg)
    return report


def stage_train(records, epochs, lr0, batch, p_max, seed, plain=False):
    """Train the predictor (or the plain baseline: full output ranges, edge
    weights ignored) on the train split, validating on the val split."""
    train_recs = [r for r in records if r.split == "train"]
    val_recs = [r for r in records if r.split == "val"]
    if plain:
        model = gnn.new_model(p_max=p_max, seed=seed, gamma_scale=np.pi,
                              beta_scale=np.pi / 2, use_edge_weights=False)
    else:
        model = gnn.new_model(p_max=p_max, seed=seed)
    cfg = gnn.TrainConfig(epochs=epochs, lr0=lr0, batch=batch, seed=seed)
    return gnn.train(model, train_recs, val_recs, cfg)


# ----------------------------------------------------------------------------
# Subcommand handlers
# ----------------------------------------------------------------------------


def cmd_gen_graphs(args):
    graphs = stage_gen_graphs(args.kind, args.n, args.count, args.prob,
                              args.degree, parse_weights(args.weights), args.seed)
    graphmod.write_graphs(graphs, args.out)
    log.info("wrote %d graphs to %s", len(graphs), args.out)


def cmd_build_dataset(args):
    graphs = graphmod.read_graphs(args.graphs)
    depths = [int(x) for x in args.depths.split(",")]
    starts = [int(x) for x in args.starts.split(",")]
    if len(starts) != len(depths):
        raise ParameterError("--starts must list one budget per depth")
    records = dataset.build(graphs, depths, dict(zip(depths, starts)),
                            seed=args.seed, lr=args.lr, iters=args.iters)
    dataset.write_records(records, args.out)
    log.info("wrote %d records to %s", len(records), args.out)


def cmd_normalize(args):
    records = dataset.read_records(getattr(args, "in"))
    normalized, report = dataset.normalize_with_report(records, seed=args.seed)
    dataset.write_records(normalized, args.out)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2)
    log.info("normalized %d/%d records", report["total"]["verified"],
             report["total"]["records"])


def cmd_split(args):
    records = dataset.read_records(getattr(args, "in"))
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if len(ratios) != 3:
        raise ParameterError("--ratios must be train,val,test")
    records = dataset.split(records, dataset.SplitSpec(ratios=ratios, seed=args.seed))
    dataset.write_records(records, args.out or getattr(args, "in"))


def cmd_train(args):
    records = dataset.read_records(args.dataset)
    model, history = stage_train(records, args.epochs, args.lr, args.batch,
                                 args.pmax, args.seed, plain=args.plain)
    gnn.save(model, args.out)
    if args.history:
        with open(args.history, "w") as fh:
            json.dump(history, fh, indent=2)
    log.info("final val MSE %.6g", history[-1]["val_mse"])


def cmd_predict(args):
    model = gnn.load(args.model)
    for g in graphmod.read_graphs(args.graph):
        pv = gnn.forward(model, g, args.p)
        print(json.dumps({"graph_id": g.id, "p": args.p,
                          "gamma": list(pv.gamma), "beta": list(pv.beta)}))


def cmd_optimize(args):
    graphs = graphmod.read_graphs(args.graph)
    with open(args.out, "w") as fh:
        for g in graphs:
            res = qaoa.multistart_optimize(g, args.p, args.starts,
                                           seed=dataset.stage_seed(args.seed, g.id, args.p),
                                           lr=args.lr, iters=args.iters)
            fh.write(json.dumps({
                "graph_id": g.id, "p": args.p,
                "gamma": list(res.params.gamma), "beta": list(res.params.beta),
                "cost": res.cost, "ar": res.ar, "iterations": res.iterations,
                "trace": res.trace,
            }) + "\n")
    log.info("optimized %d graphs to %s", len(graphs), args.out)


def cmd_eval(args):
    records = dataset.read_records(args.dataset)
    raw = dataset.read_records(args.raw_dataset) if args.raw_dataset else None
    scheme_names = args.schemes.split(",")
    stage_eval(records, args.split, scheme_names, args.seed, args.iters, args.lr,
               args.out_dir, model_path=args.model, plain_model_path=args.plain_model,
               dt=args.dt, bins=args.bins, raw_records=raw)


def cmd_pipeline(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    seed = args.seed if args.seed is not None else cfg.get("seed", _default_seed())
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)

    gcfg = cfg.get("graphs", {})
    graphs = []
    for n in gcfg.get("enum_n", []):
        graphs.extend(graphmod.enumerate_connected_nonisomorphic(n))
    for spec in gcfg.get("random", []):
        graphs.extend(stage_gen_graphs(
            spec["kind"], spec["n"], spec.get("count", 1), spec.get("prob"),
            spec.get("degree"), parse_weights(spec.get("weights", "none")),
            dataset.stage_seed(seed, "graphs")))
    graphmod.write_graphs(graphs, out / "graphs.jsonl")
    log.info("pipeline: %d graphs", len(graphs))

    dcfg = cfg.get("dataset", {})
    depths = dcfg.get("depths", [1, 2, 3])
    starts = {int(k): v for k, v in dcfg.get("starts", {}).items()} or None
    records = dataset.build(graphs, depths, starts,
                            seed=dataset.stage_seed(seed, "dataset"),
                            lr=dcfg.get("lr", 0.01), iters=dcfg.get("iters", 100))
    dataset.write_records(records, out / "dataset.jsonl")

    normalized, report = dataset.normalize_with_report(
        records, seed=dataset.stage_seed(seed, "normalize"))
    with open(out / "normalize_report.json", "w") as fh:
        json.dump(report, fh, indent=2)

    scfg = cfg.get("split", {})
    normalized = dataset.split(normalized, dataset.SplitSpec(
        ratios=tuple(scfg.get("ratios", [0.8, 0.1, 0.1])),
        seed=dataset.stage_seed(seed, "split")))
    dataset.write_records(normalized, out / "normalized.jsonl")

    tcfg = cfg.get("train", {})
    model, history = stage_train(normalized, tcfg.get("epochs", 20),
                                 tcfg.get("lr0", 0.01), tcfg.get("batch", 32),
                                 tcfg.get("pmax", 4),
                                 dataset.stage_seed(seed, "train"))
    gnn.save(model, out / "model.json")
    with open(out / "train_history.json", "w") as fh:
        json.dump(history, fh, indent=2)

    plain_needed = any(s in ("gnn", "plain_gnn")
                       for s in cfg.get("eval", {}).get("schemes", []))
    if plain_needed:
        raw_split = dataset.split(records, dataset.SplitSpec(
            ratios=tuple(scfg.get("ratios", [0.8, 0.1, 0.1])),
            seed=dataset.stage_seed(seed, "split")))
        plain_model, _ = stage_train(raw_split, tcfg.get("epochs", 20),
                                     tcfg.get("lr0", 0.01), tcfg.get("batch", 32),
                                     tcfg.get("pmax", 4),
                                     dataset.stage_seed(seed, "train_plain"), plain=True)
        gnn.save(plain_model, out / "plain_model.json")

    ecfg = cfg.get("eval", {})
    stage_eval(normalized, ecfg.get("split", "test"), ecfg.get("schemes", ["random"]),
               dataset.stage_seed(seed, "eval"), ecfg.get("iters", 100),
               ecfg.get("lr", 0.01), out / "eval",
               model_path=out / "model.json",
               plain_model_path=(out / "plain_model.json") if plain_needed else None,
               dt=ecfg.get("dt", 0.75), bins=ecfg.get("bins", 40), raw_records=records)
    log.info("pipeline complete: %s", out)


# ----------------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qseer", description=__doc__)
    ap.add_argument("--version", action="version", version=f"qseer {__version__}")
    ap.add_argument("--verbose", action="store_true")
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--jobs", type=int, default=1,
                    help="worker cap (stages currently run sequentially)")
    sub = ap.add_subparsers(dest="command", required=True)

    seed_kw = dict(type=int, default=_default_seed())

    p = sub.add_parser("gen-graphs", help="generate a graph file")
    p.add_argument("--kind", required=True, choices=["er", "regular", "enum"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--prob", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--weights", default="none")
    p.add_argument("--seed", **seed_kw)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_graphs)

    p = sub.add_parser("build-dataset", help="label graphs with multi-start optima")
    p.add_argument("--graphs", required=True)
    p.add_argument("--depths", default="1,2,3")
    p.add_argument("--starts", default="20,40,100")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", **seed_kw)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("normalize", help="canonicalize dataset angles")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--seed", **seed_kw)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("split", help="assign train/val/test splits")
    p.add_argument("--in", required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", **seed_kw)
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the angle predictor")
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--pmax", type=int, default=4)
    p.add_argument("--plain", action="store_true",
                   help="train the baseline without normalization ranges or edge weights")
    p.add_argument("--seed", **seed_kw)
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict angles for graphs")
    p.add_argument("--model", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--p", type=int, required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("optimize", help="multi-start optimize graphs")
    p.add_argument("--graph", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", **seed_kw)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", help="benchmark initialization schemes")
    p.add_argument("--schemes", default="random,transfer,labeled")
    p.add_argument("--dataset", required=True)
    p.add_argument("--raw-dataset", help="unnormalized records for 'pre' histograms")
    p.add_argument("--split", default="test")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--model", help="qseer model file")
    p.add_argument("--plain-model", help="baseline model file")
    p.add_argument("--dt", type=float, default=0.75)
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--seed", **seed_kw)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run gen->build->normalize->split->train->eval")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_pipeline)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else (logging.ERROR if args.quiet else logging.INFO)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (QseerError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
