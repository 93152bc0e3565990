"""Initialization schemes and the evaluation protocol: initial approximation
ratios, convergence traces, depth sweeps, and parameter histograms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dataset import DatasetRecord, stage_seed
from .errors import ParameterError, UnavailableError
from .gnn import GnnModel, forward
from .graph import Graph, max_cut_bruteforce, mean_abs_weight
from .qaoa import ParamVector, adam_optimize, linear_ramp_init

SCHEME_KINDS = ("random", "transfer", "labeled", "plain_gnn", "qseer", "linear_ramp")
STABILITY_FRACTION = 0.01  # AR within 1% of the final-iteration AR

__all__ = ["Scheme", "EvalReport", "transfer_medians", "init_params",
           "eval_initial_ar", "eval_convergence", "depth_sweep",
           "emit_param_histograms", "graphs_to_eval_records", "write_report"]


@dataclass
class Scheme:
    kind: str
    seed: int = 0
    model: GnnModel | None = None                       # plain_gnn / qseer
    medians: dict[int, tuple[tuple, tuple]] | None = None  # transfer: p -> (gamma, beta)
    labels: dict[tuple[str, int], DatasetRecord] | None = None  # labeled
    dt: float = 0.75                                    # linear_ramp

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ParameterError(f"unknown scheme kind {self.kind!r}")
        needs = {"transfer": self.medians, "labeled": self.labels,
                 "plain_gnn": self.model, "qseer": self.model}
        if self.kind in needs and needs[self.kind] is None:
            raise ParameterError(f"scheme {self.kind!r} is missing its required config")


@dataclass
class EvalReport:
    initial_rows: list[dict] = field(default_factory=list)
    convergence_rows: list[dict] = field(default_factory=list)
    stability_rows: list[dict] = field(default_factory=list)
    aggregates: list[dict] = field(default_factory=list)


def transfer_medians(records, key: str = "depth") -> dict:
    """Per-index medians of stored optimal angles, grouped by depth (default)
    or by (depth, regular degree) with a depth-level fallback."""
    from .graph import regular_degree
    groups: dict = {}
    for rec in records:
        keys = [rec.depth]
        if key == "degree":
            deg = regular_degree(rec.graph)
            if deg is not None:
                keys.append((rec.depth, deg))
        for k in keys:
            groups.setdefault(k, ([], []))
            groups[k][0].append(rec.gamma)
            groups[k][1].append(rec.beta)
    return {k: (tuple(np.median(np.array(gs), axis=0)), tuple(np.median(np.array(bs), axis=0)))
            for k, (gs, bs) in groups.items()}


def label_index(records) -> dict[tuple[str, int], DatasetRecord]:
    return {(rec.graph_id, rec.depth): rec for rec in records}


def init_params(scheme: Scheme, g: Graph, p: int) -> ParamVector:
    """Initialization angles for one circuit under the given scheme."""
    if scheme.kind == "random":
        rng = np.random.default_rng(stage_seed(scheme.seed, "random", g.id, p))
        return ParamVector(gamma=tuple(rng.uniform(-np.pi, np.pi, p)),
                           beta=tuple(rng.uniform(-np.pi / 2, np.pi / 2, p)))
    if scheme.kind == "transfer":
        if p not in scheme.medians:
            raise UnavailableError(f"no transfer medians stored for depth {p}")
        gamma, beta = scheme.medians[p]
        if not g.is_unweighted():
            gamma = tuple(x / mean_abs_weight(g) for x in gamma)
        return ParamVector(gamma=gamma, beta=beta)
    if scheme.kind == "labeled":
        rec = scheme.labels.get((g.id, p))
        if rec is None:
            raise UnavailableError(f"no stored optimum for graph {g.id} at depth {p}")
        return rec.params
    if scheme.kind in ("plain_gnn", "qseer"):
        return forward(scheme.model, g, p)
    return linear_ramp_init(p, scheme.dt)


def graphs_to_eval_records(graphs, depths) -> list[DatasetRecord]:
    """Unlabeled evaluation records (cmax computed, no stored optimum)."""
    out = []
    for g in graphs:
        cmax = max_cut_bruteforce(g)
        for p in depths:
            out.append(DatasetRecord(graph_id=g.id, graph=g, depth=p,
                                     gamma=(), beta=(), cost=float("nan"),
                                     cmax=cmax, ar=float("nan")))
    return out


def eval_initial_ar(scheme: Scheme, records) -> list[dict]:
    """AR of the scheme's initialization with no optimization steps."""
    from .qaoa import expectation
    rows = []
    for rec in sorted(records, key=lambda r: (r.graph_id, r.depth)):
        if rec.cmax <= 0:
            raise ParameterError(f"record {rec.graph_id} has non-positive cmax")
        params = init_params(scheme, rec.graph, rec.depth)
        ar = expectation(rec.graph, params) / rec.cmax
        rows.append({"scheme": scheme.kind, "graph_id": rec.graph_id,
                     "p": rec.depth, "ar": ar})
    return rows


def _iterations_to_stability(ars: np.ndarray) -> int:
    final = ars[-1]
    tol = STABILITY_FRACTION * max(abs(final), 1e-12)
    close = np.abs(ars - final) <= tol
    return int(np.argmax(close))


def eval_convergence(scheme: Scheme, records, iters: int = 100, lr: float = 0.01):
    """Full Adam trace per record plus iterations-to-stability rows."""
    conv_rows, stab_rows = [], []
    for rec in sorted(records, key=lambda r: (r.graph_id, r.depth)):
        params = init_params(scheme, rec.graph, rec.depth)
        res = adam_optimize(rec.graph, params, lr=lr, iters=iters, cmax=rec.cmax)
        ars = np.array([f for _, f in res.trace]) / rec.cmax
        for i, f in res.trace:
            conv_rows.append({"scheme": scheme.kind, "graph_id": rec.graph_id,
                              "p": rec.depth, "iter": i, "F": f, "ar": f / rec.cmax})
        stab_rows.append({"scheme": scheme.kind, "graph_id": rec.graph_id,
                          "p": rec.depth, "iterations_to_stability": _iterations_to_stability(ars)})
    return conv_rows, stab_rows


def aggregate_initial(rows) -> list[dict]:
    """Min/mean/max initial AR per (scheme, depth), recomputable from the rows."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["scheme"], r["p"]), []).append(r["ar"])
    out = []
    for (scheme, p), ars in sorted(groups.items()):
        out.append({"scheme": scheme, "p": p, "count": len(ars),
                    "min_ar": float(np.min(ars)), "mean_ar": float(np.mean(ars)),
                    "max_ar": float(np.max(ars))})
    return out


def depth_sweep(schemes, graphs, depths=(1, 2, 3)) -> EvalReport:
    """Per-depth initial-AR aggregates per scheme on (typically unseen) graphs."""
    records = graphs_to_eval_records(graphs, depths)
    report = EvalReport()
    for scheme in schemes:
        report.initial_rows.extend(eval_initial_ar(scheme, records))
    report.aggregates = aggregate_initial(report.initial_rows)
    return report


# ----------------------------------------------------------------------------
# Histograms and file emission
# ----------------------------------------------------------------------------


def _hist2d(records, p, bins):
    angles = [(gm, bt) for rec in records if rec.depth == p
              for gm, bt in zip(rec.gamma, rec.beta)]
    g = np.array([a[0] for a in angles]) if angles else np.zeros(0)
    b = np.array([a[1] for a in angles]) if angles else np.zeros(0)
    counts, ge, be = np.histogram2d(
        g, b, bins=bins, range=[[-np.pi, np.pi], [-np.pi / 2, np.pi / 2]])
    return counts, ge, be


def _write_hist_csv(path, counts, ge, be):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["gamma_lo", "gamma_hi", "beta_lo", "beta_hi", "count"])
        for i in range(counts.shape[0]):
            for j in range(counts.shape[1]):
                wr.writerow([repr(ge[i]), repr(ge[i + 1]), repr(be[j]), repr(be[j + 1]),
                             int(counts[i, j])])


def _render_hist_svg(path, counts, ge, be, title):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    # fixed hashsalt and no date metadata keep the bytes reproducible
    matplotlib.rcParams["svg.hashsalt"] = "qseer"
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.pcolormesh(ge, be, counts.T, cmap="viridis")
    ax.set_xlabel("gamma")
    ax.set_ylabel("beta")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_param_histograms(pre_records, post_records, bins, out_dir, render_svg=True):
    """Per-depth 2-D (gamma, beta) histograms before and after normalization."""
    from pathlib import Path
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    depths = sorted({rec.depth for rec in list(pre_records) + list(post_records)})
    for tag, records in (("pre", pre_records), ("post", post_records)):
        for p in depths:
            counts, ge, be = _hist2d(records, p, bins)
            csv_path = out_dir / f"hist_p{p}_{tag}.csv"
            _write_hist_csv(csv_path, counts, ge, be)
            written.append(csv_path)
            if render_svg:
                svg_path = out_dir / f"hist_p{p}_{tag}.svg"
                _render_hist_svg(svg_path, counts, ge, be, f"p={p} ({tag})")
                written.append(svg_path)
    return written


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for r in rows:
            wr.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def write_report(report: EvalReport, out_dir) -> None:
    from pathlib import Path
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "initial_ar.csv", report.initial_rows,
               ["scheme", "graph_id", "p", "ar"])
    _write_csv(out_dir / "convergence.csv", report.convergence_rows,
               ["scheme", "graph_id", "p", "iter", "F", "ar"])
    _write_csv(out_dir / "stability.csv", report.stability_rows,
               ["scheme", "graph_id", "p", "iterations_to_stability"])
    _write_csv(out_dir / "aggregates.csv", report.aggregates,
               ["scheme", "p", "count", "min_ar", "mean_ar", "max_ar"])
