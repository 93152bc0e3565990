"""Build, normalize, split, and persist optimal-parameter datasets."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FormatError, ParameterError
from .graph import Graph, graph_from_dict, graph_to_dict, max_cut_bruteforce
from .normalize import canonicalize
from .qaoa import ParamVector, multistart_optimize

SCHEMA_VERSION = 1
DEFAULT_STARTS = {1: 20, 2: 40, 3: 100}  # desk-scale multi-start budget per depth

__all__ = ["DatasetRecord", "SplitSpec", "build", "normalize_all", "split",
           "write_records", "read_records", "DEFAULT_STARTS"]


@dataclass
class DatasetRecord:
    graph_id: str
    graph: Graph
    depth: int
    gamma: tuple[float, ...]
    beta: tuple[float, ...]
    cost: float
    cmax: float
    ar: float
    normalized: bool = False
    split: str = ""  # "", "train", "val", or "test"

    @property
    def params(self) -> ParamVector:
        return ParamVector(gamma=self.gamma, beta=self.beta)


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float]  # (train, val, test)
    seed: int = 0

    def __post_init__(self):
        if any(r < 0 for r in self.ratios):
            raise ParameterError(f"split ratios must be >= 0, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ParameterError(f"split ratios must sum to 1, got {self.ratios}")


def stage_seed(seed: int, *tags) -> int:
    """Deterministic per-task seed derived from a global seed and string tags."""
    payload = ":".join([str(seed)] + [str(t) for t in tags])
    return int.from_bytes(hashlib.sha256(payload.encode()).digest()[:8], "big")


def build(graphs: list[Graph], depths: list[int], starts_per_depth: dict[int, int] | None = None,
          seed: int = 0, lr: float = 0.01, iters: int = 100) -> list[DatasetRecord]:
    """Label each (graph, depth) pair with its multi-start optimum and exact C_max."""
    starts_per_depth = dict(DEFAULT_STARTS if starts_per_depth is None else starts_per_depth)
    records = []
    for g in graphs:
        cmax = max_cut_bruteforce(g)
        for p in depths:
            starts = starts_per_depth.get(p)
            if starts is None:
                raise ParameterError(f"no start budget configured for depth {p}")
            res = multistart_optimize(g, p, starts, seed=stage_seed(seed, g.id, p),
                                      lr=lr, iters=iters)
            records.append(DatasetRecord(
                graph_id=g.id, graph=g, depth=p,
                gamma=res.params.gamma, beta=res.params.beta,
                cost=res.cost, cmax=cmax,
                ar=res.cost / cmax if cmax > 0 else float("nan")))
    return records


def normalize_all(records: list[DatasetRecord], seed: int = 0) -> list[DatasetRecord]:
    """Replace each record's angles with their canonical form when the
    loss-preservation check verifies; otherwise keep the original angles."""
    return normalize_with_report(records, seed)[0]


def normalize_with_report(records: list[DatasetRecord], seed: int = 0):
    """normalize_all plus a per-depth report of verification and range compliance."""
    out = []
    stats: dict[int, dict[str, int]] = {}
    for rec in records:
        nm = canonicalize(rec.graph, rec.params, seed=stage_seed(seed, rec.graph_id, rec.depth))
        st = stats.setdefault(rec.depth, {"records": 0, "verified": 0,
                                          "gamma_in_range": 0, "beta_in_range": 0,
                                          "both_in_range": 0})
        st["records"] += 1
        if nm.verified:
            st["verified"] += 1
            st["gamma_in_range"] += nm.gamma_in_range
            st["beta_in_range"] += nm.beta_in_range
            st["both_in_range"] += nm.gamma_in_range and nm.beta_in_range
            out.append(replace(rec, gamma=nm.params.gamma, beta=nm.params.beta,
                               normalized=True))
        else:
            out.append(replace(rec, normalized=False))
    report = {"depths": {str(p): st for p, st in sorted(stats.items())},
              "total": {k: sum(st[k] for st in stats.values())
                        for k in ("records", "verified", "gamma_in_range",
                                  "beta_in_range", "both_in_range")}}
    return out, report


def split(records: list[DatasetRecord], spec: SplitSpec) -> list[DatasetRecord]:
    """Assign train/val/test at graph granularity so no graph leaks across splits."""
    ids = sorted({rec.graph_id for rec in records})
    rng = np.random.default_rng(spec.seed)
    rng.shuffle(ids)
    total = len(ids)
    n_train = round(spec.ratios[0] * total)
    n_val = round((spec.ratios[0] + spec.ratios[1]) * total) - n_train
    assignment = {}
    for i, gid in enumerate(ids):
        if i < n_train:
            assignment[gid] = "train"
        elif i < n_train + n_val:
            assignment[gid] = "val"
        else:
            assignment[gid] = "test"
    return [replace(rec, split=assignment[rec.graph_id]) for rec in records]


# ----------------------------------------------------------------------------
# JSONL persistence
# ----------------------------------------------------------------------------


def record_to_dict(rec: DatasetRecord) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "graph_id": rec.graph_id,
        "graph": graph_to_dict(rec.graph),
        "depth": rec.depth,
        "gamma": list(rec.gamma),
        "beta": list(rec.beta),
        "cost": rec.cost,
        "cmax": rec.cmax,
        "ar": rec.ar,
        "normalized": rec.normalized,
        "split": rec.split,
    }


def record_from_dict(d: dict) -> DatasetRecord:
    if d.get("schema") != SCHEMA_VERSION:
        raise FormatError(f"unsupported dataset schema {d.get('schema')!r}")
    return DatasetRecord(
        graph_id=d["graph_id"],
        graph=graph_from_dict(d["graph"]),
        depth=int(d["depth"]),
        gamma=tuple(d["gamma"]),
        beta=tuple(d["beta"]),
        cost=float(d["cost"]),
        cmax=float(d["cmax"]),
        ar=float(d["ar"]),
        normalized=bool(d.get("normalized", False)),
        split=d.get("split", ""),
    )


def write_records(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def read_records(path) -> list[DatasetRecord]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                try:
                    out.append(record_from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise FormatError(f"corrupt dataset line: {exc}") from exc
    return out
