"""Graph representation, generation, canonicalization, and Max-Cut ground truth."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .errors import BoundsError, DomainError, GenerationError, ParameterError

ENUM_MAX_NODES = 7
BRUTEFORCE_MAX_NODES = 24
# pairing-model draws are cheap and the simple-graph acceptance rate drops
# roughly like exp(-(d-1)/2 - (d-1)^2/4), so allow plenty of rejections
CONNECTIVITY_RETRIES = 100_000

__all__ = [
    "Graph",
    "make_graph",
    "enumerate_connected_nonisomorphic",
    "gen_random",
    "max_cut_bruteforce",
    "mean_abs_weight",
    "normalize_edge_weights",
    "canonical_form",
    "is_connected",
    "regular_degree",
    "write_graphs",
    "read_graphs",
]


def _graph_id(n: int, edges: tuple[tuple[int, int, float], ...]) -> str:
    payload = f"{n}|" + ";".join(f"{u},{v},{w!r}" for u, v, w in edges)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph with canonical (u < v) edge endpoints."""

    n: int
    edges: tuple[tuple[int, int, float], ...]
    id: str = field(default="")

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"node count must be >= 1, got {self.n}")
        seen = set()
        for u, v, w in self.edges:
            if not (0 <= u < v < self.n):
                raise ParameterError(f"edge ({u},{v}) violates 0 <= u < v < n={self.n}")
            if (u, v) in seen:
                raise ParameterError(f"duplicate edge ({u},{v})")
            if not np.isfinite(w):
                raise ParameterError(f"non-finite weight on edge ({u},{v})")
            seen.add((u, v))
        if not self.id:
            object.__setattr__(self, "id", _graph_id(self.n, self.edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def is_unweighted(self) -> bool:
        return all(w == 1.0 for _, _, w in self.edges)


def make_graph(n: int, edges, graph_id: str = "") -> Graph:
    """Build a Graph from any iterable of (u, v, w) or (u, v), normalizing endpoint order."""
    norm = []
    for e in edges:
        if len(e) == 2:
            u, v, w = e[0], e[1], 1.0
        else:
            u, v, w = e
        if u == v:
            raise ParameterError(f"self-loop on node {u}")
        if u > v:
            u, v = v, u
        norm.append((int(u), int(v), float(w)))
    norm.sort(key=lambda e: (e[0], e[1]))
    return Graph(n=n, edges=tuple(norm), id=graph_id)


def is_connected(g: Graph) -> bool:
    if g.n == 1:
        return True
    adj = [[] for _ in range(g.n)]
    for u, v, _ in g.edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * g.n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == g.n


def regular_degree(g: Graph) -> int | None:
    """Common degree if the graph is regular, else None."""
    deg = [0] * g.n
    for u, v, _ in g.edges:
        deg[u] += 1
        deg[v] += 1
    return deg[0] if len(set(deg)) == 1 else None


# ----------------------------------------------------------------------------
# Isomorphism-free enumeration (n <= 7, exhaustive permutation canonicalization)
# ----------------------------------------------------------------------------

_PERM_CACHE: dict[int, tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]] = {}


def _perm_tables(n: int):
    """Per-n tables mapping an edge bitmask to all its permuted images.

    Returns (src_table, pow2, pairs): permuted_bits = bits[src_table[k]] for
    permutation k, and pow2 packs a bit vector into a single integer key.
    """
    if n in _PERM_CACHE:
        return _PERM_CACHE[n]
    pairs = list(combinations(range(n), 2))
    index = {p: i for i, p in enumerate(pairs)}
    perms = list(permutations(range(n)))
    dest = np.empty((len(perms), len(pairs)), dtype=np.int64)
    for k, pm in enumerate(perms):
        for i, (u, v) in enumerate(pairs):
            a, b = pm[u], pm[v]
            dest[k, i] = index[(a, b) if a < b else (b, a)]
    src = np.argsort(dest, axis=1)
    pow2 = (np.int64(1) << np.arange(len(pairs), dtype=np.int64))
    _PERM_CACHE[n] = (src, pow2, pairs)
    return _PERM_CACHE[n]


def canonical_form(g: Graph) -> int:
    """Canonical integer label of the unweighted topology: minimum packed
    adjacency bitmask over all node permutations. Equal for isomorphic graphs."""
    if g.n > ENUM_MAX_NODES:
        raise BoundsError(f"canonical_form supports n <= {ENUM_MAX_NODES}, got {g.n}")
    src, pow2, pairs = _perm_tables(g.n)
    index = {(u, v): i for i, (u, v) in enumerate(pairs)}
    bits = np.zeros(len(pairs), dtype=np.int64)
    for u, v, _ in g.edges:
        bits[index[(u, v)]] = 1
    return int((bits[src] @ pow2).min()) if len(pairs) else 0


def _mask_to_graph(n: int, mask: int) -> Graph:
    _, _, pairs = _perm_tables(n)
    edges = [(u, v, 1.0) for i, (u, v) in enumerate(pairs) if (mask >> i) & 1]
    return make_graph(n, edges)


def enumerate_connected_nonisomorphic(n: int) -> list[Graph]:
    """One unit-weight representative per isomorphism class of connected
    simple graphs on n nodes, in deterministic (edge count, canonical mask) order.

    Grows representatives by vertex augmentation: every connected graph on n
    nodes arises from a connected graph on n-1 nodes by attaching one node.
    """
    if not (1 <= n <= ENUM_MAX_NODES):
        raise BoundsError(f"enumeration supports 1 <= n <= {ENUM_MAX_NODES}, got {n}")
    if n == 1:
        return [make_graph(1, [])]
    prev = enumerate_connected_nonisomorphic(n - 1)
    seen: set[int] = set()
    for g in prev:
        base = [(u, v) for u, v, _ in g.edges]
        for sub in range(1, 1 << (n - 1)):
            attach = [(v, n - 1) for v in range(n - 1) if (sub >> v) & 1]
            h = make_graph(n, base + attach)
            seen.add(canonical_form(h))
    masks = sorted(seen, key=lambda m: (bin(m).count("1"), m))
    return [_mask_to_graph(n, m) for m in masks]


# ----------------------------------------------------------------------------
# Seeded random generators
# ----------------------------------------------------------------------------


def _draw_weights(rng: np.random.Generator, count: int, weights) -> np.ndarray:
    """weights: 'none' | ('uniform', lo, hi) | ('exp', rate)."""
    if weights == "none" or weights is None:
        return np.ones(count)
    kind = weights[0]
    if kind == "uniform":
        _, lo, hi = weights
        return rng.uniform(lo, hi, size=count)
    if kind == "exp":
        rate = weights[1]
        if rate <= 0:
            raise ParameterError(f"exponential rate must be > 0, got {rate}")
        return rng.exponential(1.0 / rate, size=count)
    raise ParameterError(f"unknown weight distribution {weights!r}")


def _er_topology(rng: np.random.Generator, n: int, prob: float) -> list[tuple[int, int]]:
    return [(u, v) for u, v in combinations(range(n), 2) if rng.random() < prob]


def _regular_topology(rng: np.random.Generator, n: int, degree: int) -> list[tuple[int, int]] | None:
    """One pairing-model draw; None when it produces self-loops or multi-edges."""
    stubs = np.repeat(np.arange(n), degree)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    edges = set()
    for a, b in pairs:
        if a == b:
            return None
        e = (min(a, b), max(a, b))
        if e in edges:
            return None
        edges.add(e)
    return sorted(edges)


def gen_random(kind: str, n: int, *, prob: float | None = None, degree: int | None = None,
               weights="none", seed: int = 0) -> Graph:
    """Seeded connected random graph: kind 'erdos_renyi' (needs prob) or
    'regular' (needs degree). Rejection-samples until connected."""
    rng = np.random.default_rng(seed)
    if kind == "erdos_renyi":
        if prob is None or not (0 < prob <= 1):
            raise ParameterError(f"erdos_renyi needs 0 < prob <= 1, got {prob}")
    elif kind == "regular":
        if degree is None or degree < 0 or degree >= n or (n * degree) % 2 != 0:
            raise ParameterError(f"impossible regular degree sequence (n={n}, degree={degree})")
    else:
        raise ParameterError(f"unknown graph kind {kind!r}")

    for _ in range(CONNECTIVITY_RETRIES):
        if kind == "erdos_renyi":
            topo = _er_topology(rng, n, prob)
        else:
            topo = _regular_topology(rng, n, degree)
            if topo is None:
                continue
        ws = _draw_weights(rng, len(topo), weights)
        g = make_graph(n, [(u, v, w) for (u, v), w in zip(topo, ws)])
        if is_connected(g):
            return g
    raise GenerationError(
        f"no connected {kind} graph found in {CONNECTIVITY_RETRIES} draws (n={n})")


# ----------------------------------------------------------------------------
# Max-Cut ground truth and weight statistics
# ----------------------------------------------------------------------------


def max_cut_bruteforce(g: Graph) -> float:
    """Exact maximum cut by enumerating all 2^(n-1) bipartitions."""
    if g.n > BRUTEFORCE_MAX_NODES:
        raise BoundsError(f"brute force supports n <= {BRUTEFORCE_MAX_NODES}, got {g.n}")
    if not g.edges:
        return 0.0
    us = np.array([e[0] for e in g.edges])
    vs = np.array([e[1] for e in g.edges])
    ws = np.array([e[2] for e in g.edges])
    best = 0.0
    total = 1 << (g.n - 1)  # node n-1 fixed on one side
    chunk = 1 << 20
    for start in range(0, total, chunk):
        z = np.arange(start, min(start + chunk, total), dtype=np.int64)
        cut = ((z[:, None] >> us) ^ (z[:, None] >> vs)) & 1
        best = max(best, float((cut @ ws).max()))
    return best


def mean_abs_weight(g: Graph) -> float:
    """Average absolute edge weight."""
    if not g.edges:
        raise DomainError("mean_abs_weight is undefined for an empty edge list")
    return float(np.mean([abs(w) for _, _, w in g.edges]))


def normalize_edge_weights(g: Graph) -> Graph:
    """Min-max map of weights onto [0, 1]; equal weights all map to 1.0 so the
    uniform-weight case stays equivalent to the unweighted problem."""
    if not g.edges:
        raise DomainError("normalize_edge_weights needs at least one edge")
    ws = [w for _, _, w in g.edges]
    wmin, wmax = min(ws), max(ws)
    if wmax == wmin:
        scaled = [1.0] * len(ws)
    else:
        scaled = [(w - wmin) / (wmax - wmin) for w in ws]
    return make_graph(g.n, [(u, v, s) for (u, v, _), s in zip(g.edges, scaled)],
                      graph_id=g.id)


# ----------------------------------------------------------------------------
# JSONL persistence
# ----------------------------------------------------------------------------


def graph_to_dict(g: Graph) -> dict:
    return {"id": g.id, "n": g.n, "edges": [[u, v, w] for u, v, w in g.edges]}


def graph_from_dict(d: dict) -> Graph:
    return make_graph(int(d["n"]), d["edges"], graph_id=d.get("id", ""))


def write_graphs(graphs, path) -> None:
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(json.dumps(graph_to_dict(g)) + "\n")


def read_graphs(path) -> list[Graph]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(graph_from_dict(json.loads(line)))
    return out
