"""Vertex-weighted conflict graphs and exact maximum-weight independent set solvers.

A ``WeightedGraph`` holds the instance (vertex weights, undirected edges).
Two independent exact solvers are provided: a branch-and-bound search with a
greedy weight-sum upper bound (default, usable to ~60 vertices) and a plain
exhaustive enumeration (capped at 20 vertices) that serves as a cross-check
oracle.  Ties between optimal sets are broken toward the lexicographically
smallest vertex tuple so results are reproducible across backends.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CapacityError, InputError

# Absolute tolerance for comparing candidate set weights when tie-breaking.
WEIGHT_TIE_TOL = 1e-12

# VertexSet: a selection of vertex indices (the x_i = 1 assignment).
VertexSet = frozenset


def _normalize_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class WeightedGraph:
    """Immutable vertex-weighted undirected graph.

    ``weights[i]`` is the (dimensionless) score of vertex ``i``; ``edges``
    are unordered pairs of distinct vertices marking conflicts.
    """

    n: int
    weights: tuple[float, ...]
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise InputError("vertex count must be non-negative")
        if len(self.weights) != self.n:
            raise InputError(f"expected {self.n} weights, got {len(self.weights)}")
        if not all(math.isfinite(w) for w in self.weights):
            raise InputError("all vertex weights must be finite")
        norm = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise InputError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InputError(f"edge {e} references a vertex outside [0, {self.n})")
            norm.add(_normalize_edge(i, j))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_data(cls, weights: Sequence[float], edges: Iterable[Sequence[int]] = ()) -> "WeightedGraph":
        return cls(n=len(weights), weights=tuple(weights),
                   edges=frozenset(_normalize_edge(int(i), int(j)) for i, j in edges))

    def adjacency_masks(self) -> list[int]:
        """Per-vertex neighbour bitmask (bit j set iff (i, j) is an edge)."""
        masks = [0] * self.n
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if i in e)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "n": self.n,
            "weights": list(self.weights),
            "edges": sorted([list(e) for e in self.edges]),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WeightedGraph":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {exc.lineno}: invalid JSON graph file: {exc.msg}") from exc
        try:
            return cls(n=int(payload["n"]),
                       weights=tuple(float(w) for w in payload["weights"]),
                       edges=frozenset(_normalize_edge(int(i), int(j)) for i, j in payload["edges"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed graph JSON: {exc}") from exc

    @classmethod
    def from_dimacs(cls, text: str) -> "WeightedGraph":
        """Parse the DIMACS-like format: ``p`` header, ``n <i> <w>`` vertex
        weights and ``e <i> <j>`` edges, all 1-indexed."""
        n = None
        weights: dict[int, float] = {}
        edges = set()
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("c"):
                continue
            parts = line.split()
            try:
                if parts[0] == "p":
                    n = int(parts[-2]) if len(parts) >= 3 else int(parts[1])
                elif parts[0] == "n":
                    weights[int(parts[1]) - 1] = float(parts[2])
                elif parts[0] == "e":
                    edges.add(_normalize_edge(int(parts[1]) - 1, int(parts[2]) - 1))
                else:
                    raise InputError(f"line {ln}: unknown record '{parts[0]}'")
            except (IndexError, ValueError) as exc:
                raise InputError(f"line {ln}: cannot parse '{raw}': {exc}") from exc
        if n is None:
            raise InputError("line 1: missing 'p' header line")
        w = [weights.get(i, 1.0) for i in range(n)]
        return cls(n=n, weights=tuple(w), edges=frozenset(edges))


def load_graph(path: str) -> WeightedGraph:
    """Load a graph from a JSON or DIMACS-like text file (sniffed)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return WeightedGraph.from_json(text)
    return WeightedGraph.from_dimacs(text)


def _validate_vertices(g: WeightedGraph, s: Iterable[int]) -> frozenset:
    sel = frozenset(int(v) for v in s)
    for v in sel:
        if not (0 <= v < g.n):
            raise InputError(f"vertex {v} outside [0, {g.n})")
    return sel


def is_independent(g: WeightedGraph, s: Iterable[int]) -> bool:
    """True iff no edge of ``g`` has both endpoints in ``s``."""
    sel = _validate_vertices(g, s)
    return not any(i in sel and j in sel for i, j in g.edges)


def total_weight(g: WeightedGraph, s: Iterable[int]) -> float:
    """Sum of vertex weights over the selection (0 for the empty set)."""
    sel = _validate_vertices(g, s)
    return float(sum(g.weights[v] for v in sel))


def drop_nonpositive(g: WeightedGraph) -> tuple[WeightedGraph, tuple[int, ...]]:
    """Remove vertices with w <= 0 (they never improve an optimum).

    Returns the reduced graph and an index map: ``index_map[new] = old``.
    """
    keep = [i for i in range(g.n) if g.weights[i] > 0.0]
    old_to_new = {old: new for new, old in enumerate(keep)}
    edges = frozenset(
        _normalize_edge(old_to_new[i], old_to_new[j])
        for i, j in g.edges if i in old_to_new and j in old_to_new
    )
    sub = WeightedGraph(n=len(keep), weights=tuple(g.weights[i] for i in keep), edges=edges)
    return sub, tuple(keep)


def _better(weight: float, vertices: tuple[int, ...],
            best_weight: float, best_vertices: tuple[int, ...] | None) -> bool:
    if best_vertices is None or weight > best_weight + WEIGHT_TIE_TOL:
        return True
    if abs(weight - best_weight) <= WEIGHT_TIE_TOL and vertices < best_vertices:
        return True
    return False


def _mwis_branch_and_bound(g: WeightedGraph) -> tuple[frozenset, float]:
    n = g.n
    w = g.weights
    # Visit heavy vertices first; adjacency expressed in this visiting order.
    order = sorted(range(n), key=lambda i: (-w[i], i))
    pos_of = {v: p for p, v in enumerate(order)}
    adj = [0] * n
    for i, j in g.edges:
        pi, pj = pos_of[i], pos_of[j]
        adj[pi] |= 1 << pj
        adj[pj] |= 1 << pi
    w_pos = [w[order[p]] for p in range(n)]

    best_w = -math.inf
    best_set: tuple[int, ...] | None = None

    def remaining_weight(mask: int) -> float:
        total = 0.0
        while mask:
            low = mask & -mask
            total += w_pos[low.bit_length() - 1]
            mask ^= low
        return total

    def lex_floor(cur: list[int], mask: int) -> tuple[int, ...]:
        # Lex lower bound over completions: take every remaining candidate.
        extra = []
        while mask:
            low = mask & -mask
            extra.append(order[low.bit_length() - 1])
            mask ^= low
        return tuple(sorted(cur + extra))

    def recurse(mask: int, cur_w: float, cur: list[int]):
        nonlocal best_w, best_set
        if mask == 0:
            cand = tuple(sorted(cur))
            if _better(cur_w, cand, best_w, best_set):
                best_w, best_set = cur_w, cand
            return
        bound = cur_w + remaining_weight(mask)
        if bound < best_w - WEIGHT_TIE_TOL:
            return
        if bound <= best_w + WEIGHT_TIE_TOL and best_set is not None:
            if lex_floor(cur, mask) >= best_set:
                return
        p = (mask & -mask).bit_length() - 1
        v = order[p]
        # Include v, dropping it and its neighbours from the candidates.
        cur.append(v)
        recurse(mask & ~((1 << p) | adj[p]), cur_w + w_pos[p], cur)
        cur.pop()
        # Exclude v.
        recurse(mask & ~(1 << p), cur_w, cur)

    recurse((1 << n) - 1, 0.0, [])
    assert best_set is not None
    return frozenset(best_set), float(best_w)


def _mwis_exhaustive(g: WeightedGraph) -> tuple[frozenset, float]:
    n = g.n
    adj = g.adjacency_masks()
    w = g.weights
    best_w = -math.inf
    best_set: tuple[int, ...] | None = None

    # Plain include/exclude enumeration of all independent sets, no bounds.
    def recurse(v: int, mask: int, cur_w: float, cur: list[int]):
        nonlocal best_w, best_set
        if v == n:
            cand = tuple(cur)
            if _better(cur_w, cand, best_w, best_set):
                best_w, best_set = cur_w, cand
            return
        if not (mask & adj[v]):
            cur.append(v)
            recurse(v + 1, mask | (1 << v), cur_w + w[v], cur)
            cur.pop()
        recurse(v + 1, mask, cur_w, cur)

    recurse(0, 0, 0.0, [])
    assert best_set is not None
    return frozenset(best_set), float(best_w)


def mwis_exact(g: WeightedGraph, method: str = "branch_and_bound",
               max_n: int = 60) -> tuple[frozenset, float]:
    """Maximum-weight independent set and its weight.

    Requires strictly positive weights (run :func:`drop_nonpositive` first).
    Among equal-weight optima the lexicographically smallest vertex set is
    returned.  ``method`` is ``branch_and_bound`` (default) or ``exhaustive``
    (plain enumeration, capped at 20 vertices, used as a cross-check oracle).
    """
    if any(w <= 0.0 for w in g.weights):
        raise InputError("mwis_exact requires strictly positive weights; "
                         "apply drop_nonpositive first")
    if g.n == 0:
        return frozenset(), 0.0
    if method == "exhaustive":
        if g.n > 20:
            raise CapacityError(f"exhaustive solver capped at 20 vertices, got {g.n}")
        return _mwis_exhaustive(g)
    if method != "branch_and_bound":
        raise InputError(f"unknown method '{method}'")
    if g.n > max_n:
        raise CapacityError(
            f"branch-and-bound budget is {max_n} vertices, got {g.n}; "
            "route the instance to the sqa backend")
    return _mwis_branch_and_bound(g)
