"""Random search-like graphs and an exhaustive path oracle for auditing limited-horizon labels."""

from __future__ import annotations

import csv
import math

import numpy as np

from .labeler import lhb_values
from .search import SearchGraph


def random_graph(rng: np.random.Generator, max_vertices: int = 30, max_cost: float = 10.0,
                 max_h: float = 10.0) -> tuple[SearchGraph, dict]:
    """A sparse random digraph shaped like a partial search graph, plus leaf heuristics.

    Roughly half the vertices are expanded with out-degree 1-3 (self loops
    excluded, cycles allowed); the rest are leaves.  Edge costs are drawn from
    ``(0, max_cost]`` and leaf heuristics from ``[0, max_h]``.
    """
    n = int(rng.integers(1, max_vertices + 1))
    expanded = rng.random(n) < 0.5
    expanded[0] = n > 1
    edges = []
    for u in range(n):
        if not expanded[u]:
            continue
        targets = [v for v in range(n) if v != u]
        k = min(len(targets), int(rng.integers(1, 4)))
        for v in rng.choice(targets, size=k, replace=False):
            edges.append((u, int(v), float(max_cost - rng.random() * max_cost)))  # (0, max_cost]
    graph = SearchGraph.from_edges(list(range(n)), edges)
    heuristic = {v: float(rng.random() * max_h) for v in graph.leaves()}
    return graph, heuristic


def brute_force_labels(graph: SearchGraph, heuristic: dict) -> list[float]:
    """Minimum over all simple paths ``v -> leaf`` of path cost plus leaf heuristic."""
    n = len(graph)
    best = [math.inf] * n
    for source in range(n):
        if graph.goal[source]:
            best[source] = 0.0
            continue
        on_path = [False] * n
        stack = [(source, 0.0, iter(graph.out_edges[source]))]
        on_path[source] = True
        if graph.is_leaf(source):
            best[source] = heuristic[graph.states[source]]
            continue
        while stack:
            u, cost, it = stack[-1]
            step = next(it, None)
            if step is None:
                on_path[u] = False
                stack.pop()
                continue
            v, c = step
            if on_path[v]:
                continue
            total = cost + c
            if graph.goal[v]:
                best[source] = min(best[source], total)
            elif graph.is_leaf(v):
                best[source] = min(best[source], total + heuristic[graph.states[v]])
            else:
                on_path[v] = True
                stack.append((v, total, iter(graph.out_edges[v])))
    return best


def label_check(trials: int, seed: int = 0, max_vertices: int = 30, out=None) -> float:
    """Compare Dijkstra labels with the path oracle on ``trials`` random graphs.

    Streams ``graph_id,vertex,lhb,oracle,diff`` rows to ``out`` when given and
    returns the largest absolute difference (0 when both sides are infinite).
    """
    rng = np.random.default_rng(seed)
    writer = None
    if out is not None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["graph_id", "vertex", "lhb", "oracle", "diff"])
    worst = 0.0
    for trial in range(trials):
        graph, heuristic = random_graph(rng, max_vertices)
        fast = lhb_values(graph, heuristic)
        slow = brute_force_labels(graph, heuristic)
        for v, (a, b) in enumerate(zip(fast, slow)):
            diff = 0.0 if a == b else abs(a - b)
            worst = max(worst, diff)
            if writer is not None:
                writer.writerow([trial, v, repr(a), repr(b), repr(diff)])
    return worst
