"""Training targets: single-step Bellman labels and limited-horizon Bellman labels.

The limited-horizon value of a vertex is the cheapest ``path cost + h(leaf)``
over frontier leaves reachable from it.  It is computed for every vertex at
once: hang each leaf on an auxiliary sink ``z`` with an edge priced at the
leaf's target-network value, reverse all edges, and run Dijkstra from ``z``.
This stays correct when the partial graph contains cycles.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import domains
from .domains import PuzzleState, StateSpaceSpec
from .errors import DeadEndError
from .heuristics import HeuristicModel, LabelBatch, Provenance
from .search import SearchGraph


def ssb_labels(spec: StateSpaceSpec, heuristic_target: HeuristicModel,
               states: Sequence[PuzzleState]) -> np.ndarray:
    """Single-step Bellman targets for many states with one heuristic call for all successors."""
    goal = domains.goal_state(spec)
    children = []
    spans = []
    for s in states:
        if s == goal:
            spans.append(None)
            continue
        succ = domains.expand(spec, s)
        if not succ:
            raise DeadEndError(f"state {s!r} has no successors and is not a goal")
        spans.append((len(children), len(succ)))
        children.extend((child, cost) for _, child, cost in succ)
    values = heuristic_target.evaluate_batch([c for c, _ in children], use_target=True)
    costs = np.fromiter((c for _, c in children), dtype=np.float64, count=len(children))
    totals = costs + values
    out = np.zeros(len(states))
    for i, span in enumerate(spans):
        if span is not None:
            start, n = span
            out[i] = totals[start:start + n].min()
    return out


def ssb_label(spec: StateSpaceSpec, heuristic_target: HeuristicModel, s: PuzzleState) -> float:
    return float(ssb_labels(spec, heuristic_target, [s])[0])


@dataclass
class AugmentedGraph:
    """Search graph plus sink ``z`` (vertex id ``n``), stored with reversed edges.

    ``reverse_adj[v]`` lists ``(u, cost)`` for every forward edge ``u -> v``;
    ``z_edges`` maps each vertex wired to the sink onto that edge's cost.
    """

    n: int
    reverse_adj: list
    z_edges: dict

    @property
    def z(self) -> int:
        return self.n

    def reversed_edges(self):
        for v, outs in enumerate(self.reverse_adj):
            for u, c in outs:
                yield v, u, c


HeuristicLike = HeuristicModel | Callable[[list], Sequence[float]] | Mapping


def _leaf_values(heuristic_target, states: list) -> np.ndarray:
    if isinstance(heuristic_target, HeuristicModel):
        return heuristic_target.evaluate_batch(states, use_target=True)
    if isinstance(heuristic_target, Mapping):
        return np.array([heuristic_target[s] for s in states], dtype=np.float64)
    return np.asarray(heuristic_target(states), dtype=np.float64)


def build_augmented_graph(graph: SearchGraph, heuristic_target: HeuristicLike) -> AugmentedGraph:
    """Wire every leaf (and every goal vertex, at cost 0) to ``z`` and reverse all edges.

    ``heuristic_target`` is a model (its target parameters are used), a mapping
    from state to value, or a callable scoring a list of states.
    """
    n = len(graph)
    if n == 0:
        raise ValueError("graph is empty")
    leaves = graph.leaves()
    open_leaves = [v for v in leaves if not graph.goal[v]]
    values = _leaf_values(heuristic_target, [graph.states[v] for v in open_leaves])
    z_edges = {}
    for v, h in zip(open_leaves, values):
        h = float(h)
        assert h >= 0.0 and not math.isnan(h), f"negative or NaN leaf heuristic {h} leaked into labeler"
        z_edges[v] = h
    for v in range(n):
        if graph.goal[v]:
            z_edges[v] = 0.0

    reverse_adj = [[] for _ in range(n + 1)]
    for u, outs in enumerate(graph.out_edges):
        for v, c in outs:
            reverse_adj[v].append((u, c))
    for v, c in z_edges.items():
        reverse_adj[n].append((v, c))
    return AugmentedGraph(n, reverse_adj, z_edges)


def dijkstra(adj: list, source: int) -> list[float]:
    """Single-source shortest paths on nonnegative weights; lazy deletion of stale heap entries."""
    dist = [math.inf] * len(adj)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = [False] * len(adj)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, c in adj[u]:
            nd = d + c
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def lhb_values(graph: SearchGraph, heuristic_target: HeuristicLike) -> list[float]:
    """Limited-horizon labels indexed by vertex id; ``inf`` where no leaf is reachable."""
    aug = build_augmented_graph(graph, heuristic_target)
    dist = dijkstra(aug.reverse_adj, aug.z)
    labels = dist[:aug.n]
    for v in range(aug.n):
        if graph.goal[v]:
            labels[v] = 0.0
    return labels


def lhb_labels(graph: SearchGraph, heuristic_target: HeuristicLike) -> dict:
    """Map each vertex state to its limited-horizon Bellman label."""
    return dict(zip(graph.states, lhb_values(graph, heuristic_target)))


def labels_to_batch(labels: Mapping, graph: SearchGraph, include_leaves: bool = False,
                    provenance: Provenance = Provenance.LHB) -> LabelBatch:
    """Collect ``(state, label)`` pairs, expanded vertices only unless ``include_leaves``.

    Infinite labels are dropped; goals carry label 0.
    """
    states, targets = [], []
    for v, s in enumerate(graph.states):
        if not include_leaves and graph.is_leaf(v):
            continue
        value = 0.0 if graph.goal[v] else labels[s]
        if math.isinf(value):
            continue
        states.append(s)
        targets.append(value)
    return LabelBatch(states, np.array(targets, dtype=np.float64), provenance)


def ssb_graph_batch(spec: StateSpaceSpec, graph: SearchGraph, heuristic_target: HeuristicModel,
                    include_leaves: bool = False) -> LabelBatch:
    """Single-step labels on the vertices of a horizon search graph (the sampling-only ablation)."""
    vertices = range(len(graph)) if include_leaves else graph.expanded_vertices()
    states = [graph.states[v] for v in vertices]
    return LabelBatch(states, ssb_labels(spec, heuristic_target, states), Provenance.SSB)
