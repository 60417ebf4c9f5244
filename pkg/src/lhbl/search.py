"""Batch weighted A* and the limited-horizon search that records its graph.

Both share one best-first engine.  OPEN is a binary heap keyed by
``(f, -lam*g, seq)`` with ``f = lam*g + h``: lower f first, then deeper nodes,
then FIFO.  At ``lam == 0`` the g tie-break vanishes and the order is plain
greedy best-first by h and insertion sequence.  Stale heap entries are skipped
lazily by comparing against the latest sequence number pushed for the state.
"""

from __future__ import annotations

import enum
import heapq
import time
from dataclasses import dataclass, field
from typing import Callable

from . import domains
from .domains import PuzzleState, StateSpaceSpec
from .errors import InvalidStateError
from .heuristics import HeuristicModel

_CLOSED = -1


class HorizonAlgo(str, enum.Enum):
    ASTAR = "astar"
    GBFS = "gbfs"


@dataclass
class Limits:
    max_expansions: int | None = 200_000
    max_time_s: float | None = 60.0
    max_nodes: int | None = None

    def __post_init__(self):
        if self.max_expansions is None and self.max_time_s is None and self.max_nodes is None:
            raise ValueError("at least one search limit is required")


@dataclass
class RunRecord:
    instance_id: str
    solved: bool
    solution_cost: float | None
    path: list[int] | None
    nodes_generated: int
    nodes_expanded: int
    wall_time_ms: float
    B: int
    lam: float
    limit_hit: str = ""  # "", "expansions", "time", "memory" or "exhausted"

    @property
    def path_length(self) -> int | None:
        return None if self.path is None else len(self.path)


@dataclass
class SearchGraph:
    """Partially expanded, duplicate-merged search graph.

    Vertices are integer ids into ``states``.  A vertex is a leaf iff it has no
    outgoing edges.
    """

    states: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    out_edges: list = field(default_factory=list)
    goal: list = field(default_factory=list)
    g: list = field(default_factory=list)
    expansion_order: list = field(default_factory=list)

    def add_vertex(self, state, is_goal: bool = False, g: float = float("inf")) -> int:
        vid = self.index.get(state)
        if vid is None:
            vid = len(self.states)
            self.index[state] = vid
            self.states.append(state)
            self.out_edges.append([])
            self.goal.append(is_goal)
            self.g.append(g)
        return vid

    def add_edge(self, u: int, v: int, cost: float) -> None:
        if cost <= 0:
            raise ValueError("edge costs must be positive")
        self.out_edges[u].append((v, cost))

    @classmethod
    def from_edges(cls, states, edges, goals=()) -> "SearchGraph":
        """Build a graph from explicit vertex labels and ``(u, v, cost)`` index triples."""
        graph = cls()
        goals = set(goals)
        for s in states:
            graph.add_vertex(s, s in goals)
        for u, v, c in edges:
            graph.add_edge(u, v, c)
        graph.expansion_order = [v for v in range(len(graph.states)) if graph.out_edges[v]]
        if graph.states:
            graph.g[0] = 0.0
        return graph

    def __len__(self):
        return len(self.states)

    @property
    def root(self):
        return self.states[0]

    def is_leaf(self, v: int) -> bool:
        return not self.out_edges[v]

    def is_expanded(self, v: int) -> bool:
        return bool(self.out_edges[v])

    def leaves(self) -> list[int]:
        return [v for v in range(len(self.states)) if not self.out_edges[v]]

    def expanded_vertices(self) -> list[int]:
        return [v for v in range(len(self.states)) if self.out_edges[v]]

    def edges(self):
        for u, outs in enumerate(self.out_edges):
            for v, c in outs:
                yield u, v, c


def _search(spec, heuristic, start, B, lam, use_target, max_expansions, max_time_s, max_nodes,
            reopen, graph=None, on_expand=None):
    """Shared best-first engine. Returns (goal_state|None, parent, generated, expanded, limit)."""
    t0 = time.perf_counter()
    goal = domains.goal_state(spec)
    g = {start: 0.0}
    parent = {start: None}
    h_cache = {start: float(heuristic.evaluate_batch([start], use_target)[0])}
    latest = {}
    heap = []
    seq = 0

    def push(s):
        nonlocal seq
        gs = g[s]
        heapq.heappush(heap, (lam * gs + h_cache[s], -lam * gs, seq, s))
        latest[s] = seq
        seq += 1

    push(start)
    if graph is not None:
        graph.add_vertex(start, start == goal, 0.0)

    generated = expanded = 0
    expand = domains.expand
    while True:
        if not heap:
            return None, parent, generated, expanded, "exhausted"
        if max_time_s is not None and time.perf_counter() - t0 > max_time_s:
            return None, parent, generated, expanded, "time"
        if max_nodes is not None and len(g) > max_nodes:
            return None, parent, generated, expanded, "memory"

        batch = []
        while heap and len(batch) < B:
            entry = heapq.heappop(heap)
            s = entry[3]
            if latest.get(s) != entry[2]:
                continue
            if s == goal:
                return s, parent, generated, expanded, ""
            batch.append(s)

        fresh = []
        for s in batch:
            if max_expansions is not None and expanded >= max_expansions:
                return None, parent, generated, expanded, "expansions"
            latest[s] = _CLOSED
            gs = g[s]
            if on_expand is not None:
                on_expand(expanded, s, h_cache[s], gs)
            expanded += 1
            children = expand(spec, s)
            generated += len(children)
            if graph is not None:
                u = graph.index[s]
                graph.expansion_order.append(u)
            for op, child, cost in children:
                ng = gs + cost
                if graph is not None:
                    v = graph.add_vertex(child, child == goal)
                    graph.add_edge(u, v, cost)
                    if ng < graph.g[v]:
                        graph.g[v] = ng
                old = g.get(child)
                if old is None:
                    g[child] = ng
                    parent[child] = (s, op, cost)
                    fresh.append(child)
                elif ng < old:
                    g[child] = ng
                    parent[child] = (s, op, cost)
                    state_seq = latest.get(child)
                    # priority depends on g only when lam > 0
                    if lam > 0 and (state_seq != _CLOSED or reopen):
                        fresh.append(child)

        # a state improved twice in one round is pushed once, at its final g
        fresh = list(dict.fromkeys(fresh))
        unseen = [s for s in fresh if s not in h_cache]
        if unseen:
            for s, h in zip(unseen, heuristic.evaluate_batch(unseen, use_target)):
                h_cache[s] = float(h)
        for s in fresh:
            push(s)


def _trace_path(parent, goal_state):
    ops = []
    cost = 0.0
    link = parent[goal_state]
    while link is not None:
        prev, op, c = link
        ops.append(op)
        cost += c
        link = parent[prev]
    ops.reverse()
    return ops, cost


def bwas(spec: StateSpaceSpec, heuristic: HeuristicModel, start: PuzzleState, B: int = 1,
         lam: float = 1.0, limits: Limits | None = None, instance_id: str = "",
         on_expand: Callable[[int, PuzzleState, float, float], None] | None = None) -> RunRecord:
    """Batch weighted A* search.

    Each round removes up to ``B`` lowest-priority nodes, returns the first goal
    among them, and otherwise expands them all, scoring every new successor in a
    single ``evaluate_batch`` call.  Cheaper paths to known states reopen them.
    Budgets never raise; they yield an unsolved record naming the tripped limit.
    ``on_expand(index, state, h, g)`` is called for every expansion in order.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    limits = limits or Limits()
    t0 = time.perf_counter()
    found, parent, generated, expanded, limit = _search(
        spec, heuristic, start, B, lam, False, limits.max_expansions, limits.max_time_s,
        limits.max_nodes, reopen=True, on_expand=on_expand)
    wall = (time.perf_counter() - t0) * 1000.0
    if found is None:
        return RunRecord(instance_id, False, None, None, generated, expanded, wall, B, lam, limit)
    ops, cost = _trace_path(parent, found)
    return RunRecord(instance_id, True, cost, ops, generated, expanded, wall, B, lam, "")


def run_limited_horizon(spec: StateSpaceSpec, heuristic_target: HeuristicModel, start: PuzzleState,
                        horizon: int, algo: HorizonAlgo | str = HorizonAlgo.GBFS) -> SearchGraph:
    """Expand up to ``horizon`` distinct states from ``start`` and return the recorded graph.

    Guidance comes from the model's target parameters.  Every generated edge is
    kept, including edges back into the graph.  Selecting a goal stops the
    search with the goal left unexpanded.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    lam = 1.0 if HorizonAlgo(algo) is HorizonAlgo.ASTAR else 0.0
    graph = SearchGraph()
    _search(spec, heuristic_target, start, 1, lam, True, horizon, None, None,
            reopen=False, graph=graph)
    return graph


def reconstruct_path(record: RunRecord) -> list[int]:
    if not record.solved or record.path is None:
        raise InvalidStateError(f"run {record.instance_id!r} is unsolved; no path to reconstruct")
    return list(record.path)
