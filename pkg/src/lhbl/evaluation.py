"""Test sets, exact oracles, (B, lambda) benchmarks and depression-region traces."""

from __future__ import annotations

import csv
import heapq
import io
import statistics
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import domains
from .domains import PuzzleState, StateSpaceSpec
from .errors import DomainMismatchError, OracleTooLargeError
from .heuristics import HeuristicModel, TabularHeuristic
from .search import Limits, RunRecord, bwas

RESULTS_HEADER = ["instance_id", "B", "lambda", "solved", "solution_cost", "optimal_cost",
                  "nodes_generated", "nodes_expanded", "wall_time_ms", "limit_hit"]
TRACE_HEADER = ["expansion_index", "h", "g"]
DEFAULT_ORACLE_CAP = 5_000_000


@dataclass(frozen=True)
class TestInstance:
    __test__ = False  # keep pytest from collecting this class

    id: str
    spec: StateSpaceSpec
    start: PuzzleState
    depth: int
    seed: int


def linear_ramp(count: int, depth_max: int) -> list[int]:
    if count == 1:
        return [depth_max]
    return [round(i * depth_max / (count - 1)) for i in range(count)]


def generate_test_set(spec: StateSpaceSpec, count: int, depth_schedule: Callable[[int], int] | Sequence[int] | None = None,
                      seed: int = 0) -> list[TestInstance]:
    """Deterministic instances; instance ``i`` is scrambled with its own generator seeded by ``(seed, i)``.

    ``depth_schedule`` is a sequence or callable mapping index to depth; by
    default depths ramp linearly from 0 to the domain's default maximum.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if depth_schedule is None:
        depths = linear_ramp(count, spec.default_depth_max)
    elif callable(depth_schedule):
        depths = [int(depth_schedule(i)) for i in range(count)]
    else:
        depths = [int(d) for d in depth_schedule]
        if len(depths) != count:
            raise ValueError("depth schedule length must equal count")
    instances = []
    for i, depth in enumerate(depths):
        rng = np.random.default_rng([seed, i])
        instances.append(TestInstance(f"{i:04d}", spec, domains.scramble(spec, depth, rng), depth, seed))
    return instances


class OracleTable:
    """Exact optimal cost-to-go for every state reachable from the goal."""

    def __init__(self, spec: StateSpaceSpec, table: dict):
        self.spec = spec
        self.table = table

    def __len__(self):
        return len(self.table)

    def __getitem__(self, s) -> float:
        return self.table[s]

    def get(self, s, default=None):
        return self.table.get(s, default)

    def __contains__(self, s):
        return s in self.table

    def states(self) -> list:
        return list(self.table)

    def max(self) -> float:
        return max(self.table.values())

    def as_model(self) -> TabularHeuristic:
        model = TabularHeuristic(self.spec, self.table)
        return model


def build_oracle(spec: StateSpaceSpec, cap: int = DEFAULT_ORACLE_CAP) -> OracleTable:
    """Backward uniform-cost search from the goal.

    Every shipped move set is closed under inverses with equal costs, so
    expanding successors is the same as expanding predecessors.
    """
    estimate = domains.state_count_estimate(spec)
    if estimate > cap:
        raise OracleTooLargeError(estimate, cap)
    goal = domains.goal_state(spec)
    dist = {goal: 0.0}
    heap = [(0.0, 0, goal)]
    seq = 1
    expand = domains.expand
    while heap:
        d, _, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        for _, child, cost in expand(spec, s):
            nd = d + cost
            if nd < dist.get(child, float("inf")):
                dist[child] = nd
                heapq.heappush(heap, (nd, seq, child))
                seq += 1
        if len(dist) > cap:
            raise OracleTooLargeError(len(dist), cap)
    return OracleTable(spec, dist)


def write_oracle_csv(oracle: OracleTable, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["state", "h_star"])
    for s in sorted(oracle.table):
        writer.writerow([" ".join(map(str, s)), repr(oracle.table[s])])


def benchmark(models: HeuristicModel | Sequence[HeuristicModel], instances: Sequence[TestInstance],
              B_list: Sequence[int] = (1,), lam: float = 0.6, limits: Limits | None = None,
              oracle: OracleTable | None = None) -> list[dict]:
    """Run BWAS on every (model, instance, B) cell and return flat result rows.

    Timeouts come back as unsolved rows, never as exceptions.
    """
    if isinstance(models, HeuristicModel):
        models = [models]
    limits = limits or Limits()
    rows = []
    for m_idx, model in enumerate(models):
        for inst in instances:
            if (inst.spec.family, inst.spec.size) != (model.spec.family, model.spec.size):
                raise DomainMismatchError(f"model for {model.spec} cannot solve {inst.spec} instances")
            for B in B_list:
                record = bwas(inst.spec, model, inst.start, B, lam, limits, instance_id=inst.id)
                optimal = oracle.get(inst.start) if oracle is not None else None
                rows.append({"model": m_idx, "record": record, "optimal_cost": optimal})
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_results_csv(rows: Sequence[dict], fh, include_timing: bool = True) -> None:
    """Write benchmark rows; ``include_timing=False`` blanks wall time for byte-stable output."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESULTS_HEADER)
    for row in rows:
        r: RunRecord = row["record"]
        writer.writerow([
            r.instance_id, r.B, _fmt(float(r.lam)), int(r.solved), _fmt(r.solution_cost),
            _fmt(row["optimal_cost"]), r.nodes_generated, r.nodes_expanded,
            f"{r.wall_time_ms:.3f}" if include_timing else "", r.limit_hit,
        ])


def results_csv_text(rows: Sequence[dict], include_timing: bool = True) -> str:
    buf = io.StringIO()
    write_results_csv(rows, buf, include_timing)
    return buf.getvalue()


def summarize(rows: Sequence[dict]) -> dict:
    """Per-B aggregates; standard deviations are taken across models (independent seeds)."""
    by_b: dict = {}
    for row in rows:
        by_b.setdefault(row["record"].B, {}).setdefault(row["model"], []).append(row["record"])
    summary = {}
    for B, per_model in sorted(by_b.items()):
        solve_pct, generated, cost, wall = [], [], [], []
        for recs in per_model.values():
            solve_pct.append(100.0 * sum(r.solved for r in recs) / len(recs))
            generated.append(float(np.mean([r.nodes_generated for r in recs])))
            solved = [r.solution_cost for r in recs if r.solved]
            cost.append(float(np.mean(solved)) if solved else float("nan"))
            wall.append(float(np.mean([r.wall_time_ms for r in recs])))

        def stats(xs):
            return (statistics.fmean(xs), statistics.stdev(xs) if len(xs) > 1 else 0.0)

        summary[B] = {
            "solved_pct": stats(solve_pct),
            "nodes_generated": stats(generated),
            "solution_cost": stats(cost),
            "wall_time_ms": stats(wall),
        }
    return summary


def depression_trace(model: HeuristicModel, instance: TestInstance, B: int = 1, lam: float = 0.6,
                     limits: Limits | None = None) -> list[tuple[int, float, float]]:
    """``(expansion_index, h, g)`` for every expanded node in selection order.

    A solved run ends with one extra row for the selected goal (h is 0 there).
    """
    rows = []
    record = bwas(instance.spec, model, instance.start, B, lam, limits,
                  on_expand=lambda i, s, h, g: rows.append((i, h, g)))
    if record.solved:
        rows.append((len(rows), 0.0, record.solution_cost))
    return rows


def write_trace_csv(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for i, h, g in rows:
        writer.writerow([i, repr(float(h)), repr(float(g))])
