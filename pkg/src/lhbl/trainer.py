"""Training loops for single-step (SSBL), sampling-only (LHBL_S) and limited-horizon (LHBL) learning."""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import domains
from .domains import PuzzleState, StateSpaceSpec
from .errors import ConfigError, TrainingDivergedError
from .heuristics import HeuristicModel, LabelBatch, Provenance, make_model, save_checkpoint
from .labeler import labels_to_batch, lhb_values, ssb_graph_batch, ssb_labels
from .search import HorizonAlgo, run_limited_horizon

log = logging.getLogger(__name__)

LOG_HEADER = ["step", "samples", "graphs", "labels", "loss", "mean_label", "target_syncs"]
LOSS_CEILING = 1e8


class Mode(str, enum.Enum):
    SSBL = "ssbl"
    LHBL_S = "lhbl_s"
    LHBL = "lhbl"


@dataclass
class TrainConfig:
    spec: StateSpaceSpec
    mode: Mode = Mode.SSBL
    horizon: int | None = None
    search_algo: HorizonAlgo = HorizonAlgo.ASTAR
    scramble_depth_max: int | None = None
    samples_budget: int = 100_000
    minibatch_size: int = 256
    lr: float = 1e-3
    target_sync_interval: int = 1000
    seed: int = 0
    checkpoint_every: int | None = None
    output_dir: str | None = None
    include_leaves: bool = False
    model_kind: str = "mlp"
    hidden: tuple = (256, 256)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.search_algo = HorizonAlgo(self.search_algo)
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.mode is not Mode.SSBL and (self.horizon is None or self.horizon < 1):
            raise ConfigError(f"mode {self.mode.value} requires horizon >= 1 (key train.horizon)")
        if self.scramble_depth_max is None:
            self.scramble_depth_max = self.spec.default_depth_max
        for key in ("minibatch_size", "target_sync_interval"):
            if getattr(self, key) < 1:
                raise ConfigError(f"train.{key} must be positive")
        if self.samples_budget < 0 or self.scramble_depth_max < 0:
            raise ConfigError("train.samples_budget and train.scramble_depth_max must be >= 0")
        if self.lr <= 0:
            raise ConfigError("train.lr must be positive")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ConfigError("train.checkpoint_every must be positive")

    @property
    def depth_max(self) -> int:
        return int(self.scramble_depth_max)


@dataclass
class LogRow:
    step: int
    samples: int
    graphs: int
    labels: int
    loss: float
    mean_label: float
    target_syncs: int

    def as_csv(self) -> list[str]:
        return [str(self.step), str(self.samples), str(self.graphs), str(self.labels),
                repr(self.loss), repr(self.mean_label), str(self.target_syncs)]


@dataclass
class TrainResult:
    model: HeuristicModel
    log: list[LogRow] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)


def sample_start_states(spec: StateSpaceSpec, count: int, scramble_depth_max: int,
                        rng: np.random.Generator) -> list[PuzzleState]:
    """Scramble ``count`` states with depths drawn uniformly from ``0..scramble_depth_max``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    depths = rng.integers(0, scramble_depth_max + 1, size=count)
    return [domains.scramble(spec, int(d), rng) for d in depths]


def graph_labels(spec: StateSpaceSpec, model: HeuristicModel, start: PuzzleState, mode: Mode,
                 horizon: int, algo: HorizonAlgo, include_leaves: bool = False) -> LabelBatch:
    """Run one horizon search from ``start`` and label its vertices per ``mode``."""
    graph = run_limited_horizon(spec, model, start, horizon, algo)
    if mode is Mode.LHBL:
        values = lhb_values(graph, model)
        return labels_to_batch(dict(zip(graph.states, values)), graph, include_leaves)
    return ssb_graph_batch(spec, graph, model, include_leaves)


def root_label(spec: StateSpaceSpec, model: HeuristicModel, start: PuzzleState, mode: Mode,
               horizon: int, algo: HorizonAlgo = HorizonAlgo.ASTAR) -> float:
    graph = run_limited_horizon(spec, model, start, horizon, algo)
    if Mode(mode) is Mode.LHBL:
        return lhb_values(graph, model)[0]
    return float(ssb_labels(spec, model, [start])[0])


def _merge_min(pending: dict, batch: LabelBatch) -> None:
    for s, t in zip(batch.states, batch.targets):
        old = pending.get(s)
        if old is None or t < old:
            pending[s] = float(t)


def _check_loss(loss: float, step: int) -> None:
    if not math.isfinite(loss) or loss > LOSS_CEILING:
        raise TrainingDivergedError(f"loss {loss!r} at step {step} exceeds the divergence guard")


def write_log(rows: Sequence[LogRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def train(config: TrainConfig, model: HeuristicModel | None = None) -> TrainResult:
    """Train until ``samples_budget`` labeled examples have been consumed.

    The target copy is refreshed every ``target_sync_interval`` gradient steps;
    labels generated before a refresh are still trained on.
    """
    spec = config.spec
    if model is None:
        model = make_model(spec, config.model_kind, config.hidden, seed=config.seed)
    if not model.trainable:
        raise ConfigError(f"model kind {model.kind.value} cannot be trained")
    out_dir = None
    if config.output_dir is not None:
        out_dir = Path(config.output_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc

    rng = np.random.default_rng(config.seed)
    result = TrainResult(model)
    step = samples = graphs = labels = syncs = 0
    pending: dict = {}
    budget = config.samples_budget

    while labels < budget:
        size = min(config.minibatch_size, budget - labels)
        if config.mode is Mode.SSBL:
            states = sample_start_states(spec, size, config.depth_max, rng)
            batch = LabelBatch(states, ssb_labels(spec, model, states), Provenance.SSB)
            samples += size
        else:
            while len(pending) < size:
                start = sample_start_states(spec, 1, config.depth_max, rng)[0]
                samples += 1
                graphs += 1
                _merge_min(pending, graph_labels(spec, model, start, config.mode, config.horizon,
                                                 config.search_algo, config.include_leaves))
            take = list(pending.items())[:size]
            for s, _ in take:
                del pending[s]
            provenance = Provenance.LHB if config.mode is Mode.LHBL else Provenance.SSB
            batch = LabelBatch([s for s, _ in take], [t for _, t in take], provenance)

        loss = model.train_step(batch, config.lr)
        step += 1
        labels += len(batch)
        _check_loss(loss, step)
        if step % config.target_sync_interval == 0:
            model.sync_target()
            syncs += 1
        result.log.append(LogRow(step, samples, graphs, labels, loss, float(np.mean(batch.targets)), syncs))
        if out_dir is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
            result.checkpoints.append(_checkpoint(model, out_dir, step))
        if step % 100 == 0:
            log.info("step %d labels %d loss %.4g", step, labels, loss)

    if out_dir is not None:
        if step and not (config.checkpoint_every and step % config.checkpoint_every == 0):
            result.checkpoints.append(_checkpoint(model, out_dir, step))
        write_log(result.log, out_dir / "train_log.csv")
    return result


def _checkpoint(model, out_dir: Path, step: int) -> Path:
    path = out_dir / f"ckpt_{step}.hh"
    save_checkpoint(model, path)
    return path


def samples_accounting(rows: Sequence[LogRow]) -> dict:
    """Environment samples, horizon graphs and labeled examples consumed by a run."""
    if not rows:
        return {"samples": 0, "graphs": 0, "labels": 0, "labels_per_sample": 0.0}
    last = rows[-1]
    return {
        "samples": last.samples,
        "graphs": last.graphs,
        "labels": last.labels,
        "labels_per_sample": last.labels / last.samples if last.samples else 0.0,
    }


# -- tabular value iteration over an enumerated state space --------------------

def sweep(spec: StateSpaceSpec, model: HeuristicModel, mode: Mode, states: Iterable[PuzzleState],
          horizon: int = 10, algo: HorizonAlgo = HorizonAlgo.ASTAR, chunk: int = 4096) -> int:
    """Label every state once against the frozen target, apply the labels, then sync.

    With ``Mode.LHBL``/``Mode.LHBL_S`` each state seeds its own horizon search
    and receives the label of that search's root.
    """
    mode = Mode(mode)
    states = list(states)
    for i in range(0, len(states), chunk):
        part = states[i:i + chunk]
        if mode is Mode.SSBL:
            targets = ssb_labels(spec, model, part)
        else:
            targets = [root_label(spec, model, s, mode, horizon, algo) for s in part]
        model.train_step(LabelBatch(part, targets), 1.0)
    applied = len(states)
    model.sync_target()
    return applied


def max_abs_error(model: HeuristicModel, states: Sequence[PuzzleState], truth: Sequence[float]) -> float:
    values = model.raw_batch(states)
    return float(np.max(np.abs(values - np.asarray(truth, dtype=np.float64))))


def value_iteration(spec: StateSpaceSpec, model: HeuristicModel, mode: Mode,
                    states: Sequence[PuzzleState], truth: Sequence[float], horizon: int = 10,
                    algo: HorizonAlgo = HorizonAlgo.ASTAR, tol: float = 1e-6,
                    max_sweeps: int = 200) -> list[float]:
    """Sweep until ``max |h - truth| < tol``; return the error after each sweep."""
    history = []
    for _ in range(max_sweeps):
        sweep(spec, model, mode, states, horizon, algo)
        err = max_abs_error(model, states, truth)
        history.append(err)
        log.info("%s sweep %d max error %.6g", mode.value, len(history), err)
        if err < tol:
            break
    return history
