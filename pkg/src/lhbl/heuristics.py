"""Cost-to-go estimators with a frozen target copy, plus the squared-error trainer.

Every model keeps two parameter sets: ``theta`` (trained) and ``target``
(a snapshot refreshed by :meth:`HeuristicModel.sync_target`).  Consumers get
clamped values (``>= 0``, exactly 0 on the goal); training sees raw outputs.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import domains
from .domains import FAMILY_TAGS, Family, PuzzleState, StateSpaceSpec
from .errors import CheckpointFormatError, ConfigError, DomainMismatchError

MAGIC = b"HHEUR1"


class Kind(str, enum.Enum):
    ZERO = "zero"
    MANHATTAN = "manhattan"
    TABULAR = "tabular"
    MLP = "mlp"


KIND_TAGS = {Kind.ZERO: 0, Kind.MANHATTAN: 1, Kind.TABULAR: 2, Kind.MLP: 3}
ACTIVATION_TAGS = {"relu": 0}


class Provenance(str, enum.Enum):
    SSB = "ssb"
    LHB = "lhb"


@dataclass
class LabelBatch:
    states: list
    targets: np.ndarray
    provenance: Provenance = Provenance.SSB

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if len(self.states) != len(self.targets):
            raise ValueError("states and targets differ in length")
        if not np.all(np.isfinite(self.targets)) or np.any(self.targets < 0):
            raise ValueError("label targets must be finite and nonnegative")

    def __len__(self):
        return len(self.states)


class HeuristicModel:
    kind: Kind

    def __init__(self, spec: StateSpaceSpec):
        self.spec = spec
        self._goal = domains.goal_state(spec)

    def raw_batch(self, states: Sequence[PuzzleState], use_target: bool = False) -> np.ndarray:
        raise NotImplementedError

    def evaluate_batch(self, states: Sequence[PuzzleState], use_target: bool = False) -> np.ndarray:
        """Clamped heuristic values; goal states always map to 0."""
        values = np.maximum(self.raw_batch(states, use_target), 0.0)
        goal = self._goal
        for i, s in enumerate(states):
            if s == goal:
                values[i] = 0.0
        return values

    def evaluate(self, state: PuzzleState, use_target: bool = False) -> float:
        return float(self.evaluate_batch([state], use_target)[0])

    def train_step(self, batch: LabelBatch, lr: float) -> float:
        raise ConfigError(f"{self.kind.value} heuristics are not trainable")

    def sync_target(self) -> None:
        pass

    @property
    def trainable(self) -> bool:
        return False


class ZeroHeuristic(HeuristicModel):
    kind = Kind.ZERO

    def raw_batch(self, states, use_target=False):
        return np.zeros(len(states))


class ManhattanHeuristic(HeuristicModel):
    kind = Kind.MANHATTAN

    def __init__(self, spec):
        if spec.family is not Family.SLIDING_TILE:
            raise ConfigError("manhattan heuristic requires the sliding tile family")
        super().__init__(spec)

    def raw_batch(self, states, use_target=False):
        return np.array([domains.manhattan(self.spec, s) for s in states], dtype=np.float64)


class TabularHeuristic(HeuristicModel):
    """One stored value per state; unseen states read as 0. Updates are exact assignments."""

    kind = Kind.TABULAR

    def __init__(self, spec, values: dict | None = None):
        super().__init__(spec)
        self.theta: dict = dict(values or {})
        self.target: dict = dict(self.theta)

    @property
    def trainable(self):
        return True

    def raw_batch(self, states, use_target=False):
        table = self.target if use_target else self.theta
        get = table.get
        return np.array([get(s, 0.0) for s in states], dtype=np.float64)

    def train_step(self, batch: LabelBatch, lr: float = 1.0) -> float:
        if len(batch) == 0:
            raise ValueError("empty batch")
        prior = self.raw_batch(batch.states)
        loss = float(np.mean((batch.targets - prior) ** 2))
        for s, t in zip(batch.states, batch.targets):
            self.theta[s] = float(t)
        return loss

    def sync_target(self):
        self.target = dict(self.theta)


@dataclass
class MlpArch:
    input_dim: int
    hidden: tuple = (256, 256)
    activation: str = "relu"

    @property
    def widths(self) -> tuple:
        return (self.input_dim, *self.hidden, 1)

    def shapes(self) -> list[tuple[tuple[int, int], int]]:
        w = self.widths
        return [((w[i], w[i + 1]), w[i + 1]) for i in range(len(w) - 1)]

    @property
    def num_params(self) -> int:
        return sum(a * b + n for (a, b), n in self.shapes())


def unflatten(arch: MlpArch, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    layers = []
    pos = 0
    for (fan_in, fan_out), _ in arch.shapes():
        w = flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = flat[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def mlp_forward(arch: MlpArch, flat: np.ndarray, x: np.ndarray) -> np.ndarray:
    layers = unflatten(arch, flat)
    a = x
    for w, b in layers[:-1]:
        a = np.maximum(a @ w + b, 0.0)
    w, b = layers[-1]
    return (a @ w + b)[:, 0]


def mlp_loss_and_grad(arch: MlpArch, flat: np.ndarray, x: np.ndarray,
                      y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error of raw outputs against ``y`` and its gradient w.r.t. ``flat``."""
    layers = unflatten(arch, flat)
    acts = [x]
    pre = []
    a = x
    for w, b in layers[:-1]:
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    w_out, b_out = layers[-1]
    out = (a @ w_out + b_out)[:, 0]
    n = len(y)
    diff = out - y
    loss = float(np.mean(diff * diff))

    grads = []
    delta = (2.0 / n) * diff[:, None]
    grads.append((acts[-1].T @ delta, delta.sum(axis=0)))
    back = delta @ w_out.T
    for i in range(len(layers) - 2, -1, -1):
        dz = back * (pre[i] > 0)
        grads.append((acts[i].T @ dz, dz.sum(axis=0)))
        if i:
            back = dz @ layers[i][0].T
    grads.reverse()
    flat_grad = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    return loss, flat_grad


class MlpHeuristic(HeuristicModel):
    """Fully connected rectifier network over one-hot encoded states.

    Parameters are stored as float32 (the checkpoint precision) and promoted
    to float64 for every forward and backward pass.
    """

    kind = Kind.MLP

    def __init__(self, spec, hidden=(256, 256), seed: int = 0, theta: np.ndarray | None = None,
                 target: np.ndarray | None = None):
        super().__init__(spec)
        self.arch = MlpArch(domains.encoding_dim(spec), tuple(int(h) for h in hidden))
        if theta is None:
            theta = self._init_params(np.random.default_rng(seed))
        theta = np.asarray(theta, dtype=np.float32)
        if theta.shape != (self.arch.num_params,):
            raise ConfigError(f"expected {self.arch.num_params} parameters, got {theta.shape}")
        self.theta = theta
        self.target = theta.copy() if target is None else np.asarray(target, dtype=np.float32)
        if self.target.shape != self.theta.shape:
            raise ConfigError("target parameters differ in shape from theta")

    def _init_params(self, rng):
        chunks = []
        for (fan_in, fan_out), _ in self.arch.shapes():
            chunks.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        return np.concatenate(chunks).astype(np.float32)

    @property
    def trainable(self):
        return True

    def _encode(self, states):
        x = domains.encode_batch(self.spec, states)
        if x.shape[1] != self.arch.input_dim:
            raise ConfigError(f"encoded dimension {x.shape[1]} != input width {self.arch.input_dim}")
        return x

    def raw_batch(self, states, use_target=False):
        if len(states) == 0:
            return np.zeros(0)
        params = (self.target if use_target else self.theta).astype(np.float64)
        return mlp_forward(self.arch, params, self._encode(states))

    def train_step(self, batch: LabelBatch, lr: float = 1e-3) -> float:
        if len(batch) == 0:
            raise ValueError("empty batch")
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        params = self.theta.astype(np.float64)
        loss, grad = mlp_loss_and_grad(self.arch, params, self._encode(batch.states), batch.targets)
        self.theta = (params - lr * grad).astype(np.float32)
        return loss

    def sync_target(self):
        self.target = self.theta.copy()


def make_model(spec: StateSpaceSpec, kind: str | Kind, hidden=(256, 256), seed: int = 0) -> HeuristicModel:
    kind = Kind(kind)
    if kind is Kind.ZERO:
        return ZeroHeuristic(spec)
    if kind is Kind.MANHATTAN:
        return ManhattanHeuristic(spec)
    if kind is Kind.TABULAR:
        return TabularHeuristic(spec)
    return MlpHeuristic(spec, hidden=hidden, seed=seed)


# -- checkpoints -------------------------------------------------------------
#
# layout (little endian):
#   b"HHEUR1" | family u32 | size u32 | kind u32 | n_widths u32 | widths u32*n
#   mlp:      activation u32 | theta f32*P | target f32*P
#   tabular:  state_len u32 | count u32 | (state u8*L, value f64)*count   for theta, then target

def _write_table(buf, table: dict, state_len: int):
    buf.write(struct.pack("<I", len(table)))
    for s in sorted(table):
        buf.write(bytes(s))
        buf.write(struct.pack("<d", table[s]))


def checkpoint_bytes(model: HeuristicModel) -> bytes:
    buf = io.BytesIO()
    spec = model.spec
    buf.write(MAGIC)
    widths = model.arch.widths if isinstance(model, MlpHeuristic) else ()
    buf.write(struct.pack("<4I", FAMILY_TAGS[spec.family], spec.size, KIND_TAGS[model.kind], len(widths)))
    buf.write(struct.pack(f"<{len(widths)}I", *widths))
    if isinstance(model, MlpHeuristic):
        buf.write(struct.pack("<I", ACTIVATION_TAGS[model.arch.activation]))
        buf.write(model.theta.astype("<f4").tobytes())
        buf.write(model.target.astype("<f4").tobytes())
    elif isinstance(model, TabularHeuristic):
        state_len = len(model._goal)
        buf.write(struct.pack("<I", state_len))
        _write_table(buf, model.theta, state_len)
        _write_table(buf, model.target, state_len)
    return buf.getvalue()


def save_checkpoint(model: HeuristicModel, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError("checkpoint is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u32s(self, count: int) -> tuple:
        return struct.unpack(f"<{count}I", self.take(4 * count))


def _read_table(r: _Reader, state_len: int) -> dict:
    table = {}
    for _ in range(r.u32()):
        s = tuple(r.take(state_len))
        (value,) = struct.unpack("<d", r.take(8))
        table[s] = value
    return table


def load_checkpoint(path, expected_spec: StateSpaceSpec | None = None) -> HeuristicModel:
    """Read a checkpoint; raise :class:`DomainMismatchError` if it is bound to another domain."""
    return checkpoint_from_bytes(Path(path).read_bytes(), expected_spec)


def checkpoint_from_bytes(data: bytes, expected_spec: StateSpaceSpec | None = None) -> HeuristicModel:
    if data[:4] != MAGIC[:4]:
        raise CheckpointFormatError("not a heuristic checkpoint (bad magic)")
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointFormatError(f"unsupported checkpoint version {data[4:6]!r}")
    r = _Reader(data)
    r.take(len(MAGIC))
    family_tag, size, kind_tag, n_widths = r.u32s(4)
    widths = r.u32s(n_widths)
    families = {v: k for k, v in FAMILY_TAGS.items()}
    kinds = {v: k for k, v in KIND_TAGS.items()}
    if family_tag not in families or kind_tag not in kinds:
        raise CheckpointFormatError("unknown family or kind tag")
    spec = StateSpaceSpec(families[family_tag], size)
    if expected_spec is not None and (expected_spec.family, expected_spec.size) != (spec.family, spec.size):
        raise DomainMismatchError(f"checkpoint is bound to {spec}, run uses {expected_spec}")
    if expected_spec is not None:
        spec = expected_spec
    kind = kinds[kind_tag]

    if kind is Kind.MLP:
        act_tag = r.u32()
        if act_tag not in ACTIVATION_TAGS.values() or len(widths) < 2:
            raise CheckpointFormatError("bad architecture record")
        if widths[0] != domains.encoding_dim(spec) or widths[-1] != 1:
            raise CheckpointFormatError("architecture does not match the domain encoding")
        arch = MlpArch(widths[0], tuple(widths[1:-1]))
        p = arch.num_params
        theta = np.frombuffer(r.take(4 * p), dtype="<f4").astype(np.float32)
        target = np.frombuffer(r.take(4 * p), dtype="<f4").astype(np.float32)
        model = MlpHeuristic(spec, hidden=arch.hidden, theta=theta, target=target)
    elif kind is Kind.TABULAR:
        state_len = r.u32()
        model = TabularHeuristic(spec)
        model.theta = _read_table(r, state_len)
        model.target = _read_table(r, state_len)
    else:
        model = make_model(spec, kind)
    if r.pos != len(data):
        raise CheckpointFormatError("trailing bytes after checkpoint payload")
    return model
