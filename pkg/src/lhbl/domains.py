"""Puzzle state spaces: sliding tile, Lights Out and the N x N x N Rubik's cube.

States are plain tuples of small ints so they hash, compare and serialize
cheaply:

* sliding tile -- permutation of ``0..N`` in row-major cell order, 0 is the blank
* Lights Out -- ``N*N`` entries in ``{0, 1}``
* Rubik's cube -- ``6*N*N`` sticker colors in ``0..5``, face-major (U, D, L, R, F, B)

All move sets are self-inverse as a set: every operator has an inverse
operator of equal cost, so successors double as predecessors.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from operator import itemgetter
from typing import Sequence

import numpy as np

from .errors import ConfigError, MalformedStateError

PuzzleState = tuple


class Family(str, enum.Enum):
    SLIDING_TILE = "sliding_tile"
    LIGHTS_OUT = "lights_out"
    RUBIKS_CUBE = "rubiks_cube"


# family tags used by the checkpoint format; never renumber
FAMILY_TAGS = {Family.SLIDING_TILE: 1, Family.LIGHTS_OUT: 2, Family.RUBIKS_CUBE: 3}

# desk-scale scramble depths used when a config does not override them
DEFAULT_DEPTH_MAX = {
    (Family.SLIDING_TILE, 8): 31,
    (Family.LIGHTS_OUT, 3): 9,
    (Family.LIGHTS_OUT, 5): 25,
    (Family.RUBIKS_CUBE, 2): 14,
}


@dataclass(frozen=True)
class StateSpaceSpec:
    """A puzzle family at a given size.

    ``size`` means: number of tiles for the sliding tile puzzle (8, 15, 24, 35),
    grid side for Lights Out, and cube edge length for the Rubik's cube.
    """

    family: Family
    size: int
    unit_cost: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not isinstance(self.size, (int, np.integer)) or self.size < 1:
            raise ConfigError(f"size must be a positive integer, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))
        if not (self.unit_cost > 0 and math.isfinite(self.unit_cost)):
            raise ConfigError(f"unit_cost must be positive and finite, got {self.unit_cost!r}")
        if self.family is Family.SLIDING_TILE:
            side = math.isqrt(self.size + 1)
            if side * side != self.size + 1 or side < 2:
                raise ConfigError(f"sliding tile size must be k*k - 1 with k >= 2, got {self.size}")
        if self.family is Family.RUBIKS_CUBE and self.size < 2:
            raise ConfigError("rubiks cube size must be >= 2")

    @property
    def default_depth_max(self) -> int:
        return DEFAULT_DEPTH_MAX.get((self.family, self.size), 30)

    def __str__(self):
        return f"{self.family.value}-{self.size}"


class _SlidingTile:
    def __init__(self, spec: StateSpaceSpec):
        n = spec.size + 1
        side = math.isqrt(n)
        self.n = n
        self.side = side
        self.goal = tuple(range(1, n)) + (0,)
        self.op_names = ("U", "D", "L", "R")
        self.inverse_ops = (1, 0, 3, 2)
        self.encoding_dim = n * n
        # moves[blank_pos] -> list of (op, new_blank_pos); op names the blank's direction
        self.moves = []
        for pos in range(n):
            r, c = divmod(pos, side)
            options = []
            if r > 0:
                options.append((0, pos - side))
            if r < side - 1:
                options.append((1, pos + side))
            if c > 0:
                options.append((2, pos - 1))
            if c < side - 1:
                options.append((3, pos + 1))
            self.moves.append(options)
        self.goal_row = [0] * n
        self.goal_col = [0] * n
        for tile in range(1, n):
            self.goal_row[tile], self.goal_col[tile] = divmod(tile - 1, side)

    def validate(self, s):
        if len(s) != self.n or sorted(s) != list(range(self.n)):
            raise MalformedStateError(f"not a permutation of 0..{self.n - 1}: {s!r}")

    def expand(self, s):
        blank = s.index(0)
        out = []
        for op, target in self.moves[blank]:
            child = list(s)
            child[blank] = s[target]
            child[target] = 0
            out.append((op, tuple(child)))
        return out

    def apply(self, s, op):
        blank = s.index(0)
        for move_op, target in self.moves[blank]:
            if move_op == op:
                child = list(s)
                child[blank] = s[target]
                child[target] = 0
                return tuple(child)
        return None

    def encode_batch(self, arr):
        return np.eye(self.n, dtype=np.float64)[arr].reshape(len(arr), -1)

    def manhattan(self, s):
        side = self.side
        total = 0
        for pos, tile in enumerate(s):
            if tile:
                r, c = divmod(pos, side)
                total += abs(r - self.goal_row[tile]) + abs(c - self.goal_col[tile])
        return total

    def state_count(self):
        # all tile arrangements; only half are reachable
        return float(math.factorial(self.n))


class _LightsOut:
    def __init__(self, spec: StateSpaceSpec):
        n = spec.size
        self.side = n
        self.cells = n * n
        self.goal = (0,) * self.cells
        self.op_names = tuple(f"P{r}{c}" for r in range(n) for c in range(n))
        self.inverse_ops = tuple(range(self.cells))
        self.encoding_dim = self.cells
        self.masks = []
        for r in range(n):
            for c in range(n):
                mask = [0] * self.cells
                for dr, dc in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < n and 0 <= cc < n:
                        mask[rr * n + cc] = 1
                self.masks.append(tuple(mask))

    def validate(self, s):
        if len(s) != self.cells or any(v not in (0, 1) for v in s):
            raise MalformedStateError(f"expected {self.cells} lights in {{0, 1}}: {s!r}")

    def expand(self, s):
        return [(op, tuple(a ^ b for a, b in zip(s, mask))) for op, mask in enumerate(self.masks)]

    def apply(self, s, op):
        return tuple(a ^ b for a, b in zip(s, self.masks[op]))

    def encode_batch(self, arr):
        return arr.astype(np.float64)

    def state_count(self):
        return 2.0 ** self.cells


class _RubiksCube:
    # (axis, sign) per face in sticker order U, D, L, R, F, B
    FACES = ((1, 1), (1, -1), (0, -1), (0, 1), (2, 1), (2, -1))
    FACE_NAMES = "UDLRFB"

    def __init__(self, spec: StateSpaceSpec):
        n = spec.size
        self.n = n
        self.stickers = 6 * n * n
        self.goal = tuple(f for f in range(6) for _ in range(n * n))
        self.encoding_dim = self.stickers * 6
        self.op_names = tuple(f"{name}{suffix}" for name in self.FACE_NAMES for suffix in ("", "'"))
        self.inverse_ops = tuple(op ^ 1 for op in range(12))

        # sticker centers on a doubled integer lattice: face coordinate is +-n,
        # the other two run over -(n-1), -(n-3), ..., n-1
        span = range(-(n - 1), n, 2)
        points = []
        for axis, sign in self.FACES:
            others = [a for a in range(3) if a != axis]
            for u in span:
                for v in span:
                    p = [0, 0, 0]
                    p[axis] = sign * n
                    p[others[0]] = u
                    p[others[1]] = v
                    points.append(tuple(p))
        index = {p: i for i, p in enumerate(points)}

        self.perms = []
        for axis, sign in self.FACES:
            for quarter in (-sign, sign):  # clockwise seen from outside the face, then counter
                src = list(range(self.stickers))
                for i, p in enumerate(points):
                    if sign * p[axis] >= n - 1:
                        src[index[_rotate(p, axis, quarter)]] = i
                self.perms.append(itemgetter(*src))

    def validate(self, s):
        if len(s) != self.stickers:
            raise MalformedStateError(f"expected {self.stickers} stickers, got {len(s)}")
        counts = [0] * 6
        for v in s:
            if not (isinstance(v, (int, np.integer)) and 0 <= v < 6):
                raise MalformedStateError(f"sticker color out of range: {v!r}")
            counts[v] += 1
        if any(c != self.n * self.n for c in counts):
            raise MalformedStateError(f"sticker color counts {counts} are not uniform")

    def expand(self, s):
        return [(op, perm(s)) for op, perm in enumerate(self.perms)]

    def apply(self, s, op):
        return self.perms[op](s)

    def encode_batch(self, arr):
        return np.eye(6, dtype=np.float64)[arr].reshape(len(arr), -1)

    def state_count(self):
        if self.n == 2:
            return 3674160.0 * 24
        if self.n == 3:
            return 4.3252003274489856e19
        # generic bound: every sticker arrangement
        return math.factorial(self.stickers) / math.factorial(self.n * self.n) ** 6


def _rotate(p, axis, quarter):
    """Rotate lattice point ``p`` by ``quarter`` * 90 degrees about ``axis`` (right-hand rule)."""
    x, y, z = p
    if quarter < 0:
        for _ in range(3):
            p = _rotate(p, axis, 1)
        return p
    if axis == 0:
        return (x, -z, y)
    if axis == 1:
        return (z, y, -x)
    return (-y, x, z)


@functools.lru_cache(maxsize=None)
def _impl(spec: StateSpaceSpec):
    if spec.family is Family.SLIDING_TILE:
        return _SlidingTile(spec)
    if spec.family is Family.LIGHTS_OUT:
        return _LightsOut(spec)
    return _RubiksCube(spec)


def goal_state(spec: StateSpaceSpec) -> PuzzleState:
    return _impl(spec).goal


def is_goal(spec: StateSpaceSpec, s: PuzzleState) -> bool:
    return s == _impl(spec).goal


def validate_state(spec: StateSpaceSpec, s) -> PuzzleState:
    """Return ``s`` as a canonical tuple or raise :class:`MalformedStateError`."""
    try:
        s = tuple(int(v) for v in s)
    except (TypeError, ValueError) as exc:
        raise MalformedStateError(f"state is not a sequence of integers: {s!r}") from exc
    _impl(spec).validate(s)
    return s


def num_ops(spec: StateSpaceSpec) -> int:
    return len(_impl(spec).op_names)


def op_name(spec: StateSpaceSpec, op: int) -> str:
    return _impl(spec).op_names[op]


def inverse_op(spec: StateSpaceSpec, op: int) -> int:
    return _impl(spec).inverse_ops[op]


def expand(spec: StateSpaceSpec, s: PuzzleState) -> list[tuple[int, PuzzleState, float]]:
    """All legal ``(operator, child, cost)`` triples from ``s``. Does not validate ``s``."""
    cost = spec.unit_cost
    return [(op, child, cost) for op, child in _impl(spec).expand(s)]


def successors(spec: StateSpaceSpec, s: PuzzleState) -> list[tuple[PuzzleState, float]]:
    s = validate_state(spec, s)
    cost = spec.unit_cost
    return [(child, cost) for _, child in _impl(spec).expand(s)]


def apply_op(spec: StateSpaceSpec, s: PuzzleState, op: int) -> PuzzleState:
    child = _impl(spec).apply(s, op)
    if child is None:
        raise MalformedStateError(f"operator {op_name(spec, op)} is not legal in {s!r}")
    return child


def replay(spec: StateSpaceSpec, start: PuzzleState, ops: Sequence[int]) -> tuple[PuzzleState, float]:
    """Apply ``ops`` from ``start``; return the final state and the accumulated cost."""
    s = start
    cost = 0.0
    for op in ops:
        s = apply_op(spec, s, op)
        cost += spec.unit_cost
    return s, cost


def scramble(spec: StateSpaceSpec, depth: int, rng: np.random.Generator) -> PuzzleState:
    """Walk ``depth`` uniformly random legal moves away from the goal."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    impl = _impl(spec)
    s = impl.goal
    for _ in range(depth):
        options = impl.expand(s)
        s = options[int(rng.integers(len(options)))][1]
    return s


def encoding_dim(spec: StateSpaceSpec) -> int:
    return _impl(spec).encoding_dim


def encode_batch(spec: StateSpaceSpec, states: Sequence[PuzzleState]) -> np.ndarray:
    """One-hot encode states into a ``(len(states), encoding_dim)`` float64 array."""
    impl = _impl(spec)
    if len(states) == 0:
        return np.zeros((0, impl.encoding_dim))
    arr = np.asarray(states, dtype=np.intp)
    return impl.encode_batch(arr)


def encode(spec: StateSpaceSpec, s: PuzzleState) -> np.ndarray:
    return encode_batch(spec, [s])[0]


def manhattan(spec: StateSpaceSpec, s: PuzzleState) -> float:
    if spec.family is not Family.SLIDING_TILE:
        raise ConfigError("manhattan distance is only defined for the sliding tile puzzle")
    return _impl(spec).manhattan(s) * spec.unit_cost


def permutation_parity(perm: Sequence[int]) -> int:
    """Parity (0 even, 1 odd) of a permutation of ``0..n-1`` via cycle counting."""
    n = len(perm)
    seen = [False] * n
    cycles = 0
    for i in range(n):
        if not seen[i]:
            cycles += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return (n - cycles) % 2


def is_solvable_tiles(spec: StateSpaceSpec, s: PuzzleState) -> bool:
    """Reachability of a sliding tile state from the goal.

    Permutation parity (with the blank as tile n) must match the parity of the
    blank's taxicab distance from its goal corner.
    """
    impl = _impl(spec)
    n = impl.n
    # map tiles to their goal cells: tile t -> t-1, blank -> n-1
    perm = [(t - 1) if t else n - 1 for t in s]
    blank = s.index(0)
    r, c = divmod(blank, impl.side)
    dist = (impl.side - 1 - r) + (impl.side - 1 - c)
    return permutation_parity(perm) == dist % 2


def state_count_estimate(spec: StateSpaceSpec) -> float:
    return _impl(spec).state_count()
