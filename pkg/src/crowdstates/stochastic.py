"""Weighted transition tables and seeded probabilistic walks.

A WeightTable overlays non-negative weights on the schema's legal
transitions; anything not keyed explicitly falls back to the table's
default weight (1.0 unless set), so an empty table walks uniformly.
``normalize`` turns the effective weights out of a state into a
probability distribution and ``walk`` iterates it until the terminal
state or a step budget is hit.

Determinism contract: randomness comes from a self-contained splitmix64
generator seeded per walk, with targets considered in canonical order and
selected by cumulative-probability inversion. The same (seed, table,
schema, config) always produces the same sequence, on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    InvalidConfigError,
    TerminalStateError,
    UnknownStateError,
    WeightFileError,
    ZeroMassError,
)
from .schema import ModelSchema, PLANNED, StateId, TERMINAL, state

_U64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64: a 64-bit counter advanced by a fixed increment, hashed
    through two multiply-xorshift rounds. Small, portable and stable."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        if not 0 <= seed <= _U64:
            raise InvalidConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self._state = seed

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _U64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53


@dataclass
class WeightTable:
    """Per-ordered-pair transition weights plus a default for unkeyed pairs.

    Treat instances as frozen once shared: walks may cache derived
    distributions. Keyed pairs must be legal under the schema they are used
    with; explicit zeros are allowed and simply mask a transition.
    """

    weights: dict[StateId, dict[StateId, float]] = field(default_factory=dict)
    default_weight: float = 1.0

    def effective(self, frm: StateId, to: StateId) -> float:
        return self.weights.get(frm, {}).get(to, self.default_weight)


def normalize(table: WeightTable, schema: ModelSchema, frm: StateId) -> dict[StateId, float]:
    """Probability over every legal target of ``frm``, proportional to
    effective weights. Sums to 1 within 1e-12; zero-weight targets stay in
    the mapping with probability 0."""
    if frm == TERMINAL:
        raise TerminalStateError(frm)
    targets = schema.legal_transitions_from(frm)
    keyed = table.weights.get(frm, {})
    for to, w in keyed.items():
        if w < 0:
            raise InvalidConfigError(f"negative weight {w} on {frm} -> {to}")
        if to not in targets:
            raise InvalidConfigError(f"weight on illegal pair {frm} -> {to}")
    total = 0.0
    raw = []
    for to in targets:
        w = table.effective(frm, to)
        raw.append((to, w))
        total += w
    if total <= 0.0:
        raise ZeroMassError(frm)
    return {to: w / total for to, w in raw}


def sample_next(table: WeightTable, schema: ModelSchema, frm: StateId, rng: SplitMix64) -> StateId:
    """Draw the next state from ``normalize``'s distribution, advancing ``rng``."""
    dist = normalize(table, schema, frm)
    r = rng.random()
    acc = 0.0
    last_positive = None
    for to, p in dist.items():
        if p > 0.0:
            last_positive = to
        acc += p
        if r < acc and p > 0.0:
            return to
    # float residue can leave acc fractionally under 1.0
    assert last_positive is not None
    return last_positive


@dataclass(frozen=True)
class WalkConfig:
    """Seeded walk parameters. ``start`` is an assembly state by default but
    any non-terminal schema state may be walked from."""

    seed: int
    max_steps: int
    start: StateId = PLANNED

    def __post_init__(self):
        if not 0 <= self.seed <= _U64:
            raise InvalidConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.max_steps < 1:
            raise InvalidConfigError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass(frozen=True)
class WalkResult:
    """Visited states in order, starting at the configured state."""

    states: tuple[StateId, ...]
    terminated: bool


def walk(table: WeightTable, schema: ModelSchema, config: WalkConfig) -> WalkResult:
    """Sample up to ``max_steps`` transitions from ``start``, stopping early
    at the terminal state. Fully determined by (seed, table, schema, config)."""
    schema._require(config.start)
    rng = SplitMix64(config.seed)
    states = [config.start]
    current = config.start
    for _ in range(config.max_steps):
        if current == TERMINAL:
            break
        current = sample_next(table, schema, current, rng)
        states.append(current)
    return WalkResult(states=tuple(states), terminated=current == TERMINAL)


def parse_weights(text: str, schema: ModelSchema) -> WeightTable:
    """Parse weight-file text: one ``from -> to weight`` triple per line,
    ``default <value>`` to set the fallback, ``#`` comments and blank lines
    ignored. Unknown states, illegal pairs, negative weights and duplicate
    lines are errors naming the line number."""
    weights: dict[StateId, dict[StateId, float]] = {}
    default_weight = 1.0
    default_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "default":
            if len(tokens) != 2:
                raise WeightFileError(lineno, "expected: default <value>")
            if default_seen:
                raise WeightFileError(lineno, "default weight set more than once")
            default_weight = _parse_weight(tokens[1], lineno)
            default_seen = True
            continue
        if len(tokens) != 4 or tokens[1] != "->":
            raise WeightFileError(lineno, "expected: <from> -> <to> <weight>")
        try:
            frm = state(tokens[0])
            to = state(tokens[2])
        except UnknownStateError as exc:
            raise WeightFileError(lineno, str(exc)) from None
        if not schema.is_legal_transition(frm, to):
            raise WeightFileError(lineno, f"illegal transition {frm} -> {to}")
        value = _parse_weight(tokens[3], lineno)
        row = weights.setdefault(frm, {})
        if to in row:
            raise WeightFileError(lineno, f"duplicate weight for {frm} -> {to}")
        row[to] = value
    return WeightTable(weights=weights, default_weight=default_weight)


def load_weights(path, schema: ModelSchema) -> WeightTable:
    with open(path, encoding="utf-8") as handle:
        return parse_weights(handle.read(), schema)


def _parse_weight(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise WeightFileError(lineno, f"not a number: {token!r}") from None
    if value < 0 or value != value:  # rejects nan as well
        raise WeightFileError(lineno, f"weight must be non-negative, got {token}")
    return value
