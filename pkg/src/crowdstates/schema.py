"""Canonical state space and transition topology of the crowd model.

A crowd lives in one of 18 states clustered into five phases:

* assembly - how the crowd forms: physical, spontaneous, planned
* mode - the crowd's rationale: spectator, participatory, transitory,
  conflict, expressive
* structure - physical configuration; mobile flow quality (chaotic,
  regular, laminar) or static density (sparse, solid, crush)
* dispersal - how it breaks up: routine, escaping, coerced
* terminal - absorbing end-of-life state, reachable only from dispersal

The default topology: assembly states have no incoming edges and no edges
among themselves, and each connects one-way to every mode, structure and
dispersal state. Mode, structure and dispersal states are fully
interconnected in both directions (within and across those three phases).
Each dispersal state connects one-way to terminal. Self-transitions are
never legal; dwell is represented by the absence of events.

Schema values are immutable and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import permutations

from .errors import UnknownStateError


class Phase(str, Enum):
    ASSEMBLY = "assembly"
    MODE = "mode"
    STRUCTURE = "structure"
    DISPERSAL = "dispersal"
    TERMINAL = "terminal"


_PHASE_ORDER = {
    Phase.ASSEMBLY: 0,
    Phase.MODE: 1,
    Phase.STRUCTURE: 2,
    Phase.DISPERSAL: 3,
    Phase.TERMINAL: 4,
}


@dataclass(frozen=True)
class StateId:
    """One state of the model, named in canonical lowercase dotted form.

    ``name`` carries the phase prefix (``mode.conflict``,
    ``structure.static.solid``); the sole terminal state is plain
    ``terminal``. Instances are value objects; the inventory below is the
    complete set accepted by every schema.
    """

    phase: Phase
    name: str

    @property
    def local(self) -> str:
        """Name without the phase prefix, e.g. ``static.solid`` or ``planned``."""
        _, _, rest = self.name.partition(".")
        return rest or self.name

    @property
    def sort_key(self) -> tuple[int, str]:
        return (_PHASE_ORDER[self.phase], self.name)

    def __str__(self) -> str:
        return self.name


PHYSICAL = StateId(Phase.ASSEMBLY, "assembly.physical")
SPONTANEOUS = StateId(Phase.ASSEMBLY, "assembly.spontaneous")
PLANNED = StateId(Phase.ASSEMBLY, "assembly.planned")

SPECTATOR = StateId(Phase.MODE, "mode.spectator")
PARTICIPATORY = StateId(Phase.MODE, "mode.participatory")
TRANSITORY = StateId(Phase.MODE, "mode.transitory")
CONFLICT = StateId(Phase.MODE, "mode.conflict")
EXPRESSIVE = StateId(Phase.MODE, "mode.expressive")

MOBILE_CHAOTIC = StateId(Phase.STRUCTURE, "structure.mobile.chaotic")
MOBILE_REGULAR = StateId(Phase.STRUCTURE, "structure.mobile.regular")
MOBILE_LAMINAR = StateId(Phase.STRUCTURE, "structure.mobile.laminar")
STATIC_SPARSE = StateId(Phase.STRUCTURE, "structure.static.sparse")
STATIC_SOLID = StateId(Phase.STRUCTURE, "structure.static.solid")
STATIC_CRUSH = StateId(Phase.STRUCTURE, "structure.static.crush")

ROUTINE = StateId(Phase.DISPERSAL, "dispersal.routine")
ESCAPING = StateId(Phase.DISPERSAL, "dispersal.escaping")
COERCED = StateId(Phase.DISPERSAL, "dispersal.coerced")

TERMINAL = StateId(Phase.TERMINAL, "terminal")

#: All 18 states in canonical order: phase order, then lexicographic by name.
ALL_STATES: tuple[StateId, ...] = tuple(
    sorted(
        [
            PHYSICAL, SPONTANEOUS, PLANNED,
            SPECTATOR, PARTICIPATORY, TRANSITORY, CONFLICT, EXPRESSIVE,
            MOBILE_CHAOTIC, MOBILE_REGULAR, MOBILE_LAMINAR,
            STATIC_SPARSE, STATIC_SOLID, STATIC_CRUSH,
            ROUTINE, ESCAPING, COERCED,
            TERMINAL,
        ],
        key=lambda s: s.sort_key,
    )
)

_STATES_BY_NAME = {s.name: s for s in ALL_STATES}
_CANONICAL_INDEX = {s: i for i, s in enumerate(ALL_STATES)}

ASSEMBLY_STATES = tuple(s for s in ALL_STATES if s.phase is Phase.ASSEMBLY)
MODE_STATES = tuple(s for s in ALL_STATES if s.phase is Phase.MODE)
STRUCTURE_STATES = tuple(s for s in ALL_STATES if s.phase is Phase.STRUCTURE)
DISPERSAL_STATES = tuple(s for s in ALL_STATES if s.phase is Phase.DISPERSAL)


def state(name: str) -> StateId:
    """Look up a state by canonical dotted name.

    Raises UnknownStateError for anything outside the closed inventory.
    """
    try:
        return _STATES_BY_NAME[name]
    except KeyError:
        raise UnknownStateError(name) from None


def states_of(phase: Phase) -> tuple[StateId, ...]:
    return tuple(s for s in ALL_STATES if s.phase is phase)


@dataclass(frozen=True)
class SchemaOptions:
    """Topology flags. Options only remove default edges, never add.

    ``adjacent_static_only`` restricts transitions among the three static
    density states to neighbouring bands (sparse<->solid, solid<->crush).
    """

    mode_internal: bool = True
    structure_internal: bool = True
    dispersal_internal: bool = True
    adjacent_static_only: bool = False


@dataclass(frozen=True)
class ModelSchema:
    """The state set plus a decidable legality relation over ordered pairs."""

    states: frozenset[StateId]
    legal: frozenset[tuple[StateId, StateId]]
    options: SchemaOptions = field(default_factory=SchemaOptions)

    def _require(self, s: StateId) -> None:
        if s not in self.states:
            raise UnknownStateError(s)

    def is_legal_transition(self, frm: StateId, to: StateId) -> bool:
        """True iff (frm, to) is a legal move. Self-transitions are never legal."""
        self._require(frm)
        self._require(to)
        return (frm, to) in self.legal

    def legal_transitions_from(self, frm: StateId) -> list[StateId]:
        """All legal targets from ``frm``, in canonical order."""
        self._require(frm)
        return [t for t in ALL_STATES if (frm, t) in self.legal]

    def to_dot(self) -> str:
        """Graph-description text: one cluster per phase, one edge per legal
        pair, with a mutually legal pair collapsed into a single two-headed
        edge. Output is byte-deterministic for a given schema."""
        lines = ["digraph crowd_model {", "  rankdir=TB;", "  node [shape=oval];"]
        for phase in Phase:
            members = [s for s in ALL_STATES if s.phase is phase and s in self.states]
            if not members:
                continue
            lines.append(f"  subgraph cluster_{phase.value} {{")
            lines.append(f'    label="{phase.value}";')
            for s in members:
                lines.append(f'    "{s.name}";')
            lines.append("  }")
        for a in ALL_STATES:
            if a not in self.states:
                continue
            for b in ALL_STATES:
                if b not in self.states or (a, b) not in self.legal:
                    continue
                if (b, a) in self.legal:
                    if _CANONICAL_INDEX[a] < _CANONICAL_INDEX[b]:
                        lines.append(f'  "{a.name}" -> "{b.name}" [dir=both];')
                else:
                    lines.append(f'  "{a.name}" -> "{b.name}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def default_schema(options: SchemaOptions | None = None) -> ModelSchema:
    """Build the 18-state schema with the default topology (see module doc).

    Flags in ``options`` prune within-phase edges or restrict static density
    moves to adjacent bands; they cannot re-enable assembly re-entry, open
    edges out of terminal, or add self-transitions.
    """
    opts = options or SchemaOptions()
    pairs: set[tuple[StateId, StateId]] = set()

    non_assembly = MODE_STATES + STRUCTURE_STATES + DISPERSAL_STATES
    for a in ASSEMBLY_STATES:
        for t in non_assembly:
            pairs.add((a, t))

    if opts.mode_internal:
        pairs.update(permutations(MODE_STATES, 2))
    if opts.structure_internal:
        for x, y in permutations(STRUCTURE_STATES, 2):
            if opts.adjacent_static_only and _skips_static_band(x, y):
                continue
            pairs.add((x, y))
    if opts.dispersal_internal:
        pairs.update(permutations(DISPERSAL_STATES, 2))

    for m in MODE_STATES:
        for s in STRUCTURE_STATES:
            pairs.add((m, s))
            pairs.add((s, m))
    for x in MODE_STATES + STRUCTURE_STATES:
        for d in DISPERSAL_STATES:
            pairs.add((x, d))
            pairs.add((d, x))

    for d in DISPERSAL_STATES:
        pairs.add((d, TERMINAL))

    return ModelSchema(states=frozenset(ALL_STATES), legal=frozenset(pairs), options=opts)


_STATIC_BAND = {STATIC_SPARSE: 0, STATIC_SOLID: 1, STATIC_CRUSH: 2}


def _skips_static_band(x: StateId, y: StateId) -> bool:
    if x in _STATIC_BAND and y in _STATIC_BAND:
        return abs(_STATIC_BAND[x] - _STATIC_BAND[y]) > 1
    return False
