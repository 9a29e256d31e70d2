"""Pydantic request/response models for the HTTP service.

State names on the wire always use the canonical lowercase dotted form;
selectors use the same strings as the trace DSL (an id, ``*`` or
``others``).
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field

from ..engine import DispatchReport, EventRecord, HistoryEntry, ThreadView, World


class SchemaOptionsIn(BaseModel):
    mode_internal: bool = True
    structure_internal: bool = True
    dispersal_internal: bool = True
    adjacent_static_only: bool = False


class StateInfo(BaseModel):
    name: str
    phase: str


class TransitionsOut(BaseModel):
    state: str
    targets: list[str]


class WorldCreate(BaseModel):
    options: SchemaOptionsIn = Field(default_factory=SchemaOptionsIn)


class WorldCreated(BaseModel):
    world_id: str


class HistoryEntryOut(BaseModel):
    index: int
    kind: str
    state: str
    timestamp: Optional[str] = None
    note: Optional[str] = None
    cause: Optional[dict[str, Any]] = None

    @classmethod
    def from_entry(cls, entry: HistoryEntry) -> "HistoryEntryOut":
        cause: dict[str, Any] | None
        if entry.cause is None:
            cause = None
        elif isinstance(entry.cause, str):
            cause = {"event": entry.cause}
        elif isinstance(entry.cause, int):
            cause = {"parent": entry.cause}
        else:
            thread, entered = entry.cause
            cause = {"thread": thread, "state": entered.name}
        return cls(
            index=entry.index,
            kind=entry.kind.value,
            state=entry.state.name,
            timestamp=entry.timestamp,
            note=entry.note,
            cause=cause,
        )


class ThreadOut(BaseModel):
    id: int
    current: str
    alive: bool
    parent: Optional[int] = None
    tags: dict[str, Optional[str]]
    history: list[HistoryEntryOut]

    @classmethod
    def from_view(cls, view: ThreadView) -> "ThreadOut":
        return cls(
            id=view.id,
            current=view.current.name,
            alive=view.alive,
            parent=view.parent,
            tags=view.tags.as_dict(),
            history=[HistoryEntryOut.from_entry(e) for e in view.history],
        )


class EventLogEntry(BaseModel):
    name: str
    timestamp: Optional[str] = None

    @classmethod
    def from_record(cls, record: EventRecord) -> "EventLogEntry":
        return cls(name=record.name, timestamp=record.timestamp)


class WorldOut(BaseModel):
    world_id: str
    threads: list[ThreadOut]
    events: list[EventLogEntry]
    event_rules: int
    reaction_rules: int

    @classmethod
    def from_world(cls, world_id: str, world: World) -> "WorldOut":
        return cls(
            world_id=world_id,
            threads=[ThreadOut.from_view(t.snapshot()) for t in world.threads.values()],
            events=[EventLogEntry.from_record(r) for r in world.event_log],
            event_rules=len(world.rules.event_rules),
            reaction_rules=len(world.rules.reaction_rules),
        )


class SpawnIn(BaseModel):
    assembly_state: str
    timestamp: Optional[str] = None
    note: Optional[str] = None


class TransitionIn(BaseModel):
    to: str
    timestamp: Optional[str] = None
    note: Optional[str] = None


class ForkIn(BaseModel):
    assembly_state: str = "assembly.spontaneous"
    initial: Optional[str] = None
    timestamp: Optional[str] = None
    note: Optional[str] = None


class DispatchOut(BaseModel):
    event: Optional[str] = None
    forced: list[dict[str, Any]]
    skipped: list[dict[str, Any]]
    truncated: bool

    @classmethod
    def from_report(cls, report: DispatchReport) -> "DispatchOut":
        data = report.as_dict()
        return cls(**data)


class TransitionOut(BaseModel):
    thread: ThreadOut
    reactions: DispatchOut


class EventRuleIn(BaseModel):
    event: str
    selector: str = "*"
    target: str


class ReactionRuleIn(BaseModel):
    watched_state: str
    watched_selector: str = "*"
    affected_selector: str = "*"
    target: str


class RuleCreated(BaseModel):
    index: int


class EventIn(BaseModel):
    name: str
    timestamp: Optional[str] = None


class TraceIn(BaseModel):
    text: str


class ValidateOut(BaseModel):
    ok: bool
    report: Optional[dict[str, Any]] = None
    error: Optional[dict[str, Any]] = None


class WorldFromTraceOut(BaseModel):
    world_id: str
    report: dict[str, Any]


class SimulateIn(BaseModel):
    seed: int = Field(ge=0, lt=2**64)
    steps: int = Field(ge=1)
    start: str = "assembly.planned"
    weights_text: Optional[str] = None


class SimulateOut(BaseModel):
    states: list[str]
    terminated: bool
    trace: str


class SampleIn(BaseModel):
    timestamp: str
    density: float = Field(ge=0)
    speed: float = Field(ge=0)
    order: float = Field(ge=0, le=1)


class ClassifierConfigIn(BaseModel):
    sparse_max: float = 2.0
    solid_max: float = 4.0
    hysteresis: float = 0.2
    static_speed_max: float = 0.2
    chaotic_max: float = 0.4
    regular_max: float = 0.7


class ClassifyIn(BaseModel):
    samples: list[SampleIn]
    config: Optional[ClassifierConfigIn] = None


class ClassifiedTransition(BaseModel):
    timestamp: str
    state: str


class ClassifyOut(BaseModel):
    transitions: list[ClassifiedTransition]
