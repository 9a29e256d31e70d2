"""Worlds of crowd threads: spawning, transitions, forking and rule firing.

A World owns an ordered collection of threads, each recording one crowd or
sub-crowd as an append-only history of state entries with per-phase tags
(the last state entered in each phase). Mutating operations are methods on
World and must be serialized by the caller; snapshots returned by
``inspect`` are immutable and freely shareable.

Forced transitions (event rules, reaction rules) go through the same
legality checks as manual ones; a thread that cannot legally move is
skipped, never an error. Chained reactions are bounded by the rule set's
cascade depth limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import (
    CascadeDepthError,
    IllegalTransitionError,
    InvalidRuleError,
    InvalidStateError,
    NotAssemblyStateError,
    TerminalThreadError,
    UnknownThreadError,
)
from .rules import EventRule, ReactionRule, RuleSet, SelectorKind, ThreadSelector, selectors_can_overlap
from .schema import ModelSchema, Phase, StateId, SPONTANEOUS, TERMINAL


class HistoryKind(str, Enum):
    ASSEMBLED = "assembled"
    TRANSITIONED = "transitioned"
    FORKED_FROM = "forked_from"
    FORCED_BY_EVENT = "forced_by_event"
    FORCED_BY_REACTION = "forced_by_reaction"
    TERMINATED = "terminated"


# What provoked an entry: an event name, a parent thread id for forks, or
# the (thread, state) pair whose entry fired a reaction rule.
Cause = str | int | tuple[int, StateId] | None


@dataclass(frozen=True)
class HistoryEntry:
    index: int
    kind: HistoryKind
    state: StateId
    timestamp: str | None = None
    note: str | None = None
    cause: str | int | tuple[int, StateId] | None = None


@dataclass
class TagSet:
    """Per-phase memory of the last state entered in that phase.

    A forked child starts from a copy of its parent's tags, so a tag may be
    present for a phase the child itself has never entered.
    """

    assembly: StateId | None = None
    mode: StateId | None = None
    structure: StateId | None = None
    dispersal: StateId | None = None

    _FIELDS = {
        Phase.ASSEMBLY: "assembly",
        Phase.MODE: "mode",
        Phase.STRUCTURE: "structure",
        Phase.DISPERSAL: "dispersal",
    }

    def record(self, state: StateId) -> None:
        name = self._FIELDS.get(state.phase)
        if name is not None:
            setattr(self, name, state)

    def get(self, phase: Phase) -> StateId | None:
        name = self._FIELDS.get(phase)
        return getattr(self, name) if name else None

    def copy(self) -> "TagSet":
        return replace(self)

    def as_dict(self) -> dict[str, str | None]:
        return {
            name: (tag.name if tag else None)
            for name, tag in (
                ("assembly", self.assembly),
                ("mode", self.mode),
                ("structure", self.structure),
                ("dispersal", self.dispersal),
            )
        }


@dataclass(frozen=True)
class ThreadView:
    """Immutable snapshot of one thread, detached from the world."""

    id: int
    current: StateId
    tags: TagSet
    alive: bool
    parent: int | None
    history: tuple[HistoryEntry, ...]


@dataclass
class CrowdThread:
    id: int
    current: StateId
    tags: TagSet
    parent: int | None
    history: list[HistoryEntry]
    alive: bool = True

    def snapshot(self) -> ThreadView:
        return ThreadView(
            id=self.id,
            current=self.current,
            tags=self.tags.copy(),
            alive=self.alive,
            parent=self.parent,
            history=tuple(self.history),
        )


@dataclass(frozen=True)
class EventRecord:
    name: str
    timestamp: str | None = None


@dataclass
class ForcedTransition:
    """One forced state entry, as reported by a dispatch."""

    thread: int
    to: StateId
    kind: HistoryKind
    cause: str | tuple[int, StateId]
    depth: int

    def as_dict(self) -> dict:
        if self.kind is HistoryKind.FORCED_BY_EVENT:
            cause = {"event": self.cause}
        else:
            watcher, entered = self.cause
            cause = {"thread": watcher, "state": entered.name}
        return {
            "thread": self.thread,
            "to": self.to.name,
            "kind": self.kind.value,
            "cause": cause,
            "depth": self.depth,
        }


@dataclass
class SkippedApplication:
    thread: int
    target: StateId
    reason: str

    def as_dict(self) -> dict:
        return {"thread": self.thread, "target": self.target.name, "reason": self.reason}


@dataclass
class DispatchReport:
    """Outcome of an event dispatch or reaction evaluation: what was forced,
    what was skipped, and whether the cascade hit the depth limit."""

    event: str | None = None
    forced: list[ForcedTransition] = field(default_factory=list)
    skipped: list[SkippedApplication] = field(default_factory=list)
    truncated: bool = False

    def as_dict(self) -> dict:
        return {
            "event": self.event,
            "forced": [f.as_dict() for f in self.forced],
            "skipped": [s.as_dict() for s in self.skipped],
            "truncated": self.truncated,
        }


class World:
    """A session: one schema, many threads, a rule registry, an event log.

    Thread ids are positive integers assigned in creation order and never
    reused. Two worlds never share state.
    """

    def __init__(self, schema: ModelSchema):
        self.schema = schema
        self.threads: dict[int, CrowdThread] = {}
        self.rules = RuleSet()
        self.event_log: list[EventRecord] = []
        self._next_id = 1

    # -- thread lifecycle ---------------------------------------------------

    def spawn_thread(
        self,
        assembly_state: StateId,
        timestamp: str | None = None,
        note: str | None = None,
    ) -> int:
        """Create a thread in one of the three assembly states; returns its id."""
        self.schema._require(assembly_state)
        if assembly_state.phase is not Phase.ASSEMBLY:
            raise NotAssemblyStateError(assembly_state)
        thread = self._new_thread(assembly_state, parent=None)
        self._enter(thread, assembly_state, HistoryKind.ASSEMBLED, timestamp, note, None)
        return thread.id

    def apply_transition(
        self,
        thread_id: int,
        to: StateId,
        timestamp: str | None = None,
        note: str | None = None,
        report: DispatchReport | None = None,
    ) -> ThreadView:
        """Move a live thread to a legal target state.

        Entering terminal records a ``terminated`` entry and freezes the
        thread. Reaction rules watching the entered state fire before the
        call returns; pass ``report`` to collect what they did. A cascade
        that exceeds the depth limit raises CascadeDepthError with the
        transitions applied so far left in place.
        """
        thread = self._get(thread_id)
        if not thread.alive:
            raise TerminalThreadError(thread_id)
        if not self.schema.is_legal_transition(thread.current, to):
            raise IllegalTransitionError(thread.current, to)
        kind = HistoryKind.TERMINATED if to == TERMINAL else HistoryKind.TRANSITIONED
        self._enter(thread, to, kind, timestamp, note, None)
        self.evaluate_reactions(to, thread_id, depth=0, report=report, timestamp=timestamp)
        return thread.snapshot()

    def fork_thread(
        self,
        parent_id: int,
        assembly_state: StateId = SPONTANEOUS,
        initial: StateId | None = None,
        timestamp: str | None = None,
        note: str | None = None,
    ) -> int:
        """Branch a live parent into a child sub-crowd.

        The child copies the parent's tags, then records its own assembly
        state. Its current state is ``initial`` when given (any non-assembly,
        non-terminal state), otherwise the parent's current state; a parent
        still in assembly leaves the child at its own assembly state. Fork
        entries do not fire reaction rules.
        """
        parent = self._get(parent_id)
        if not parent.alive:
            raise TerminalThreadError(parent_id)
        self.schema._require(assembly_state)
        if assembly_state.phase is not Phase.ASSEMBLY:
            raise NotAssemblyStateError(assembly_state)
        if initial is not None:
            self.schema._require(initial)
            if initial.phase in (Phase.ASSEMBLY, Phase.TERMINAL):
                raise InvalidStateError(
                    f"fork initial state must be outside assembly and terminal, got {initial}"
                )

        child = self._new_thread(assembly_state, parent=parent_id)
        child.tags = parent.tags.copy()
        self._enter(child, assembly_state, HistoryKind.FORKED_FROM, timestamp, note, parent_id)

        if initial is not None:
            effective = initial
        elif parent.current.phase is Phase.ASSEMBLY:
            effective = assembly_state
        else:
            effective = parent.current
        if effective != assembly_state:
            self._enter(child, effective, HistoryKind.TRANSITIONED, timestamp, None, None)
        return child.id

    def inspect(self, thread_id: int) -> ThreadView:
        """Read-only snapshot of a thread; never mutates."""
        return self._get(thread_id).snapshot()

    def thread_trace(self, thread_id: int) -> tuple[HistoryEntry, ...]:
        """Full ordered history of a thread."""
        return tuple(self._get(thread_id).history)

    # -- rules --------------------------------------------------------------

    def register_event_rule(self, rule: EventRule) -> int:
        """Append an event rule; returns its index. Targets may be any
        non-assembly state (terminal included; it only applies to threads
        that are in dispersal when the rule fires)."""
        self._check_rule_target(rule.target)
        self.rules.event_rules.append(rule)
        return len(self.rules.event_rules) - 1

    def register_reaction_rule(self, rule: ReactionRule) -> int:
        """Append a reaction rule; returns its index."""
        self._check_rule_target(rule.target)
        self.schema._require(rule.watched_state)
        if rule.watched_selector.kind is SelectorKind.OTHERS:
            raise InvalidRuleError("watched selector cannot be 'others'")
        if rule.watched_state == rule.target and selectors_can_overlap(
            rule.watched_selector, rule.affected_selector
        ):
            raise InvalidRuleError(
                f"reaction on {rule.watched_state} may force the entering thread "
                "into the state it just entered"
            )
        self.rules.reaction_rules.append(rule)
        return len(self.rules.reaction_rules) - 1

    def dispatch_event(self, name: str, timestamp: str | None = None) -> DispatchReport:
        """Fire every event rule matching ``name`` in registration order.

        Each selected live thread is forced if the move is legal from its
        current state, otherwise recorded as skipped. Entries made here
        trigger reaction evaluation. The event is logged whether or not any
        rule matches.
        """
        self.event_log.append(EventRecord(name, timestamp))
        report = DispatchReport(event=name)
        for rule in self.rules.event_rules:
            if rule.event_name != name:
                continue
            for thread in self._select(rule.selector, exclude=None):
                self._force(thread, rule.target, HistoryKind.FORCED_BY_EVENT, name,
                            depth=0, report=report, timestamp=timestamp)
        return report

    def evaluate_reactions(
        self,
        entered: StateId,
        entering_thread: int,
        depth: int = 0,
        report: DispatchReport | None = None,
        timestamp: str | None = None,
    ) -> DispatchReport:
        """Fire reaction rules watching ``entered``; recurse on each forced
        entry with depth + 1. ``depth`` is the nesting level of the entry
        that just happened (0 for a manual or event-forced one)."""
        if report is None:
            report = DispatchReport()
        limit = self.rules.max_cascade_depth
        if depth > limit:
            report.truncated = True
            raise CascadeDepthError(limit, report)
        for rule in self.rules.reaction_rules:
            if rule.watched_state != entered:
                continue
            if not rule.watched_selector.matches_entering(entering_thread):
                continue
            cause = (entering_thread, entered)
            for thread in self._select(rule.affected_selector, exclude=entering_thread):
                self._force(thread, rule.target, HistoryKind.FORCED_BY_REACTION, cause,
                            depth=depth, report=report, timestamp=timestamp)
        return report

    # -- internals ----------------------------------------------------------

    def _check_rule_target(self, target: StateId) -> None:
        self.schema._require(target)
        if target.phase is Phase.ASSEMBLY:
            raise InvalidRuleError(f"rule target cannot be an assembly state: {target}")

    def _new_thread(self, current: StateId, parent: int | None) -> CrowdThread:
        thread = CrowdThread(
            id=self._next_id, current=current, tags=TagSet(), parent=parent, history=[]
        )
        self._next_id += 1
        self.threads[thread.id] = thread
        return thread

    def _get(self, thread_id: int) -> CrowdThread:
        try:
            return self.threads[thread_id]
        except KeyError:
            raise UnknownThreadError(thread_id) from None

    def _enter(
        self,
        thread: CrowdThread,
        to: StateId,
        kind: HistoryKind,
        timestamp: str | None,
        note: str | None,
        cause,
    ) -> None:
        # Raw state entry: history, current, tag, liveness. No legality check
        # here; every caller has already established it.
        thread.history.append(
            HistoryEntry(len(thread.history), kind, to, timestamp, note, cause)
        )
        thread.current = to
        thread.tags.record(to)
        if to == TERMINAL:
            thread.alive = False

    def _force(
        self,
        thread: CrowdThread,
        target: StateId,
        kind: HistoryKind,
        cause,
        depth: int,
        report: DispatchReport,
        timestamp: str | None,
    ) -> None:
        # One forced application: skip-not-fail on anything but cascade depth.
        if thread.current == target:
            report.skipped.append(
                SkippedApplication(thread.id, target, "already in target state")
            )
            return
        if not self.schema.is_legal_transition(thread.current, target):
            report.skipped.append(
                SkippedApplication(
                    thread.id, target, f"illegal from {thread.current}"
                )
            )
            return
        if kind is HistoryKind.FORCED_BY_REACTION:
            if depth + 1 > self.rules.max_cascade_depth:
                report.truncated = True
                raise CascadeDepthError(self.rules.max_cascade_depth, report)
            entry_depth = depth + 1
        else:
            entry_depth = depth
        self._enter(thread, target, kind, timestamp, None, cause)
        report.forced.append(ForcedTransition(thread.id, target, kind, cause, entry_depth))
        self.evaluate_reactions(target, thread.id, entry_depth, report, timestamp)

    def _select(self, selector: ThreadSelector, exclude: int | None) -> list[CrowdThread]:
        # Live threads in creation order; a missing or dead specific id
        # silently selects nothing.
        if selector.kind is SelectorKind.SPECIFIC:
            thread = self.threads.get(selector.thread)
            return [thread] if thread is not None and thread.alive else []
        picked = [t for t in self.threads.values() if t.alive]
        if selector.kind is SelectorKind.OTHERS and exclude is not None:
            picked = [t for t in picked if t.id != exclude]
        return picked


def new_world(schema: ModelSchema) -> World:
    """Fresh empty World bound to ``schema``."""
    return World(schema)
