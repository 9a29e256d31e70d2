"""Declarative trigger rules: named external events and cross-thread reactions.

An EventRule forces selected threads into a target state when a named
event is dispatched (e.g. a police intervention). A ReactionRule couples
threads together: whenever a watched state is entered, other threads are
forced to move. Rules are world-scoped, immutable once registered, and
fire in registration order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidRuleError
from .schema import StateId


class SelectorKind(str, Enum):
    SPECIFIC = "specific"
    ALL = "all"
    OTHERS = "others"


@dataclass(frozen=True)
class ThreadSelector:
    """Picks threads at fire time: one id, every thread, or every thread
    other than the one whose entry triggered the rule.

    A specific id that does not exist (or is terminal) at fire time is
    silently skipped. ``others`` with no triggering thread bound, as in an
    event dispatch, excludes nothing.
    """

    kind: SelectorKind
    thread: int | None = None

    @classmethod
    def specific(cls, thread_id: int) -> "ThreadSelector":
        if thread_id < 1:
            raise InvalidRuleError(f"thread ids are positive integers, got {thread_id}")
        return cls(SelectorKind.SPECIFIC, thread_id)

    @classmethod
    def all_threads(cls) -> "ThreadSelector":
        return cls(SelectorKind.ALL)

    @classmethod
    def others(cls) -> "ThreadSelector":
        return cls(SelectorKind.OTHERS)

    @classmethod
    def parse(cls, text: str) -> "ThreadSelector":
        """Parse the wire form used by the trace DSL and the service:
        a positive integer, ``*`` or ``others``."""
        if text == "*":
            return cls.all_threads()
        if text == "others":
            return cls.others()
        if text.isdigit() and int(text) >= 1:
            return cls.specific(int(text))
        raise InvalidRuleError(f"malformed selector: {text!r} (expected id, '*' or 'others')")

    def matches_entering(self, thread_id: int) -> bool:
        """Whether an entering thread satisfies this selector when it is
        used as a watch condition."""
        if self.kind is SelectorKind.SPECIFIC:
            return thread_id == self.thread
        return self.kind is SelectorKind.ALL

    def __str__(self) -> str:
        if self.kind is SelectorKind.SPECIFIC:
            return str(self.thread)
        return "*" if self.kind is SelectorKind.ALL else "others"


ALL_THREADS = ThreadSelector.all_threads()


@dataclass(frozen=True)
class EventRule:
    """On dispatch of ``event_name``, force selected threads into ``target``."""

    event_name: str
    selector: ThreadSelector
    target: StateId


@dataclass(frozen=True)
class ReactionRule:
    """On any thread (matching ``watched_selector``) entering
    ``watched_state``, force threads picked by ``affected_selector`` into
    ``target``."""

    watched_state: StateId
    affected_selector: ThreadSelector
    target: StateId
    watched_selector: ThreadSelector = ALL_THREADS


def selectors_can_overlap(watched: ThreadSelector, affected: ThreadSelector) -> bool:
    """Whether the entering thread could itself be selected as affected.

    ``others`` never includes the entering thread; two different specific
    ids cannot coincide.
    """
    if affected.kind is SelectorKind.OTHERS:
        return False
    if watched.kind is SelectorKind.SPECIFIC and affected.kind is SelectorKind.SPECIFIC:
        return watched.thread == affected.thread
    return True


@dataclass
class RuleSet:
    """Ordered rule registry plus the cascade depth limit."""

    event_rules: list[EventRule] = field(default_factory=list)
    reaction_rules: list[ReactionRule] = field(default_factory=list)
    max_cascade_depth: int = 16
