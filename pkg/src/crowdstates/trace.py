"""Line-based DSL for recording and replaying crowd-event narratives.

One statement per line; blank lines and ``#`` comments are ignored.
The grammar:

    thread <n> assemble <physical|spontaneous|planned> [@<label>] ["note"]
    thread <n> goto <state> [@<label>] ["note"]
    fork <child> from <parent> [assembly <assembly-state>] [initial <state>] [@<label>] ["note"]
    event <name> [@<label>]
    rule on event <name> thread <n|*|others> goto <state>
    rule on enter <state> [by <n|*>] thread <n|*|others> goto <state>
    thread <n> end [@<label>]

States are written in canonical dotted form (``structure.mobile.laminar``);
assembly states may use their bare names where the grammar shows them.
``@label`` attaches an opaque ordered timestamp, a trailing double-quoted
string a note (backslash escapes for ``"`` and ``\\``). ``end`` is sugar
for ``goto terminal`` and therefore requires the thread to be dispersing.

Thread numbers in a trace must match the ids the engine hands out: the
n-th created thread is thread n, whether assembled or forked.

Parsing and serialization are pure; ``replay`` runs a trace against a
fresh world and reports every forced transition and skipped rule
application, stopping at the first hard error with its line number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .engine import DispatchReport, ForcedTransition, SkippedApplication, World
from .errors import (
    CrowdModelError,
    IllegalTransitionError,
    InvalidRuleError,
    TraceReplayError,
    TraceSyntaxError,
    UnknownStateError,
)
from .rules import EventRule, ReactionRule, SelectorKind, ThreadSelector
from .schema import (
    ModelSchema,
    Phase,
    SPONTANEOUS,
    StateId,
    TERMINAL,
    default_schema,
    state,
)

# -- statement types -----------------------------------------------------------


@dataclass(frozen=True)
class _Stmt:
    timestamp: str | None = field(default=None, kw_only=True)
    note: str | None = field(default=None, kw_only=True)
    line: int = field(default=0, compare=False, kw_only=True)


@dataclass(frozen=True)
class Assemble(_Stmt):
    thread: int
    state: StateId


@dataclass(frozen=True)
class Goto(_Stmt):
    thread: int
    state: StateId


@dataclass(frozen=True)
class Fork(_Stmt):
    child: int
    parent: int
    assembly_state: StateId = SPONTANEOUS
    initial: StateId | None = None


@dataclass(frozen=True)
class Event(_Stmt):
    name: str


@dataclass(frozen=True)
class EventRuleDecl(_Stmt):
    event: str
    selector: ThreadSelector
    target: StateId


@dataclass(frozen=True)
class ReactionRuleDecl(_Stmt):
    watched_state: StateId
    watched_selector: ThreadSelector
    affected_selector: ThreadSelector
    target: StateId


@dataclass(frozen=True)
class End(_Stmt):
    thread: int


Statement = Assemble | Goto | Fork | Event | EventRuleDecl | ReactionRuleDecl | End


@dataclass(frozen=True)
class Trace:
    statements: tuple[Statement, ...]
    source: str = field(default="<string>", compare=False)


# -- tokenizer ------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    text: str
    col: int
    quoted: bool = False


def _tokenize(line: str, lineno: int) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(line)
    while i < n:
        c = line[i]
        if c in " \t":
            i += 1
            continue
        if c == "#":
            break
        col = i + 1
        if c == '"':
            i += 1
            buf: list[str] = []
            closed = False
            while i < n:
                ch = line[i]
                if ch == "\\":
                    if i + 1 >= n or line[i + 1] not in '"\\':
                        raise TraceSyntaxError(lineno, i + 1, "bad escape in string")
                    buf.append(line[i + 1])
                    i += 2
                elif ch == '"':
                    i += 1
                    closed = True
                    break
                else:
                    buf.append(ch)
                    i += 1
            if not closed:
                raise TraceSyntaxError(lineno, col, "unterminated string")
            tokens.append(_Token("".join(buf), col, quoted=True))
        else:
            j = i
            while j < n and line[j] not in ' \t"#':
                j += 1
            tokens.append(_Token(line[i:j], col))
            i = j
    return tokens


# -- parser ---------------------------------------------------------------------

_EVENT_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
_ASSEMBLY_SHORTHAND = {"physical", "spontaneous", "planned"}


class _Cursor:
    def __init__(self, tokens: list[_Token], lineno: int):
        self.tokens = tokens
        self.lineno = lineno
        self.pos = 0

    def _end_col(self) -> int:
        last = self.tokens[-1]
        return last.col + len(last.text) + (2 if last.quoted else 0)

    def fail(self, reason: str, col: int | None = None):
        if col is None:
            col = self.tokens[self.pos].col if self.pos < len(self.tokens) else self._end_col()
        raise TraceSyntaxError(self.lineno, col, reason)

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, expectation: str) -> _Token:
        tok = self.peek()
        if tok is None:
            self.fail(f"expected {expectation}")
        self.pos += 1
        return tok

    def word(self, expectation: str) -> _Token:
        tok = self.take(expectation)
        if tok.quoted:
            self.fail(f"expected {expectation}, found a quoted string", tok.col)
        return tok

    def keyword(self, text: str) -> None:
        tok = self.word(f"'{text}'")
        if tok.text != text:
            self.fail(f"expected '{text}', found {tok.text!r}", tok.col)

    def thread_id(self, expectation: str = "thread id") -> int:
        tok = self.word(expectation)
        if not tok.text.isdigit() or int(tok.text) < 1:
            self.fail(f"expected {expectation} (positive integer), found {tok.text!r}", tok.col)
        return int(tok.text)

    def state_name(self) -> StateId:
        tok = self.word("state name")
        try:
            return state(tok.text)
        except UnknownStateError:
            self.fail(f"unknown state name {tok.text!r}", tok.col)

    def assembly_state(self) -> StateId:
        tok = self.word("assembly state")
        name = tok.text if "." in tok.text else f"assembly.{tok.text}"
        try:
            result = state(name)
        except UnknownStateError:
            result = None
        if result is None or result.phase is not Phase.ASSEMBLY:
            self.fail(
                f"expected one of physical, spontaneous, planned; found {tok.text!r}", tok.col
            )
        return result

    def selector(self, allow_others: bool = True) -> ThreadSelector:
        tok = self.word("thread selector")
        try:
            sel = ThreadSelector.parse(tok.text)
        except InvalidRuleError:
            self.fail(f"malformed selector {tok.text!r}", tok.col)
        if not allow_others and sel.kind is SelectorKind.OTHERS:
            self.fail("selector 'others' is not allowed here", tok.col)
        return sel

    def suffix(self, allow_note: bool) -> tuple[str | None, str | None]:
        """Optional ``@label`` then optional quoted note, then end of line."""
        timestamp = None
        note = None
        tok = self.peek()
        if tok is not None and not tok.quoted and tok.text.startswith("@"):
            if len(tok.text) == 1:
                self.fail("empty timestamp label", tok.col)
            timestamp = tok.text[1:]
            self.pos += 1
            tok = self.peek()
        if allow_note and tok is not None and tok.quoted:
            note = tok.text
            self.pos += 1
            tok = self.peek()
        if tok is not None:
            self.fail(f"unexpected trailing {'string' if tok.quoted else repr(tok.text)}", tok.col)
        return timestamp, note


def parse(text: str, source: str = "<string>") -> Trace:
    """Parse trace text; raises TraceSyntaxError with line and column on the
    first problem. No partial traces are returned."""
    statements: list[Statement] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(raw, lineno)
        if not tokens:
            continue
        statements.append(_parse_statement(_Cursor(tokens, lineno), lineno))
    return Trace(tuple(statements), source)


def _parse_statement(cur: _Cursor, lineno: int) -> Statement:
    head = cur.word("statement keyword")
    if head.text == "thread":
        return _parse_thread_stmt(cur, lineno)
    if head.text == "fork":
        return _parse_fork(cur, lineno)
    if head.text == "event":
        tok = cur.word("event name")
        if not _EVENT_NAME.match(tok.text):
            cur.fail(f"bad event name {tok.text!r}", tok.col)
        timestamp, _ = cur.suffix(allow_note=False)
        return Event(tok.text, timestamp=timestamp, line=lineno)
    if head.text == "rule":
        return _parse_rule(cur, lineno)
    cur.fail(f"unknown statement keyword {head.text!r}", head.col)


def _parse_thread_stmt(cur: _Cursor, lineno: int) -> Statement:
    tid = cur.thread_id()
    verb = cur.word("'assemble', 'goto' or 'end'")
    if verb.text == "assemble":
        assembled = cur.assembly_state()
        timestamp, note = cur.suffix(allow_note=True)
        return Assemble(tid, assembled, timestamp=timestamp, note=note, line=lineno)
    if verb.text == "goto":
        target = cur.state_name()
        timestamp, note = cur.suffix(allow_note=True)
        return Goto(tid, target, timestamp=timestamp, note=note, line=lineno)
    if verb.text == "end":
        timestamp, _ = cur.suffix(allow_note=False)
        return End(tid, timestamp=timestamp, line=lineno)
    cur.fail(f"expected 'assemble', 'goto' or 'end', found {verb.text!r}", verb.col)


def _parse_fork(cur: _Cursor, lineno: int) -> Fork:
    child = cur.thread_id("child thread id")
    cur.keyword("from")
    parent = cur.thread_id("parent thread id")
    assembly_state: StateId | None = None
    initial: StateId | None = None
    while True:
        tok = cur.peek()
        if tok is None or tok.quoted or tok.text not in ("assembly", "initial"):
            break
        cur.pos += 1
        if tok.text == "assembly":
            if assembly_state is not None:
                cur.fail("duplicate 'assembly' clause", tok.col)
            assembly_state = cur.assembly_state()
        else:
            if initial is not None:
                cur.fail("duplicate 'initial' clause", tok.col)
            initial = cur.state_name()
    timestamp, note = cur.suffix(allow_note=True)
    return Fork(
        child,
        parent,
        assembly_state if assembly_state is not None else SPONTANEOUS,
        initial,
        timestamp=timestamp,
        note=note,
        line=lineno,
    )


def _parse_rule(cur: _Cursor, lineno: int) -> Statement:
    cur.keyword("on")
    kind = cur.word("'event' or 'enter'")
    if kind.text == "event":
        name_tok = cur.word("event name")
        if not _EVENT_NAME.match(name_tok.text):
            cur.fail(f"bad event name {name_tok.text!r}", name_tok.col)
        cur.keyword("thread")
        selector = cur.selector()
        cur.keyword("goto")
        target = cur.state_name()
        cur.suffix(allow_note=False)
        return EventRuleDecl(name_tok.text, selector, target, line=lineno)
    if kind.text == "enter":
        watched = cur.state_name()
        watched_selector = ThreadSelector.all_threads()
        nxt = cur.peek()
        if nxt is not None and not nxt.quoted and nxt.text == "by":
            cur.pos += 1
            watched_selector = cur.selector(allow_others=False)
        cur.keyword("thread")
        affected = cur.selector()
        cur.keyword("goto")
        target = cur.state_name()
        cur.suffix(allow_note=False)
        return ReactionRuleDecl(watched, watched_selector, affected, target, line=lineno)
    cur.fail(f"expected 'event' or 'enter', found {kind.text!r}", kind.col)


# -- serializer -----------------------------------------------------------------


def _escape(note: str) -> str:
    return note.replace("\\", "\\\\").replace('"', '\\"')


def _suffix_text(stmt: _Stmt) -> str:
    parts = []
    if stmt.timestamp is not None:
        parts.append(f"@{stmt.timestamp}")
    if stmt.note is not None:
        parts.append(f'"{_escape(stmt.note)}"')
    return (" " + " ".join(parts)) if parts else ""


def serialize(trace: Trace) -> str:
    """Canonical text: one statement per line, single spaces, bare assembly
    names, defaulted clauses materialized for forks and omitted for ``by *``.
    ``parse(serialize(t))`` is structurally equal to ``t``."""
    lines = []
    for stmt in trace.statements:
        if isinstance(stmt, Assemble):
            body = f"thread {stmt.thread} assemble {stmt.state.local}"
        elif isinstance(stmt, Goto):
            body = f"thread {stmt.thread} goto {stmt.state.name}"
        elif isinstance(stmt, Fork):
            body = f"fork {stmt.child} from {stmt.parent} assembly {stmt.assembly_state.local}"
            if stmt.initial is not None:
                body += f" initial {stmt.initial.name}"
        elif isinstance(stmt, Event):
            body = f"event {stmt.name}"
        elif isinstance(stmt, EventRuleDecl):
            body = f"rule on event {stmt.event} thread {stmt.selector} goto {stmt.target.name}"
        elif isinstance(stmt, ReactionRuleDecl):
            body = f"rule on enter {stmt.watched_state.name}"
            if stmt.watched_selector.kind is not SelectorKind.ALL:
                body += f" by {stmt.watched_selector}"
            body += f" thread {stmt.affected_selector} goto {stmt.target.name}"
        elif isinstance(stmt, End):
            body = f"thread {stmt.thread} end"
        else:  # pragma: no cover - closed statement union
            raise TypeError(f"unknown statement type: {stmt!r}")
        lines.append(body + _suffix_text(stmt))
    return "\n".join(lines) + "\n" if lines else ""


# -- replay ---------------------------------------------------------------------


@dataclass
class ReplayReport:
    """What a replay did: creations, transitions, rule activity, outcomes."""

    source: str = "<string>"
    threads_created: int = 0
    transitions: int = 0
    forced: list[ForcedTransition] = field(default_factory=list)
    skipped: list[SkippedApplication] = field(default_factory=list)
    events: list[str] = field(default_factory=list)
    final_states: dict[int, StateId] = field(default_factory=dict)
    final_alive: dict[int, bool] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "source": self.source,
            "threads": self.threads_created,
            "transitions": self.transitions,
            "events": list(self.events),
            "forced": [f.as_dict() for f in self.forced],
            "skipped": [s.as_dict() for s in self.skipped],
            "final_states": {str(t): s.name for t, s in self.final_states.items()},
            "final_alive": {str(t): alive for t, alive in self.final_alive.items()},
        }


def replay(trace: Trace, schema: ModelSchema | None = None) -> tuple[World, ReplayReport]:
    """Execute a trace against a fresh world.

    Rule declarations register rules, ``event`` dispatches, ``end`` moves a
    thread to terminal. Stops at the first hard error (unknown thread,
    illegal transition, id mismatch, cascade overflow) with a
    TraceReplayError naming the line.
    """
    world = World(schema if schema is not None else default_schema())
    report = ReplayReport(source=trace.source)
    for stmt in trace.statements:
        try:
            _execute(world, stmt, report)
        except TraceReplayError:
            raise
        except CrowdModelError as exc:
            raise TraceReplayError(stmt.line, str(exc)) from exc
    report.transitions = sum(len(t.history) - 1 for t in world.threads.values())
    for tid, thread in world.threads.items():
        report.final_states[tid] = thread.current
        report.final_alive[tid] = thread.alive
    return world, report


def _execute(world: World, stmt: Statement, report: ReplayReport) -> None:
    if isinstance(stmt, Assemble):
        tid = world.spawn_thread(stmt.state, stmt.timestamp, stmt.note)
        _check_declared_id(stmt.line, tid, stmt.thread)
        report.threads_created += 1
    elif isinstance(stmt, Goto):
        dispatch = DispatchReport()
        world.apply_transition(stmt.thread, stmt.state, stmt.timestamp, stmt.note, report=dispatch)
        _merge(report, dispatch)
    elif isinstance(stmt, Fork):
        tid = world.fork_thread(
            stmt.parent, stmt.assembly_state, stmt.initial, stmt.timestamp, stmt.note
        )
        _check_declared_id(stmt.line, tid, stmt.child)
        report.threads_created += 1
    elif isinstance(stmt, Event):
        dispatch = world.dispatch_event(stmt.name, stmt.timestamp)
        report.events.append(stmt.name)
        _merge(report, dispatch)
    elif isinstance(stmt, EventRuleDecl):
        world.register_event_rule(EventRule(stmt.event, stmt.selector, stmt.target))
    elif isinstance(stmt, ReactionRuleDecl):
        world.register_reaction_rule(
            ReactionRule(
                stmt.watched_state,
                stmt.affected_selector,
                stmt.target,
                watched_selector=stmt.watched_selector,
            )
        )
    elif isinstance(stmt, End):
        dispatch = DispatchReport()
        try:
            world.apply_transition(stmt.thread, TERMINAL, stmt.timestamp, None, report=dispatch)
        except IllegalTransitionError as exc:
            raise TraceReplayError(
                stmt.line,
                f"end requires the thread to be in a dispersal state "
                f"(thread {stmt.thread} is at {exc.frm})",
            ) from exc
        _merge(report, dispatch)
    else:  # pragma: no cover - closed statement union
        raise TypeError(f"unknown statement type: {stmt!r}")


def _check_declared_id(line: int, actual: int, declared: int) -> None:
    if actual != declared:
        raise TraceReplayError(
            line,
            f"statement names thread {declared} but creation order makes this thread {actual}",
        )


def _merge(report: ReplayReport, dispatch: DispatchReport) -> None:
    report.forced.extend(dispatch.forced)
    report.skipped.extend(dispatch.skipped)


# -- built-in case study ----------------------------------------------------------

#: A city-centre rally in a square. Thread 1 is the streams of people
#: converging; thread 2 the assembled audience; thread 3 a protest subgroup
#: that emerges from it. A police cordon forces the subgroup into conflict,
#: which in turn drives the audience to escape; the protest is finally
#: dispersed by force. Timestamp labels a-f follow the storyboard order.
GOLDEN_TEXT = """\
thread 1 assemble planned @a "inbound streams"
fork 2 from 1 assembly planned @a "waiting crowd"
thread 1 goto mode.transitory @a
thread 1 goto structure.mobile.laminar @a
thread 2 goto mode.spectator @b "rally begins"
thread 2 goto structure.static.solid @b
thread 1 goto dispersal.routine @b "merged into crowd 2"
thread 1 end @b
rule on enter mode.conflict thread 2 goto dispersal.escaping
rule on event police_cordon thread 3 goto mode.conflict
fork 3 from 2 assembly spontaneous initial mode.expressive @c "chanting subgroup"
event police_cordon @d
thread 3 goto structure.mobile.chaotic @e "clash with police line"
thread 2 end @e
thread 3 goto dispersal.coerced @f
thread 3 end @f
"""


def golden_case_study() -> Trace:
    """The built-in rally trace shipped with the package."""
    return parse(GOLDEN_TEXT, source="golden")
