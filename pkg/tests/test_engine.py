from __future__ import annotations

import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, rule, run_state_machine_as_test

from crowdstates.engine import HistoryKind, World, new_world
from crowdstates.errors import (
    IllegalTransitionError,
    InvalidStateError,
    NotAssemblyStateError,
    TerminalThreadError,
    UnknownThreadError,
)
from crowdstates.schema import (
    ALL_STATES,
    ASSEMBLY_STATES,
    CONFLICT,
    COERCED,
    ESCAPING,
    EXPRESSIVE,
    MOBILE_LAMINAR,
    PLANNED,
    ROUTINE,
    SPECTATOR,
    SPONTANEOUS,
    STATIC_SOLID,
    TERMINAL,
    TRANSITORY,
    Phase,
    default_schema,
)

from oracle import oracle_is_legal


@pytest.fixture
def world() -> World:
    return new_world(default_schema())


def test_new_world_is_empty(world):
    assert len(world.threads) == 0
    assert world.event_log == []
    assert world.rules.event_rules == [] and world.rules.reaction_rules == []


def test_worlds_are_independent():
    a = new_world(default_schema())
    b = new_world(default_schema())
    a.spawn_thread(PLANNED)
    assert len(a.threads) == 1
    assert len(b.threads) == 0


def test_spawn_sets_state_and_assembly_tag(world):
    tid = world.spawn_thread(PLANNED)
    view = world.inspect(tid)
    assert view.current == PLANNED
    assert view.tags.assembly == PLANNED
    assert view.tags.mode is None
    assert view.alive
    assert [e.kind for e in view.history] == [HistoryKind.ASSEMBLED]


def test_spawn_requires_assembly_state(world):
    with pytest.raises(NotAssemblyStateError):
        world.spawn_thread(CONFLICT)


def test_thread_ids_are_monotone(world):
    assert world.spawn_thread(PLANNED) == 1
    assert world.spawn_thread(SPONTANEOUS) == 2


def test_transition_overwrites_phase_tag(world):
    tid = world.spawn_thread(PLANNED)
    world.apply_transition(tid, SPECTATOR)
    view = world.apply_transition(tid, EXPRESSIVE)
    assert view.tags.mode == EXPRESSIVE
    assert view.tags.assembly == PLANNED
    assert view.current == EXPRESSIVE


def test_inspect_after_spawn_and_transition(world):
    tid = world.spawn_thread(PLANNED)
    world.apply_transition(tid, SPECTATOR)
    view = world.inspect(tid)
    assert view.tags.assembly == PLANNED
    assert view.tags.mode == SPECTATOR
    assert view.tags.structure is None and view.tags.dispersal is None


def test_inspect_unknown_thread(world):
    with pytest.raises(UnknownThreadError):
        world.inspect(99)


def test_inspect_returns_detached_snapshot(world):
    tid = world.spawn_thread(PLANNED)
    before = world.inspect(tid)
    world.apply_transition(tid, SPECTATOR)
    assert before.current == PLANNED
    assert len(before.history) == 1


def test_illegal_transition_names_both_states(world):
    tid = world.spawn_thread(PLANNED)
    world.apply_transition(tid, ROUTINE)
    with pytest.raises(IllegalTransitionError) as exc:
        world.apply_transition(tid, PLANNED)
    assert exc.value.frm == ROUTINE
    assert exc.value.to == PLANNED


def test_terminal_thread_frozen(world):
    tid = world.spawn_thread(PLANNED)
    world.apply_transition(tid, ROUTINE)
    view = world.apply_transition(tid, TERMINAL)
    assert not view.alive
    assert view.history[-1].kind == HistoryKind.TERMINATED
    with pytest.raises(TerminalThreadError):
        world.apply_transition(tid, SPECTATOR)
    with pytest.raises(TerminalThreadError):
        world.fork_thread(tid)
    assert len(world.thread_trace(tid)) == 3


def test_terminal_only_from_dispersal(world):
    tid = world.spawn_thread(PLANNED)
    world.apply_transition(tid, SPECTATOR)
    with pytest.raises(IllegalTransitionError):
        world.apply_transition(tid, TERMINAL)


def test_thread_trace_sequence_indexes(world):
    tid = world.spawn_thread(PLANNED)
    for target in (TRANSITORY, MOBILE_LAMINAR, ROUTINE):
        world.apply_transition(tid, target)
    trace = world.thread_trace(tid)
    assert [e.index for e in trace] == [0, 1, 2, 3]
    assert trace[0].kind == HistoryKind.ASSEMBLED


def test_fork_inherits_tags_and_overrides_assembly(world):
    parent = world.spawn_thread(PLANNED)
    world.apply_transition(parent, SPECTATOR)
    world.apply_transition(parent, STATIC_SOLID)
    child = world.fork_thread(parent, assembly_state=SPONTANEOUS, initial=EXPRESSIVE)
    view = world.inspect(child)
    assert view.tags.assembly == SPONTANEOUS
    assert view.tags.mode == EXPRESSIVE
    assert view.tags.structure == STATIC_SOLID
    assert view.current == EXPRESSIVE
    assert view.parent == parent
    assert view.history[0].kind == HistoryKind.FORKED_FROM
    assert view.history[0].cause == parent


def test_fork_default_assembly_is_spontaneous(world):
    parent = world.spawn_thread(PLANNED)
    world.apply_transition(parent, SPECTATOR)
    child = world.fork_thread(parent)
    assert world.inspect(child).tags.assembly == SPONTANEOUS


def test_fork_without_initial_takes_parent_current(world):
    parent = world.spawn_thread(PLANNED)
    world.apply_transition(parent, SPECTATOR)
    child = world.fork_thread(parent, assembly_state=PLANNED)
    view = world.inspect(child)
    assert view.current == SPECTATOR
    assert view.tags.assembly == PLANNED


def test_fork_while_parent_in_assembly(world):
    # The child cannot inherit an assembly-phase current (assembly states
    # have no incoming edges), so it stays at its own assembly state.
    parent = world.spawn_thread(PLANNED)
    child = world.fork_thread(parent, assembly_state=PLANNED)
    view = world.inspect(child)
    assert view.current == PLANNED
    assert len(view.history) == 1


def test_fork_argument_validation(world):
    parent = world.spawn_thread(PLANNED)
    world.apply_transition(parent, SPECTATOR)
    with pytest.raises(UnknownThreadError):
        world.fork_thread(42)
    with pytest.raises(NotAssemblyStateError):
        world.fork_thread(parent, assembly_state=SPECTATOR)
    with pytest.raises(InvalidStateError):
        world.fork_thread(parent, initial=PLANNED)
    with pytest.raises(InvalidStateError):
        world.fork_thread(parent, initial=TERMINAL)


def test_fork_isolation(world):
    parent = world.spawn_thread(PLANNED)
    world.apply_transition(parent, SPECTATOR)
    child = world.fork_thread(parent)
    before = world.inspect(parent)
    world.apply_transition(child, CONFLICT)
    world.apply_transition(child, ESCAPING)
    after = world.inspect(parent)
    assert before == after
    child_before = world.inspect(child)
    world.apply_transition(parent, STATIC_SOLID)
    assert world.inspect(child) == child_before


def test_ids_not_reused_after_termination(world):
    a = world.spawn_thread(PLANNED)
    world.apply_transition(a, ROUTINE)
    world.apply_transition(a, TERMINAL)
    b = world.spawn_thread(PLANNED)
    assert b == a + 1
    assert set(world.threads) == {a, b}


def test_history_replays_legally(world):
    tid = world.spawn_thread(PLANNED)
    for target in (SPECTATOR, STATIC_SOLID, ESCAPING, COERCED, TERMINAL):
        world.apply_transition(tid, target)
    trace = world.thread_trace(tid)
    for prev, entry in zip(trace, trace[1:]):
        assert oracle_is_legal(prev.state, entry.state)


def test_timestamps_and_notes_are_recorded(world):
    tid = world.spawn_thread(PLANNED, timestamp="t0", note="gathering")
    world.apply_transition(tid, SPECTATOR, timestamp="t1", note="show starts")
    trace = world.thread_trace(tid)
    assert trace[0].timestamp == "t0" and trace[0].note == "gathering"
    assert trace[1].timestamp == "t1" and trace[1].note == "show starts"


# -- stateful property test ---------------------------------------------------

NON_ASSEMBLY = [s for s in ALL_STATES if s.phase not in (Phase.ASSEMBLY, Phase.TERMINAL)]


class EngineMachine(RuleBasedStateMachine):
    """Random spawn/transition/fork sequences against a shadow tag model."""

    def __init__(self):
        super().__init__()
        self.world = new_world(default_schema())
        self.expected_tags: dict[int, dict[Phase, object]] = {}

    def _record(self, tid, state):
        if state.phase is not Phase.TERMINAL:
            self.expected_tags[tid][state.phase] = state

    @rule(assembly=st.sampled_from(ASSEMBLY_STATES))
    def spawn(self, assembly):
        tid = self.world.spawn_thread(assembly)
        self.expected_tags[tid] = {}
        self._record(tid, assembly)

    @rule(data=st.data())
    def transition(self, data):
        live = [t for t in self.world.threads.values() if t.alive]
        if not live:
            return
        thread = data.draw(st.sampled_from(live))
        targets = self.world.schema.legal_transitions_from(thread.current)
        if not targets:
            return
        target = data.draw(st.sampled_from(targets))
        self.world.apply_transition(thread.id, target)
        self._record(thread.id, target)

    @rule(data=st.data(), assembly=st.sampled_from(ASSEMBLY_STATES),
          initial=st.one_of(st.none(), st.sampled_from(NON_ASSEMBLY)))
    def fork(self, data, assembly, initial):
        live = [t for t in self.world.threads.values() if t.alive]
        if not live:
            return
        parent = data.draw(st.sampled_from(live))
        child = self.world.fork_thread(parent.id, assembly_state=assembly, initial=initial)
        self.expected_tags[child] = dict(self.expected_tags[parent.id])
        self._record(child, assembly)
        view = self.world.inspect(child)
        if view.current != assembly:
            self._record(child, view.current)

    @rule(data=st.data())
    def poke_dead_thread(self, data):
        dead = [t for t in self.world.threads.values() if not t.alive]
        if not dead:
            return
        thread = data.draw(st.sampled_from(dead))
        length = len(thread.history)
        with pytest.raises(TerminalThreadError):
            self.world.apply_transition(thread.id, SPECTATOR)
        assert len(thread.history) == length

    @invariant()
    def tags_match_shadow(self):
        for tid, expected in self.expected_tags.items():
            view = self.world.inspect(tid)
            for phase in (Phase.ASSEMBLY, Phase.MODE, Phase.STRUCTURE, Phase.DISPERSAL):
                assert view.tags.get(phase) == expected.get(phase)

    @invariant()
    def current_matches_history_and_liveness(self):
        for thread in self.world.threads.values():
            assert thread.current == thread.history[-1].state
            assert thread.alive == (thread.current != TERMINAL)
            indexes = [e.index for e in thread.history]
            assert indexes == list(range(len(indexes)))

    @invariant()
    def histories_are_legal(self):
        for thread in self.world.threads.values():
            for prev, entry in zip(thread.history, thread.history[1:]):
                assert oracle_is_legal(prev.state, entry.state)


def test_engine_state_machine():
    EngineMachine.TestCase.settings = settings(max_examples=60, stateful_step_count=30, deadline=None)
    run_state_machine_as_test(EngineMachine)
