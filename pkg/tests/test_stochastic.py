from __future__ import annotations

import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdstates.errors import (
    InvalidConfigError,
    TerminalStateError,
    WeightFileError,
    ZeroMassError,
)
from crowdstates.schema import (
    ALL_STATES,
    PARTICIPATORY,
    PLANNED,
    ROUTINE,
    SPECTATOR,
    STATIC_SPARSE,
    TERMINAL,
    default_schema,
)
from crowdstates.stochastic import (
    SplitMix64,
    WalkConfig,
    WeightTable,
    load_weights,
    normalize,
    parse_weights,
    sample_next,
    walk,
)

from oracle import oracle_is_legal

SCHEMA = default_schema()


def test_splitmix64_reference_values():
    # first outputs for seed 1234567, from the published splitmix64 recipe
    rng = SplitMix64(1234567)
    first = [rng.next_u64() for _ in range(3)]
    assert first == [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_splitmix64_floats_in_unit_interval():
    rng = SplitMix64(99)
    values = [rng.random() for _ in range(1000)]
    assert all(0.0 <= v < 1.0 for v in values)
    assert len(set(values)) > 990


def test_splitmix64_seed_range():
    SplitMix64(0)
    SplitMix64(2**64 - 1)
    with pytest.raises(InvalidConfigError):
        SplitMix64(-1)
    with pytest.raises(InvalidConfigError):
        SplitMix64(2**64)


def test_normalize_uniform_default():
    dist = normalize(WeightTable(), SCHEMA, PLANNED)
    targets = SCHEMA.legal_transitions_from(PLANNED)
    assert set(dist) == set(targets)
    for p in dist.values():
        assert p == pytest.approx(1 / len(targets))
    assert math.isclose(sum(dist.values()), 1.0, abs_tol=1e-12)


def test_normalize_explicit_half_half():
    table = WeightTable(
        weights={SPECTATOR: {PARTICIPATORY: 0.5, STATIC_SPARSE: 0.5}},
        default_weight=0.0,
    )
    dist = normalize(table, SCHEMA, SPECTATOR)
    assert dist[PARTICIPATORY] == pytest.approx(0.5)
    assert dist[STATIC_SPARSE] == pytest.approx(0.5)
    assert sum(dist.values()) == pytest.approx(1.0)
    # same shares from unnormalized weights
    table2 = WeightTable(weights={SPECTATOR: {PARTICIPATORY: 2.0, STATIC_SPARSE: 2.0}},
                         default_weight=0.0)
    assert normalize(table2, SCHEMA, SPECTATOR) == dist


def test_normalize_zero_mass():
    with pytest.raises(ZeroMassError):
        normalize(WeightTable(default_weight=0.0), SCHEMA, SPECTATOR)


def test_normalize_from_terminal():
    with pytest.raises(TerminalStateError):
        normalize(WeightTable(), SCHEMA, TERMINAL)


def test_normalize_rejects_bad_weights():
    with pytest.raises(InvalidConfigError):
        normalize(WeightTable(weights={SPECTATOR: {PARTICIPATORY: -1.0}}), SCHEMA, SPECTATOR)
    with pytest.raises(InvalidConfigError):
        # planned is never a legal target
        normalize(WeightTable(weights={SPECTATOR: {PLANNED: 1.0}}), SCHEMA, SPECTATOR)


@given(st.integers(min_value=0, max_value=2**64 - 1))
@settings(max_examples=50, deadline=None)
def test_normalize_sums_to_one_for_random_tables(seed):
    rng = SplitMix64(seed)
    weights = {}
    for frm in ALL_STATES:
        if frm == TERMINAL:
            continue
        row = {}
        for to in SCHEMA.legal_transitions_from(frm):
            row[to] = rng.random() * 3
        weights[frm] = row
    table = WeightTable(weights=weights, default_weight=0.0)
    for frm in weights:
        dist = normalize(table, SCHEMA, frm)
        assert math.isclose(sum(dist.values()), 1.0, abs_tol=1e-12)
        assert all(p >= 0 for p in dist.values())


def test_sample_next_degenerate_distribution():
    table = WeightTable(weights={SPECTATOR: {PARTICIPATORY: 1.0}}, default_weight=0.0)
    rng = SplitMix64(5)
    for _ in range(50):
        assert sample_next(table, SCHEMA, SPECTATOR, rng) == PARTICIPATORY


def test_sample_next_deterministic_per_seed():
    table = WeightTable()
    draws_a = [sample_next(table, SCHEMA, SPECTATOR, SplitMix64(42)).name for _ in range(1)]
    rng1, rng2 = SplitMix64(42), SplitMix64(42)
    seq1 = [sample_next(table, SCHEMA, SPECTATOR, rng1).name for _ in range(200)]
    seq2 = [sample_next(table, SCHEMA, SPECTATOR, rng2).name for _ in range(200)]
    assert seq1 == seq2
    assert draws_a[0] == seq1[0]


def test_sample_next_half_half_frequency():
    # 10,000 draws from a two-target 0.5/0.5 table; binomial 4-sigma bound
    table = WeightTable(
        weights={SPECTATOR: {PARTICIPATORY: 0.5, STATIC_SPARSE: 0.5}},
        default_weight=0.0,
    )
    rng = SplitMix64(2024)
    counts = Counter(sample_next(table, SCHEMA, SPECTATOR, rng) for _ in range(10_000))
    assert set(counts) == {PARTICIPATORY, STATIC_SPARSE}
    assert 0.48 <= counts[PARTICIPATORY] / 10_000 <= 0.52
    assert 0.48 <= counts[STATIC_SPARSE] / 10_000 <= 0.52


def test_walk_degenerate_path_terminates():
    table = WeightTable(
        weights={
            PLANNED: {SPECTATOR: 1.0},
            SPECTATOR: {ROUTINE: 1.0},
            ROUTINE: {TERMINAL: 1.0},
        },
        default_weight=0.0,
    )
    result = walk(table, SCHEMA, WalkConfig(seed=1, max_steps=50, start=PLANNED))
    assert result.states == (PLANNED, SPECTATOR, ROUTINE, TERMINAL)
    assert result.terminated


def test_walk_respects_step_bound():
    result = walk(WeightTable(), SCHEMA, WalkConfig(seed=3, max_steps=1, start=PLANNED))
    assert len(result.states) == 2
    assert result.terminated == (result.states[-1] == TERMINAL)


def test_walk_same_seed_identical():
    config = WalkConfig(seed=777, max_steps=40, start=PLANNED)
    assert walk(WeightTable(), SCHEMA, config) == walk(WeightTable(), SCHEMA, config)


def test_walk_different_seeds_diverge():
    a = walk(WeightTable(), SCHEMA, WalkConfig(seed=1, max_steps=40, start=PLANNED))
    b = walk(WeightTable(), SCHEMA, WalkConfig(seed=2, max_steps=40, start=PLANNED))
    assert a != b


def test_walk_steps_are_always_legal():
    for seed in range(25):
        result = walk(WeightTable(), SCHEMA, WalkConfig(seed=seed, max_steps=60))
        for frm, to in zip(result.states, result.states[1:]):
            assert oracle_is_legal(frm, to)
        if result.terminated:
            assert result.states[-1] == TERMINAL
            assert TERMINAL not in result.states[:-1]


def test_walk_from_terminal_is_trivial():
    result = walk(WeightTable(), SCHEMA, WalkConfig(seed=9, max_steps=5, start=TERMINAL))
    assert result.states == (TERMINAL,)
    assert result.terminated


def test_walk_config_validation():
    with pytest.raises(InvalidConfigError):
        WalkConfig(seed=1, max_steps=0)
    with pytest.raises(InvalidConfigError):
        WalkConfig(seed=-1, max_steps=5)


WEIGHTS_TEXT = """\
# forced path for demos
default 0
assembly.planned -> mode.spectator 1
mode.spectator -> dispersal.routine 1
dispersal.routine -> terminal 1
"""


def test_parse_weights_happy_path():
    table = parse_weights(WEIGHTS_TEXT, SCHEMA)
    assert table.default_weight == 0.0
    assert table.effective(PLANNED, SPECTATOR) == 1.0
    assert table.effective(PLANNED, PARTICIPATORY) == 0.0


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("assembly.planned -> mode.spectater 1", 1, "unknown state"),
        ("mode.spectator -> assembly.planned 1", 1, "illegal transition"),
        ("mode.spectator mode.conflict 1", 1, "expected"),
        ("default 1\ndefault 2", 2, "more than once"),
        ("mode.spectator -> mode.conflict -3", 1, "non-negative"),
        ("mode.spectator -> mode.conflict x", 1, "not a number"),
        ("mode.spectator -> mode.conflict 1\nmode.spectator -> mode.conflict 2", 2, "duplicate"),
    ],
)
def test_parse_weights_errors_name_line(text, line, fragment):
    with pytest.raises(WeightFileError) as exc:
        parse_weights(text, SCHEMA)
    assert exc.value.line == line
    assert fragment in str(exc.value)


def test_load_weights_roundtrip(tmp_path):
    path = tmp_path / "forced.weights"
    path.write_text(WEIGHTS_TEXT, encoding="utf-8")
    table = load_weights(path, SCHEMA)
    result = walk(table, SCHEMA, WalkConfig(seed=0, max_steps=10))
    assert result.states == (PLANNED, SPECTATOR, ROUTINE, TERMINAL)
