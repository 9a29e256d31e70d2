"""Dynamic state-based crowd modelling.

Crowds are recorded as threads moving through a closed 18-state space
(assembly, mode, structure, dispersal phases plus a terminal state).
Threads fork into sub-crowds, respond to named external events and to
cross-thread reaction rules, and can be driven stochastically by weighted
walks. A line-based trace DSL records and replays whole narratives.
"""

from .classify import (
    ClassifierConfig,
    Sample,
    classify_sample,
    load_samples,
    parse_samples,
    series_to_transitions,
)
from .engine import (
    CrowdThread,
    DispatchReport,
    EventRecord,
    ForcedTransition,
    HistoryEntry,
    HistoryKind,
    SkippedApplication,
    TagSet,
    ThreadView,
    World,
    new_world,
)
from .errors import (
    CascadeDepthError,
    CrowdModelError,
    IllegalTransitionError,
    InvalidConfigError,
    InvalidRuleError,
    InvalidSampleError,
    InvalidStateError,
    NotAssemblyStateError,
    SampleFileError,
    TerminalStateError,
    TerminalThreadError,
    TraceReplayError,
    TraceSyntaxError,
    UnknownStateError,
    UnknownThreadError,
    WeightFileError,
    ZeroMassError,
)
from .rules import EventRule, ReactionRule, RuleSet, SelectorKind, ThreadSelector
from .schema import (
    ALL_STATES,
    ASSEMBLY_STATES,
    DISPERSAL_STATES,
    MODE_STATES,
    STRUCTURE_STATES,
    ModelSchema,
    Phase,
    SchemaOptions,
    StateId,
    default_schema,
    state,
    states_of,
)
from .stochastic import (
    SplitMix64,
    WalkConfig,
    WalkResult,
    WeightTable,
    load_weights,
    normalize,
    parse_weights,
    sample_next,
    walk,
)
from .trace import (
    GOLDEN_TEXT,
    Trace,
    ReplayReport,
    golden_case_study,
    parse,
    replay,
    serialize,
)

__version__ = "0.1.0"
