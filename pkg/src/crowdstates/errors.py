"""Exception types raised across the package.

Every domain failure maps to one of these, so callers (CLI, HTTP service,
tests) can branch on type instead of scraping messages.
"""

from __future__ import annotations


class CrowdModelError(Exception):
    """Base class for all domain errors raised by this package."""


class UnknownStateError(CrowdModelError):
    """A state name or id does not belong to the canonical inventory."""

    def __init__(self, name: object):
        super().__init__(f"unknown state: {name!r}")
        self.name = name


class IllegalTransitionError(CrowdModelError):
    """An ordered state pair is not in the schema's legality relation."""

    def __init__(self, frm, to):
        super().__init__(f"illegal transition: {frm} -> {to}")
        self.frm = frm
        self.to = to


class UnknownThreadError(CrowdModelError):
    def __init__(self, thread_id: int):
        super().__init__(f"unknown thread: {thread_id}")
        self.thread_id = thread_id


class TerminalThreadError(CrowdModelError):
    """Operation attempted on a thread that has already terminated."""

    def __init__(self, thread_id: int):
        super().__init__(f"thread {thread_id} is terminal and cannot change state")
        self.thread_id = thread_id


class NotAssemblyStateError(CrowdModelError):
    def __init__(self, state):
        super().__init__(f"{state} is not an assembly state")
        self.state = state


class InvalidStateError(CrowdModelError):
    """A state is not permitted in the requested role (e.g. fork initial)."""


class InvalidRuleError(CrowdModelError):
    """A rule declaration fails validation (bad target, bad selector)."""


class CascadeDepthError(CrowdModelError):
    """Chained reaction rules exceeded the configured cascade depth.

    The world keeps every transition applied before the limit was hit;
    ``report`` holds the partial dispatch report with ``truncated`` set.
    """

    def __init__(self, limit: int, report=None):
        super().__init__(f"reaction cascade exceeded depth limit of {limit}")
        self.limit = limit
        self.report = report


class ZeroMassError(CrowdModelError):
    """All effective outgoing weights from a state are zero."""

    def __init__(self, state):
        super().__init__(f"no outgoing probability mass from {state}")
        self.state = state


class TerminalStateError(CrowdModelError):
    """Sampling was requested from the terminal state."""

    def __init__(self, state):
        super().__init__(f"{state} has no outgoing transitions")
        self.state = state


class InvalidConfigError(CrowdModelError):
    """Configuration values violate a documented invariant."""


class InvalidSampleError(CrowdModelError):
    """A measurement sample has out-of-range fields."""


class TraceSyntaxError(CrowdModelError):
    """Trace text failed to parse; carries line, column and reason."""

    def __init__(self, line: int, column: int, reason: str):
        super().__init__(f"line {line}, col {column}: {reason}")
        self.line = line
        self.column = column
        self.reason = reason


class TraceReplayError(CrowdModelError):
    """A statement could not be executed against the world."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class WeightFileError(CrowdModelError):
    """Weight file text is malformed; carries the offending line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class SampleFileError(CrowdModelError):
    """Sample file text is malformed; carries the offending row number."""

    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason
