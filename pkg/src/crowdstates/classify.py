"""Turn measured density/speed/flow-order series into structure states.

Mobility is decided first: a crowd whose mean speed is below the static
speed ceiling is static, otherwise mobile. Static crowds band by density
(sparse / solid / crush), mobile crowds by a flow-order parameter in
[0, 1] (chaotic / regular / laminar). The order parameter is assumed to be
pre-computed upstream; this module never touches footage.

With a previous structure state supplied, band changes are damped by
hysteresis: the governing metric must clear the boundary it is crossing by
a margin (the configurable density margin, or fixed margins for speed and
order), otherwise the previous state is kept. Multi-band jumps advance one
boundary at a time and settle on the last band whose boundary was cleared.

All functions are pure.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import InvalidConfigError, InvalidSampleError, SampleFileError
from .schema import (
    MOBILE_CHAOTIC,
    MOBILE_LAMINAR,
    MOBILE_REGULAR,
    Phase,
    STATIC_CRUSH,
    STATIC_SOLID,
    STATIC_SPARSE,
    StateId,
)

#: Fixed hysteresis margins for the metrics whose thresholds are not
#: configurable: flow order (dimensionless) and mean speed (m/s).
ORDER_MARGIN = 0.02
SPEED_MARGIN = 0.05

_STATIC_BANDS = (STATIC_SPARSE, STATIC_SOLID, STATIC_CRUSH)
_MOBILE_BANDS = (MOBILE_CHAOTIC, MOBILE_REGULAR, MOBILE_LAMINAR)


@dataclass(frozen=True)
class ClassifierConfig:
    """Thresholds: densities in persons/m2, speed in m/s, order in [0, 1]."""

    sparse_max: float = 2.0
    solid_max: float = 4.0
    hysteresis: float = 0.2
    static_speed_max: float = 0.2
    chaotic_max: float = 0.4
    regular_max: float = 0.7

    def __post_init__(self):
        if not 0 < self.sparse_max < self.solid_max:
            raise InvalidConfigError("need 0 < sparse_max < solid_max")
        if not 0 <= self.hysteresis < (self.solid_max - self.sparse_max) / 2:
            raise InvalidConfigError(
                "hysteresis must be >= 0 and below half the density band width"
            )
        if self.static_speed_max <= 0:
            raise InvalidConfigError("static_speed_max must be positive")
        if not 0 < self.chaotic_max < self.regular_max < 1:
            raise InvalidConfigError("need 0 < chaotic_max < regular_max < 1")


@dataclass(frozen=True)
class Sample:
    """One measurement: opaque ordered timestamp plus three scalars."""

    timestamp: str
    density: float
    mean_speed: float
    order: float

    def __post_init__(self):
        if self.density < 0:
            raise InvalidSampleError(f"density must be >= 0, got {self.density}")
        if self.mean_speed < 0:
            raise InvalidSampleError(f"mean_speed must be >= 0, got {self.mean_speed}")
        if not 0 <= self.order <= 1:
            raise InvalidSampleError(f"order must be in [0, 1], got {self.order}")


def _raw_band(value: float, cuts: tuple[float, ...]) -> int:
    band = 0
    for cut in cuts:
        if value >= cut:
            band += 1
    return band


def _damped_band(value: float, cuts: tuple[float, ...], margin: float, prev: int) -> int:
    """Move from ``prev`` toward the raw band one boundary at a time; each
    boundary must be cleared by more than ``margin`` or the move stops."""
    raw = _raw_band(value, cuts)
    band = prev
    while band < raw and value > cuts[band] + margin:
        band += 1
    while band > raw and value < cuts[band - 1] - margin:
        band -= 1
    return band


def classify_sample(
    config: ClassifierConfig, sample: Sample, previous: StateId | None = None
) -> StateId:
    """Structure state for one sample, damped against ``previous`` when that
    is a structure state."""
    density_cuts = (config.sparse_max, config.solid_max)
    order_cuts = (config.chaotic_max, config.regular_max)
    speed_cut = (config.static_speed_max,)

    if previous is None or previous.phase is not Phase.STRUCTURE:
        if sample.mean_speed < config.static_speed_max:
            return _STATIC_BANDS[_raw_band(sample.density, density_cuts)]
        return _MOBILE_BANDS[_raw_band(sample.order, order_cuts)]

    prev_mobile = previous in _MOBILE_BANDS
    mobile = bool(_damped_band(sample.mean_speed, speed_cut, SPEED_MARGIN, int(prev_mobile)))
    if mobile != prev_mobile:
        # mobility flipped: the other axis has no previous band to damp against
        if mobile:
            return _MOBILE_BANDS[_raw_band(sample.order, order_cuts)]
        return _STATIC_BANDS[_raw_band(sample.density, density_cuts)]
    if mobile:
        prev_band = _MOBILE_BANDS.index(previous)
        return _MOBILE_BANDS[_damped_band(sample.order, order_cuts, ORDER_MARGIN, prev_band)]
    prev_band = _STATIC_BANDS.index(previous)
    return _STATIC_BANDS[_damped_band(sample.density, density_cuts, config.hysteresis, prev_band)]


def series_to_transitions(
    config: ClassifierConfig, samples: list[Sample]
) -> list[tuple[str, StateId]]:
    """Classify a sample series and keep only the changes.

    The first sample always yields an entry; later samples contribute one
    only when the damped classification moves. Timestamps must strictly
    increase (numerically when they all parse as numbers, otherwise as
    plain strings).
    """
    if not samples:
        raise InvalidSampleError("sample series is empty")
    _check_timestamps_ordered(samples)
    current = classify_sample(config, samples[0], None)
    out = [(samples[0].timestamp, current)]
    for sample in samples[1:]:
        nxt = classify_sample(config, sample, previous=current)
        if nxt != current:
            out.append((sample.timestamp, nxt))
            current = nxt
    return out


def _check_timestamps_ordered(samples: list[Sample]) -> None:
    labels = [s.timestamp for s in samples]
    try:
        keys = [float(label) for label in labels]
    except ValueError:
        keys = labels
    for i in range(1, len(keys)):
        if not keys[i] > keys[i - 1]:
            raise InvalidSampleError(
                f"timestamps must strictly increase: {labels[i - 1]!r} !< {labels[i]!r}"
            )


_HEADER = ["timestamp", "density", "speed", "order"]


def parse_samples(text: str) -> list[Sample]:
    """Parse sample CSV text with header ``timestamp,density,speed,order``.

    Errors name the 1-based file row they occur on.
    """
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i, row) for i, row in enumerate(rows, start=1) if any(cell.strip() for cell in row)]
    if not rows:
        raise SampleFileError(1, "file is empty")
    header_row, header = rows[0]
    if [cell.strip().lower() for cell in header] != _HEADER:
        raise SampleFileError(header_row, f"expected header {','.join(_HEADER)}")
    samples = []
    for rowno, row in rows[1:]:
        if len(row) != 4:
            raise SampleFileError(rowno, f"expected 4 fields, got {len(row)}")
        timestamp = row[0].strip()
        try:
            density, speed, order = (float(cell) for cell in row[1:])
        except ValueError:
            raise SampleFileError(rowno, f"non-numeric measurement in {row[1:]}") from None
        try:
            samples.append(Sample(timestamp, density, speed, order))
        except InvalidSampleError as exc:
            raise SampleFileError(rowno, str(exc)) from None
    if not samples:
        raise SampleFileError(header_row, "no data rows")
    return samples


def load_samples(path) -> list[Sample]:
    with open(path, encoding="utf-8") as handle:
        return parse_samples(handle.read())
