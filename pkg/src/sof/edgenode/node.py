"""Camera-node state machine.

Transitions are pure: (state, event) -> (state', effects). All side
effects (decisions, escalations, log lines, diagnostics) are returned as
values, so arbitrary event scripts replay deterministically without any
network or clock.

A frame that recognizes an enrolled person grants or denies against the
node's device policy; an unrecognized face opens a capture window that
accumulates a photo series to escalate. Duplicate sightings inside the
debounce window stay silent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import SofError
from ..facecore.chips import FaceChip, align_face
from ..facecore.embedder import embed
from ..facecore.gallery import UNKNOWN, classify
from ..facecore.geometry import Landmarks
from ..snapshot import ModelSnapshot

IDLE = "IDLE"
CAPTURING = "CAPTURING"

DEBOUNCE_MS = 5_000
SERIES_MIN_CHIPS = 3
SERIES_MAX_CHIPS = 10
SERIES_MIN_SPAN_MS = 1_000
SERIES_TIMEOUT_MS = 10_000

GRANTED = "GRANTED"
DENIED_UNKNOWN = "DENIED_UNKNOWN"
DENIED_POLICY = "DENIED_POLICY"


@dataclass(frozen=True)
class FrameEvent:
    timestamp: int  # ms since epoch
    image: np.ndarray
    landmarks: Optional[Landmarks]  # None = no face found upstream


@dataclass(frozen=True)
class AccessDecision:
    outcome: str
    person_id: str  # person id or UNKNOWN
    confidence: float
    model_version: int
    device_id: str
    timestamp: int

    def __post_init__(self):
        if self.outcome == GRANTED and (self.person_id == UNKNOWN or self.confidence <= 0):
            raise SofError("GRANTED requires a known person with positive confidence")
        if self.outcome == DENIED_UNKNOWN and self.person_id != UNKNOWN:
            raise SofError("DENIED_UNKNOWN requires label UNKNOWN")

    def to_dict(self) -> dict:
        return {
            "ts": self.timestamp,
            "outcome": self.outcome,
            "person": self.person_id,
            "confidence": self.confidence,
            "model_version": self.model_version,
            "device_id": self.device_id,
        }


@dataclass(frozen=True)
class PhotoSeries:
    series_id: str
    node_id: str
    chips: tuple[FaceChip, ...]
    first_seen: int

    def __post_init__(self):
        if not SERIES_MIN_CHIPS <= len(self.chips) <= SERIES_MAX_CHIPS:
            raise SofError(
                f"photo series must hold {SERIES_MIN_CHIPS}-{SERIES_MAX_CHIPS} chips, "
                f"got {len(self.chips)}")


# -- effects -----------------------------------------------------------------

@dataclass(frozen=True)
class DecisionEffect:
    decision: AccessDecision


@dataclass(frozen=True)
class LogEffect:
    entry: dict


@dataclass(frozen=True)
class EscalationEffect:
    series: PhotoSeries


@dataclass(frozen=True)
class DiagnosticEffect:
    code: str
    detail: str


# -- state -------------------------------------------------------------------

@dataclass(frozen=True)
class NodeState:
    node_id: str
    device_id: str
    snapshot: ModelSnapshot
    device_min_level: int = 0
    device_restricted: bool = False
    phase: str = IDLE
    series_chips: tuple[FaceChip, ...] = ()
    series_started_at: int = 0
    series_counter: int = 0
    # last time a decision was emitted per person (and for unknown visits)
    last_emitted: dict = field(default_factory=dict)
    last_unknown_seen: Optional[int] = None
    escalated_current_visit: bool = False

    @property
    def model_version(self) -> int:
        return self.snapshot.version


def initial_state(node_id: str, device_id: str, snapshot: ModelSnapshot,
                  device_min_level: int = 0, device_restricted: bool = False) -> NodeState:
    return NodeState(node_id=node_id, device_id=device_id, snapshot=snapshot,
                     device_min_level=device_min_level,
                     device_restricted=device_restricted)


def _device_allows(level: int, min_level: int, restricted: bool) -> bool:
    return level >= min_level and not (restricted and level < 3)


def _decision_effects(state: NodeState, decision: AccessDecision):
    return [DecisionEffect(decision), LogEffect(decision.to_dict())]


def handle_frame(state: NodeState, ev: FrameEvent) -> tuple[NodeState, list]:
    """Process one frame under the currently adopted snapshot."""
    if ev.landmarks is None:
        return state, []

    try:
        chip = align_face(ev.image, ev.landmarks, state.snapshot.params.chip_size)
        probe = embed(chip, state.snapshot.params)
    except SofError as exc:
        return state, [DiagnosticEffect("PIPELINE_ERROR", str(exc))]

    result = classify(probe, state.snapshot.gallery, state.snapshot.tau_accept)

    if result.is_known and result.confidence > 0:
        last = state.last_emitted.get(result.label)
        if last is not None and ev.timestamp - last <= DEBOUNCE_MS:
            return state, []
        level = state.snapshot.gallery.permission_level(result.label)
        outcome = (GRANTED if _device_allows(level, state.device_min_level,
                                             state.device_restricted)
                   else DENIED_POLICY)
        decision = AccessDecision(outcome, result.label, result.confidence,
                                  state.model_version, state.device_id, ev.timestamp)
        emitted = dict(state.last_emitted)
        emitted[result.label] = ev.timestamp
        return replace(state, last_emitted=emitted), _decision_effects(state, decision)

    # Unknown (or zero-confidence) face: part of an unknown visit.
    new_visit = (state.last_unknown_seen is None
                 or ev.timestamp - state.last_unknown_seen > DEBOUNCE_MS)
    state = replace(state, last_unknown_seen=ev.timestamp)

    if state.phase == IDLE:
        if not new_visit and state.escalated_current_visit:
            return state, []  # same visit already resolved
        state = replace(state, phase=CAPTURING, series_chips=(chip,),
                        series_started_at=ev.timestamp,
                        series_counter=state.series_counter + 1,
                        escalated_current_visit=False)
        return state, []

    # CAPTURING: accumulate, finalize once the series is big and old enough.
    chips = state.series_chips
    if len(chips) < SERIES_MAX_CHIPS:
        chips = chips + (chip,)
        state = replace(state, series_chips=chips)
    if (len(chips) >= SERIES_MIN_CHIPS
            and ev.timestamp - state.series_started_at >= SERIES_MIN_SPAN_MS):
        return finalize_series(state, ev.timestamp)
    return state, []


def handle_tick(state: NodeState, now: int) -> tuple[NodeState, list]:
    """Clock advance: fires the capture timeout when due."""
    if state.phase != CAPTURING:
        return state, []
    if now - state.series_started_at < SERIES_TIMEOUT_MS:
        return state, []
    if len(state.series_chips) >= SERIES_MIN_CHIPS:
        return finalize_series(state, now)
    n_chips = len(state.series_chips)
    state = replace(state, phase=IDLE, series_chips=(),
                    escalated_current_visit=True)
    return state, [DiagnosticEffect(
        "SeriesTooSmall",
        f"capture timed out with {n_chips} chips; series discarded")]


def finalize_series(state: NodeState, now: int) -> tuple[NodeState, list]:
    """Emit the escalation and the visitor's denial; return to IDLE."""
    if state.phase != CAPTURING or len(state.series_chips) < SERIES_MIN_CHIPS:
        raise SofError("finalize_series requires CAPTURING with >= 3 chips")
    series = PhotoSeries(
        series_id=f"{state.node_id}-{state.series_started_at}-{state.series_counter}",
        node_id=state.node_id,
        chips=state.series_chips,
        first_seen=state.series_started_at,
    )
    decision = AccessDecision(DENIED_UNKNOWN, UNKNOWN, 0.0,
                              state.model_version, state.device_id, now)
    state = replace(state, phase=IDLE, series_chips=(),
                    escalated_current_visit=True)
    effects = [EscalationEffect(series)]
    effects.extend(_decision_effects(state, decision))
    return state, effects


def apply_model_update(state: NodeState, snapshot: ModelSnapshot) -> tuple[NodeState, list]:
    """Adopt a snapshot iff strictly newer; stale or corrupt ones are refused."""
    try:
        version = snapshot.version
        _ = snapshot.params.dim  # touch invariant-checked fields
    except Exception as exc:
        return state, [DiagnosticEffect("CorruptSnapshot", str(exc))]
    if version <= state.snapshot.version:
        return state, [DiagnosticEffect(
            "StaleSnapshot",
            f"ignored snapshot v{version}; current is v{state.snapshot.version}")]
    return replace(state, snapshot=snapshot), []
