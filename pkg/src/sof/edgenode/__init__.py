"""Camera-node state machine: recognize locally, escalate unknowns."""

from .node import (
    CAPTURING,
    DEBOUNCE_MS,
    DENIED_POLICY,
    DENIED_UNKNOWN,
    GRANTED,
    IDLE,
    SERIES_MAX_CHIPS,
    SERIES_MIN_CHIPS,
    SERIES_MIN_SPAN_MS,
    SERIES_TIMEOUT_MS,
    AccessDecision,
    DecisionEffect,
    DiagnosticEffect,
    EscalationEffect,
    FrameEvent,
    LogEffect,
    NodeState,
    PhotoSeries,
    apply_model_update,
    finalize_series,
    handle_frame,
    handle_tick,
    initial_state,
)

__all__ = [
    "AccessDecision",
    "CAPTURING",
    "DEBOUNCE_MS",
    "DENIED_POLICY",
    "DENIED_UNKNOWN",
    "DecisionEffect",
    "DiagnosticEffect",
    "EscalationEffect",
    "FrameEvent",
    "GRANTED",
    "IDLE",
    "LogEffect",
    "NodeState",
    "PhotoSeries",
    "SERIES_MAX_CHIPS",
    "SERIES_MIN_CHIPS",
    "SERIES_MIN_SPAN_MS",
    "SERIES_TIMEOUT_MS",
    "apply_model_update",
    "finalize_series",
    "handle_frame",
    "handle_tick",
    "initial_state",
]
