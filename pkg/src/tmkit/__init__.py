"""tmkit: a toolchain for the Thinging Machine (TM) modeling notation.

Parse the textual TM language into a validated graph model, define events
and chronologies over it, execute models deterministically under
scenarios, and emit DOT diagram files. Ships a corpus of four worked
models (water reservoir control, categorical imperative, murderer
dilemma, Islamic ethical decision).
"""

from .core import (
    Chronology,
    Diagnostic,
    Event,
    FlowEdge,
    Machine,
    Model,
    StageKind,
    StageRef,
    Thing,
    TriggerEdge,
    build_model,
    flow_legal,
    resolve,
    validate,
)
from .dsl import ParseResult, SourceSpan, parse, serialize
from .events import CoverageReport, attach_event, coverage, is_linear_extension, validate_chronology
from .render import DotDocument, render_chronology, render_events, render_static
from .sim import Scenario, Trace, conforms, load_scenario, simulate, step

__version__ = "0.1.0"

__all__ = [
    "Chronology",
    "CoverageReport",
    "Diagnostic",
    "DotDocument",
    "Event",
    "FlowEdge",
    "Machine",
    "Model",
    "ParseResult",
    "Scenario",
    "SourceSpan",
    "StageKind",
    "StageRef",
    "Thing",
    "Trace",
    "TriggerEdge",
    "attach_event",
    "build_model",
    "conforms",
    "coverage",
    "flow_legal",
    "is_linear_extension",
    "load_scenario",
    "parse",
    "render_chronology",
    "render_events",
    "render_static",
    "resolve",
    "serialize",
    "simulate",
    "step",
    "validate",
    "validate_chronology",
    "__version__",
]
