"""Deterministic care-path guidance for oncology operations.

The package models a cancer care pathway as a small directed graph, evaluates
payer guideline criteria in three-valued logic against point-in-time patient
snapshots, and coordinates three cooperating agents (clinical history, medical
necessity, care navigation) through an auditable message orchestrator.  A CLI
(``careflow``) and an HTTP service expose the same engine.
"""

from .codes import is_code, namespace_of, parse_code
from .dsl import parse_rule, print_rule
from .errors import (
    AmbiguousCodeMatch,
    AssetReadError,
    CareflowError,
    DuplicateTwinError,
    ExtractionError,
    NoCodeMatch,
    NoGuidelineFound,
    ParseError,
    StructuralError,
    TwinCallError,
    UnknownNodeError,
)
from .graph import CareEdge, CareGraph, CareNode, load_graph, topological_order, validate
from .guidelines import Guideline, GuidelineRegistry, load_registry
from .history import (
    GapFinding,
    Journey,
    Timeline,
    build_timeline,
    detect_gaps,
    journey_of,
    link_events,
)
from .navigator import (
    Deviation,
    Recommendation,
    annotate_with_necessity,
    current_frontier,
    detect_deviations,
    next_steps,
)
from .necessity import (
    BatchError,
    CodeMap,
    Determination,
    ProcedureSpec,
    Status,
    determine,
    load_code_map,
    select_cpt,
    simulate_batch,
)
from .orchestrator import AuditEntry, Orchestrator, TwinContext, TwinMessage, audit_export
from .patient import (
    ClinicalEvent,
    ClinicalFact,
    PatientRecord,
    PatientSnapshot,
    load_record,
    parse_event,
    snapshot_at,
    truncate_record,
)
from .rules import Rule, Verdict, World, evaluate, explain
from .scenario import Scenario, ScenarioResult, load_scenario, run_scenario

__version__ = "0.1.0"

__all__ = [
    "AmbiguousCodeMatch",
    "AssetReadError",
    "AuditEntry",
    "BatchError",
    "CareEdge",
    "CareGraph",
    "CareNode",
    "CareflowError",
    "ClinicalEvent",
    "ClinicalFact",
    "CodeMap",
    "Determination",
    "Deviation",
    "DuplicateTwinError",
    "ExtractionError",
    "GapFinding",
    "Guideline",
    "GuidelineRegistry",
    "Journey",
    "NoCodeMatch",
    "NoGuidelineFound",
    "Orchestrator",
    "ParseError",
    "PatientRecord",
    "PatientSnapshot",
    "ProcedureSpec",
    "Recommendation",
    "Rule",
    "Scenario",
    "ScenarioResult",
    "Status",
    "StructuralError",
    "Timeline",
    "TwinCallError",
    "TwinContext",
    "TwinMessage",
    "UnknownNodeError",
    "Verdict",
    "World",
    "annotate_with_necessity",
    "audit_export",
    "build_timeline",
    "current_frontier",
    "detect_deviations",
    "detect_gaps",
    "determine",
    "evaluate",
    "explain",
    "is_code",
    "journey_of",
    "link_events",
    "load_code_map",
    "load_graph",
    "load_record",
    "load_registry",
    "load_scenario",
    "namespace_of",
    "next_steps",
    "parse_code",
    "parse_event",
    "parse_rule",
    "print_rule",
    "run_scenario",
    "select_cpt",
    "simulate_batch",
    "snapshot_at",
    "topological_order",
    "truncate_record",
    "validate",
]
