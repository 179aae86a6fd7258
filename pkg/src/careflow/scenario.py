"""Scenario sessions: wire the three twins to one patient record, execute
scripted steps through the orchestrator, and serialize results for replay
comparison."""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from . import history as hist
from . import navigator as nav
from .assets import asset_text
from .errors import AssetReadError, ParseError, TwinCallError
from .graph import CareGraph, load_graph
from .guidelines import GuidelineRegistry, load_registry
from .necessity import (
    BatchError,
    CodeMap,
    Determination,
    ProcedureSpec,
    determination_to_doc,
    load_code_map,
    select_cpt,
    simulate_batch,
)
from .orchestrator import AuditEntry, Orchestrator, audit_export, entry_to_doc
from .patient import (
    ClinicalEvent,
    ClinicalFact,
    PatientRecord,
    PatientSnapshot,
    apply_event,
    load_record,
    parse_event,
    record_to_doc,
    snapshot_at,
    truncate_record,
)
from .rules import World

EPOCH = datetime.date(1970, 1, 1)


class SessionState:
    """The one mutable cell in a session: the current patient record."""

    def __init__(self, record: PatientRecord):
        self.record = record


def _as_date(value, default: datetime.date) -> datetime.date:
    if value is None:
        return default
    if isinstance(value, datetime.date):
        return value
    return datetime.date.fromisoformat(value)


def _as_world(value) -> World:
    if isinstance(value, World):
        return value
    if value is None:
        return World.OPEN
    return World(value)


def default_as_of(record: PatientRecord) -> datetime.date:
    latest = record.latest_data_date()
    return latest if latest is not None else EPOCH


def overlay_snapshot(snapshot: PatientSnapshot, overlay) -> PatientSnapshot:
    """A what-if copy of the snapshot: overlay entries {code, value} become
    effective facts (or demographics for demo:* codes) without touching the
    underlying record."""
    if not overlay:
        return snapshot
    facts = {f.code: f for f in snapshot.facts}
    demographics = dict(snapshot.demographics)
    for entry in overlay:
        code = entry["code"]
        value = entry.get("value")
        if code.startswith("demo:"):
            demographics[code.split(":", 1)[1]] = str(value)
        else:
            facts[code] = ClinicalFact(
                code=code,
                effective_date=snapshot.as_of,
                value=value,
                provenance="asserted",
            )
    return PatientSnapshot(
        record_id=snapshot.record_id,
        as_of=snapshot.as_of,
        demographics=demographics,
        facts=tuple(facts[c] for c in sorted(facts)),
        events=snapshot.events,
    )


# ---------------------------------------------------------------------------
# Twin construction
# ---------------------------------------------------------------------------

def build_twins(
    orchestrator: Orchestrator,
    graph: CareGraph,
    registry: GuidelineRegistry,
    code_map: CodeMap,
    state: SessionState,
) -> None:
    """Register the history, necessity, and navigator twins over one session
    record. Function tables are plain callables of (context, payload)."""

    def _snapshot(payload) -> PatientSnapshot:
        snapshot = payload.get("snapshot") if isinstance(payload, Mapping) else None
        if snapshot is not None:
            return snapshot
        as_of = _as_date(payload.get("as_of"), default_as_of(state.record))
        return overlay_snapshot(snapshot_at(state.record, as_of), payload.get("overlay"))

    # -- history twin -------------------------------------------------------

    def ingest_event(ctx, payload):
        event = payload["event"]
        if isinstance(event, Mapping):
            event = parse_event(event)
        before = len(state.record.facts)
        state.record = apply_event(state.record, event)
        ctx.reason(f"recorded {event.kind} {event.code} ({event.id}) on {event.date.isoformat()}")
        for fact in state.record.facts[before:]:
            ctx.reason(f"derived fact {fact.code}={fact.value} effective {fact.effective_date.isoformat()}")
        return {"event_id": event.id, "event_count": len(state.record.events)}

    def timeline(ctx, payload):
        payload = payload or {}
        as_of = _as_date(payload.get("as_of"), default_as_of(state.record))
        record = truncate_record(state.record, as_of)
        built = hist.build_timeline(record)
        gaps = hist.detect_gaps(built, graph, as_of, snapshot_at(record, as_of))
        ctx.reason(
            f"timeline at {as_of.isoformat()}: {len(built.events)} events, "
            f"{len(built.links)} links, {len(gaps)} gaps"
        )
        return hist.timeline_export(built, gaps)

    def journey(ctx, payload):
        payload = payload or {}
        as_of = _as_date(payload.get("as_of"), default_as_of(state.record))
        result = hist.journey_of(truncate_record(state.record, as_of), graph)
        ctx.reason(
            f"journey at {as_of.isoformat()}: {len(result.steps)} steps matched, "
            f"{len(result.unmatched_event_ids)} events unmatched"
        )
        return result

    def gaps(ctx, payload):
        payload = payload or {}
        as_of = _as_date(payload.get("as_of"), default_as_of(state.record))
        record = truncate_record(state.record, as_of)
        built = hist.build_timeline(record)
        found = hist.detect_gaps(built, graph, as_of, snapshot_at(record, as_of))
        for gap in found:
            ctx.reason(f"{gap.kind} {gap.subject}: {gap.observed_delay_days} days late")
        return found

    # -- necessity twin -----------------------------------------------------

    def determine_fn(ctx, payload):
        from .necessity import determine

        snapshot = _snapshot(payload)
        world = _as_world(payload.get("world"))
        payer = payload.get("payer") or state.record.payer_id
        det = determine(registry, payer, payload["code"], snapshot, world)
        ctx.reason(*det.reasoning)
        return det

    def simulate_batch_fn(ctx, payload):
        snapshot = _snapshot(payload)
        world = _as_world(payload.get("world"))
        payer = payload.get("payer") or state.record.payer_id
        results = simulate_batch(registry, payer, payload["codes"], snapshot, world)
        for item in results:
            if isinstance(item, BatchError):
                ctx.reason(f"{item.code}: no determination ({item.error})")
            else:
                ctx.reason(f"{item.code}: {item.status.value} per {item.guideline_id}")
        return results

    def select_cpt_fn(ctx, payload):
        spec = ProcedureSpec.of(
            payload["modality"],
            payload.get("body_sites", ()),
            payload.get("attributes"),
        )
        code = select_cpt(spec, code_map)
        ctx.reason(
            f"{spec.modality} {sorted(spec.body_sites)} "
            f"{dict(spec.attributes)} -> {code}"
        )
        return code

    # -- navigator twin -----------------------------------------------------

    def recommend(ctx, payload):
        payload = payload or {}
        as_of = _as_date(payload.get("as_of"), default_as_of(state.record))
        world = _as_world(payload.get("world"))
        payer = payload.get("payer") or state.record.payer_id
        journey = ctx.call("history", "journey", {"as_of": as_of})
        snapshot = overlay_snapshot(snapshot_at(state.record, as_of), payload.get("overlay"))
        recs = nav.next_steps(graph, snapshot, journey, world)
        frontier = nav.current_frontier(journey, graph)
        ctx.reason(
            f"frontier at {as_of.isoformat()}: {', '.join(frontier) or 'none'}; "
            f"{len(recs)} candidate steps"
        )
        recs = nav.annotate_with_necessity(recs, ctx, graph, payer, snapshot, world)
        for rec in recs:
            status = (
                rec.determination.status.value
                if isinstance(rec.determination, Determination)
                else "unavailable"
            )
            ctx.reason(f"rank {rec.rank}: {rec.node_id} via {rec.via_edge} [{status}]")
        return recs

    def deviations(ctx, payload):
        payload = payload or {}
        as_of = _as_date(payload.get("as_of"), default_as_of(state.record))
        journey = ctx.call("history", "journey", {"as_of": as_of})
        found = nav.detect_deviations(journey, graph)
        for dev in found:
            ctx.reason(f"{dev.kind} {dev.subject}: {dev.detail}")
        return found

    orchestrator.register_twin(
        "history",
        {"ingest_event": ingest_event, "timeline": timeline, "journey": journey, "gaps": gaps},
    )
    orchestrator.register_twin(
        "necessity",
        {"determine": determine_fn, "simulate_batch": simulate_batch_fn, "select_cpt": select_cpt_fn},
    )
    orchestrator.register_twin(
        "navigator",
        {"recommend": recommend, "deviations": deviations},
    )


# ---------------------------------------------------------------------------
# Scenario documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InjectEvent:
    event: ClinicalEvent


@dataclass(frozen=True)
class Ask:
    function: str
    payload: dict


@dataclass(frozen=True)
class Scenario:
    id: str
    graph: CareGraph
    registry: GuidelineRegistry
    code_map: CodeMap
    record: PatientRecord
    script: tuple[Union[InjectEvent, Ask], ...]


@dataclass(frozen=True)
class ScenarioResult:
    scenario_id: str
    record: PatientRecord
    steps: tuple[dict, ...]  # per-step output documents
    audit: tuple[AuditEntry, ...]


def resolve_ref(ref, base_dir: Optional[Path] = None) -> Union[str, Mapping]:
    """An asset reference is an inline document, a bundled:<name> asset, or a
    filesystem path (relative paths resolve against the scenario's folder)."""
    if isinstance(ref, Mapping):
        return ref
    if not isinstance(ref, str):
        raise ParseError(f"asset reference must be an object or string, got {type(ref).__name__}")
    if ref.startswith("bundled:"):
        name = ref.split(":", 1)[1]
        if "." not in name:
            name += ".json"
        return asset_text(name)
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise AssetReadError(f"cannot read asset {ref!r}: {exc}") from None


def load_scenario(document: Union[str, Mapping], base_dir: Optional[Path] = None) -> Scenario:
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be an object")
    for key in ("graph", "registry", "code_map", "patient"):
        if key not in doc:
            raise ParseError(f"scenario document missing {key!r}")
    graph = load_graph(resolve_ref(doc["graph"], base_dir))
    registry = load_registry(resolve_ref(doc["registry"], base_dir))
    code_map = load_code_map(resolve_ref(doc["code_map"], base_dir))
    record = load_record(resolve_ref(doc["patient"], base_dir))
    script: list[Union[InjectEvent, Ask]] = []
    for i, step_doc in enumerate(doc.get("script", [])):
        where = f"script[{i}]"
        if not isinstance(step_doc, dict) or "step" not in step_doc:
            raise ParseError(f"{where}: expected an object with a step field")
        kind = step_doc["step"]
        if kind == "inject-event":
            if "event" not in step_doc:
                raise ParseError(f"{where}: inject-event requires an event")
            script.append(InjectEvent(parse_event(step_doc["event"], where)))
        elif kind == "ask":
            function = step_doc.get("function")
            if not isinstance(function, str) or not function:
                raise ParseError(f"{where}: ask requires a function name")
            payload = step_doc.get("payload", {})
            if not isinstance(payload, dict):
                raise ParseError(f"{where}: ask payload must be an object")
            script.append(Ask(function, payload))
        else:
            raise ParseError(f"{where}: unknown step kind {kind!r}")
    return Scenario(
        id=str(doc.get("id", "scenario")),
        graph=graph,
        registry=registry,
        code_map=code_map,
        record=record,
        script=tuple(script),
    )


def execute_script(
    orchestrator: Orchestrator,
    script,
    sender: str = "scenario",
) -> list[dict]:
    """Run script steps through an already-wired orchestrator. Step errors
    are recorded in the step's output document and execution continues."""
    steps: list[dict] = []
    for step in script:
        if isinstance(step, InjectEvent):
            doc: dict = {"step": "inject-event", "event_id": step.event.id}
            try:
                result = orchestrator.call(sender, "history", "ingest_event", {"event": step.event})
                doc["output"] = to_doc(result)
            except TwinCallError as exc:
                doc["error"] = str(exc)
        else:
            doc = {"step": "ask", "function": step.function}
            twin = orchestrator.resolve_function(step.function)
            if twin is None:
                doc["error"] = f"no registered twin exposes {step.function!r}"
            else:
                try:
                    result = orchestrator.call(sender, twin, step.function, step.payload)
                    doc["output"] = to_doc(result)
                except TwinCallError as exc:
                    doc["error"] = str(exc)
        steps.append(doc)
    return steps


def run_scenario(scenario: Scenario) -> ScenarioResult:
    """Execute the script in order; step errors are recorded and execution
    continues. Determinism: same scenario in, same bytes out."""
    orchestrator = Orchestrator()
    state = SessionState(scenario.record)
    build_twins(orchestrator, scenario.graph, scenario.registry, scenario.code_map, state)
    steps = execute_script(orchestrator, scenario.script)
    return ScenarioResult(
        scenario_id=scenario.id,
        record=state.record,
        steps=tuple(steps),
        audit=orchestrator.audit_log(),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def to_doc(value: Any) -> Any:
    """JSON-ready rendering of any twin output."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, datetime.date):
        return value.isoformat()
    if isinstance(value, Mapping):
        return {k: to_doc(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_doc(v) for v in value]
    if isinstance(value, (Determination, BatchError)):
        return determination_to_doc(value)
    if isinstance(value, nav.Recommendation):
        return nav.recommendation_to_doc(value)
    if isinstance(value, nav.Deviation):
        return nav.deviation_to_doc(value)
    if isinstance(value, hist.Journey):
        return hist.journey_to_doc(value)
    if isinstance(value, hist.GapFinding):
        return hist.gap_to_doc(value)
    if isinstance(value, PatientRecord):
        return record_to_doc(value)
    raise TypeError(f"no document form for {type(value).__name__}")


def result_to_doc(result: ScenarioResult) -> dict:
    return {
        "scenario_id": result.scenario_id,
        "record": record_to_doc(result.record),
        "steps": [to_doc(s) for s in result.steps],
        "audit": [entry_to_doc(e) for e in result.audit],
    }


def result_export(result: ScenarioResult) -> str:
    return json.dumps(result_to_doc(result), indent=2, ensure_ascii=True) + "\n"


def result_audit_export(result: ScenarioResult) -> str:
    return audit_export(result.audit)
