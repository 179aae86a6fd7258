"""Care-path navigation: position on the graph, ranked next-step
recommendations enriched with necessity determinations, and deviations
between the ideal path and the actual journey."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

from .errors import TwinCallError
from .graph import CareGraph, entry_nodes, successors
from .history import Journey
from .necessity import BatchError, Determination, Status, determination_to_doc
from .patient import PatientSnapshot
from .rules import RuleTrace, Verdict, World, evaluate, trace_to_doc

_STATUS_ORDER = {
    Status.APPROVED: 0,
    Status.INSUFFICIENT_INFORMATION: 1,
    Status.DENIED: 2,
}
_NO_DETERMINATION_ORDER = 3


@dataclass(frozen=True)
class Recommendation:
    """One candidate next step reached over one graph edge."""

    node_id: str
    via_edge: str  # "source->target"
    edge_index: int  # position in graph document order
    condition_verdict: Verdict
    condition_trace: Optional[RuleTrace]  # None for ALWAYS edges
    rank: int
    determination: Optional[Union[Determination, BatchError]] = None
    note: str = ""


@dataclass(frozen=True)
class Deviation:
    kind: str  # "off-path-event" | "skipped-prerequisite" | "out-of-order"
    subject: str  # event id or node id
    detail: str


def current_frontier(journey: Journey, graph: CareGraph) -> list[str]:
    """Matched nodes that still have somewhere to go: at least one edge to an
    unvisited (or repeatable) target. An empty journey starts at the entry
    nodes. Order follows the journey; entry nodes are lexicographic."""
    if not journey.steps:
        return entry_nodes(graph)
    visited = {s.node_id for s in journey.steps}
    frontier = []
    for step in journey.steps:
        for edge in successors(graph, step.node_id):
            target = graph.node(edge.target)
            if target.id not in visited or target.repeatable:
                frontier.append(step.node_id)
                break
    return frontier


def next_steps(
    graph: CareGraph,
    snapshot: PatientSnapshot,
    journey: Journey,
    world: World = World.OPEN,
) -> list[Recommendation]:
    """One recommendation per frontier edge whose condition is not NOT_MET.

    UNKNOWN conditions are included so missing data is surfaced rather than
    hidden; non-repeatable already-visited targets are excluded. Ranking is
    MET before UNKNOWN, then edge document order, then node id; ranks run
    1..N with no gaps.
    """
    edge_index = {id(edge): i for i, edge in enumerate(graph.edges)}
    visited = {s.node_id for s in journey.steps}
    candidates = []
    for node_id in current_frontier(journey, graph):
        for edge in successors(graph, node_id):
            target = graph.node(edge.target)
            if target.id in visited and not target.repeatable:
                continue
            if edge.condition is None:
                verdict, trace = Verdict.MET, None
            else:
                verdict, trace = evaluate(edge.condition, snapshot, world)
            if verdict is Verdict.NOT_MET:
                continue
            candidates.append(
                Recommendation(
                    node_id=target.id,
                    via_edge=f"{edge.source}->{edge.target}",
                    edge_index=edge_index[id(edge)],
                    condition_verdict=verdict,
                    condition_trace=trace,
                    rank=0,
                    note="" if verdict is Verdict.MET else "condition unknown: data missing",
                )
            )
    candidates.sort(
        key=lambda r: (
            0 if r.condition_verdict is Verdict.MET else 1,
            r.edge_index,
            r.node_id,
        )
    )
    return [replace(rec, rank=i + 1) for i, rec in enumerate(candidates)]


def _intervention_code(graph: CareGraph, node_id: str) -> Optional[str]:
    codes = graph.node(node_id).codes
    return codes[0] if codes else None


def annotate_with_necessity(
    recs: Sequence[Recommendation],
    caller,
    graph: CareGraph,
    payer: str,
    snapshot: PatientSnapshot,
    world: World = World.OPEN,
) -> list[Recommendation]:
    """Attach approval determinations via one simulate_batch delegation.

    ``caller`` exposes call(recipient, function, payload) through the
    orchestrator. Re-ranks APPROVED before INSUFFICIENT_INFORMATION before
    DENIED before no-determination, breaking ties by the incoming rank, so
    re-annotating an already annotated list is a no-op. If the delegation
    itself fails every recommendation is kept, annotated unavailable.
    """
    if not recs:
        return []
    codes = [_intervention_code(graph, rec.node_id) for rec in recs]
    try:
        results = caller.call(
            "necessity",
            "simulate_batch",
            {
                "payer": payer,
                "codes": [c for c in codes if c is not None],
                "snapshot": snapshot,
                "world": world,
            },
        )
    except TwinCallError as exc:
        return [
            replace(rec, determination=None, note=f"determination unavailable: {exc}")
            for rec in recs
        ]
    by_position = iter(results)
    annotated = []
    for rec, code in zip(recs, codes):
        if code is None:
            annotated.append(
                replace(rec, determination=None, note="no intervention code on node")
            )
            continue
        result = next(by_position)
        note = rec.note
        if isinstance(result, BatchError):
            note = f"determination unavailable: {result.error}"
        annotated.append(replace(rec, determination=result, note=note))
    annotated.sort(key=lambda r: (_status_order(r.determination), r.rank))
    return [replace(rec, rank=i + 1) for i, rec in enumerate(annotated)]


def _status_order(det: Optional[Union[Determination, BatchError]]) -> int:
    if isinstance(det, Determination):
        return _STATUS_ORDER[det.status]
    return _NO_DETERMINATION_ORDER


def detect_deviations(journey: Journey, graph: CareGraph) -> list[Deviation]:
    """Differences between the ideal path and what actually happened.

    off-path-event: an event mapping to no node. skipped-prerequisite: a
    matched non-entry node none of whose immediate predecessors was matched
    (some predecessor suffices, since branches are alternatives).
    out-of-order: an edge whose endpoints were both matched but with the
    source first matched after the target.
    """
    deviations = [
        Deviation(
            kind="off-path-event",
            subject=event_id,
            detail=f"event {event_id} matches no care-path node",
        )
        for event_id in journey.unmatched_event_ids
    ]
    matched_on = {s.node_id: s.first_date for s in journey.steps}
    entries = set(entry_nodes(graph))
    predecessors: dict[str, set[str]] = {}
    for edge in graph.edges:
        predecessors.setdefault(edge.target, set()).add(edge.source)
    for step in journey.steps:
        if step.node_id in entries:
            continue
        preds = predecessors.get(step.node_id)
        if not preds:  # unreachable from anywhere; nothing was skippable
            continue
        if not any(p in matched_on for p in preds):
            deviations.append(
                Deviation(
                    kind="skipped-prerequisite",
                    subject=step.node_id,
                    detail=(
                        f"{step.node_id} reached without any of its "
                        f"prerequisites ({', '.join(sorted(preds))})"
                    ),
                )
            )
    for edge in graph.edges:
        source_date = matched_on.get(edge.source)
        target_date = matched_on.get(edge.target)
        if source_date is not None and target_date is not None and source_date > target_date:
            deviations.append(
                Deviation(
                    kind="out-of-order",
                    subject=edge.target,
                    detail=(
                        f"{edge.target} ({target_date.isoformat()}) preceded its "
                        f"prerequisite {edge.source} ({source_date.isoformat()})"
                    ),
                )
            )
    return deviations


# ---------------------------------------------------------------------------
# Export documents
# ---------------------------------------------------------------------------

def recommendation_to_doc(rec: Recommendation) -> dict:
    doc = {
        "node_id": rec.node_id,
        "via_edge": rec.via_edge,
        "condition_verdict": rec.condition_verdict.value,
        "condition_trace": None if rec.condition_trace is None else trace_to_doc(rec.condition_trace),
        "rank": rec.rank,
        "determination": None if rec.determination is None else determination_to_doc(rec.determination),
    }
    if rec.note:
        doc["note"] = rec.note
    return doc


def deviation_to_doc(dev: Deviation) -> dict:
    return {"kind": dev.kind, "subject": dev.subject, "detail": dev.detail}
