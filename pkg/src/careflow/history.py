"""Clinical-history reconstruction: timelines, inferred links, care gaps,
and mapping a patient's events onto care-graph steps."""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import Optional

from .graph import CareGraph, successors, topological_order
from .patient import ClinicalEvent, PatientRecord, PatientSnapshot, event_to_doc
from .rules import Verdict, evaluate

FULFILL_WINDOW_DAYS = 90
TREAT_WINDOW_DAYS = 180
DEFAULT_WINDOW_DAYS = 30


@dataclass(frozen=True)
class TimelineLink:
    relation: str
    source: str  # event id the relation points from
    target: str  # event id it points to
    inferred: bool = False


@dataclass(frozen=True)
class Timeline:
    """Events in (date, id) order plus explicit and inferred links.

    Annotations are human-readable notes keyed by event id (currently the
    fulfillment and treatment links restated from the order's side).
    """

    record_id: str
    events: tuple[ClinicalEvent, ...]
    links: tuple[TimelineLink, ...]
    annotations: tuple[tuple[str, tuple[str, ...]], ...] = ()


@dataclass(frozen=True)
class GapFinding:
    """A detected lapse: an order with no result, or a due step not taken."""

    kind: str  # "unfulfilled-order" | "overdue-step"
    subject: str  # event id or node id
    window_days: int
    observed_delay_days: int
    as_of: datetime.date
    detail: str


@dataclass(frozen=True)
class JourneyStep:
    node_id: str
    event_ids: tuple[str, ...]
    first_date: datetime.date


@dataclass(frozen=True)
class Journey:
    steps: tuple[JourneyStep, ...]
    unmatched_event_ids: tuple[str, ...]


def build_timeline(record: PatientRecord) -> Timeline:
    """Sort the record's events by (date, id) and attach all links."""
    events = tuple(sorted(record.events, key=lambda e: (e.date, e.id)))
    links: list[TimelineLink] = []
    for event in events:
        for link in event.links:
            links.append(TimelineLink(link.relation, event.id, link.target, inferred=False))
    links.extend(link_events(record))
    by_id = {e.id: e for e in events}
    notes: dict[str, list[str]] = {}
    for link in links:
        if link.relation not in ("fulfills", "treats"):
            continue
        source = by_id[link.source]
        tag = " (inferred)" if link.inferred else ""
        verb = "fulfilled" if link.relation == "fulfills" else "treated"
        notes.setdefault(link.target, []).append(
            f"{verb} by {source.id} on {source.date.isoformat()}{tag}"
        )
    annotations = tuple((eid, tuple(notes[eid])) for eid in sorted(notes))
    return Timeline(record_id=record.id, events=events, links=tuple(links), annotations=annotations)


def link_events(record: PatientRecord) -> list[TimelineLink]:
    """Links the record implies but never states.

    An order with no explicit fulfills link pointing at it matches the
    earliest result or imaging event with the same code dated within 90 days
    on or after the order. A diagnosis-coded event with no explicit treats
    link pointing at it matches the earliest treatment-start within 180 days
    on or after it. Date ties break by event id.
    """
    events = sorted(record.events, key=lambda e: (e.date, e.id))
    explicit_fulfilled = set()
    explicit_treated = set()
    for event in events:
        for link in event.links:
            if link.relation == "fulfills":
                explicit_fulfilled.add(link.target)
            elif link.relation == "treats":
                explicit_treated.add(link.target)
    inferred: list[TimelineLink] = []
    for order in events:
        if order.kind != "order" or order.id in explicit_fulfilled:
            continue
        horizon = order.date + datetime.timedelta(days=FULFILL_WINDOW_DAYS)
        hit = next(
            (
                e
                for e in events
                if e.kind in ("result", "imaging")
                and e.code == order.code
                and order.date <= e.date <= horizon
            ),
            None,
        )
        if hit is not None:
            inferred.append(TimelineLink("fulfills", hit.id, order.id, inferred=True))
    for dx in events:
        if not dx.code.startswith("dx:") or dx.id in explicit_treated:
            continue
        horizon = dx.date + datetime.timedelta(days=TREAT_WINDOW_DAYS)
        hit = next(
            (
                e
                for e in events
                if e.kind == "treatment-start" and dx.date <= e.date <= horizon
            ),
            None,
        )
        if hit is not None:
            inferred.append(TimelineLink("treats", hit.id, dx.id, inferred=True))
    return inferred


def _match_events(
    events: tuple[ClinicalEvent, ...], graph: CareGraph
) -> tuple[list[JourneyStep], list[str]]:
    """Group events by the graph node sharing their code; a code on several
    nodes goes to the earliest node in topological-then-lexicographic order."""
    topo = topological_order(graph)
    rank = {node_id: i for i, node_id in enumerate(topo)}
    node_for_code: dict[str, str] = {}
    for node_id in topo:
        for code in graph.node(node_id).codes:
            node_for_code.setdefault(code, node_id)
    matched: dict[str, list[ClinicalEvent]] = {}
    unmatched: list[str] = []
    for event in sorted(events, key=lambda e: (e.date, e.id)):
        node_id = node_for_code.get(event.code)
        if node_id is None:
            unmatched.append(event.id)
        else:
            matched.setdefault(node_id, []).append(event)
    steps = [
        JourneyStep(
            node_id=node_id,
            event_ids=tuple(e.id for e in evs),
            first_date=min(e.date for e in evs),
        )
        for node_id, evs in matched.items()
    ]
    steps.sort(key=lambda s: (s.first_date, rank[s.node_id], s.node_id))
    return steps, unmatched


def journey_of(record: PatientRecord, graph: CareGraph) -> Journey:
    """Project the record's events onto graph nodes by shared codes.

    Steps come out ordered by first matched date, then topological rank,
    then node id; unmatched events keep timeline order.
    """
    timeline = build_timeline(record)
    steps, unmatched = _match_events(timeline.events, graph)
    return Journey(steps=tuple(steps), unmatched_event_ids=tuple(unmatched))


def detect_gaps(
    timeline: Timeline,
    graph: CareGraph,
    as_of: datetime.date,
    snapshot: Optional[PatientSnapshot] = None,
) -> list[GapFinding]:
    """Unfulfilled orders and overdue successor steps as of a date.

    An order is unfulfilled when no fulfilling result arrived by as_of inside
    its window; the window comes from a graph node carrying the order's code
    (expected_window_days) or defaults to 30 days. A successor step is
    overdue when a matched node has an edge to it whose condition holds
    (ALWAYS, or MET against ``snapshot`` when one is supplied), it was never
    matched itself, and its window has passed since the predecessor was first
    matched. Only the earliest-matched predecessor reports a given step.
    """
    events = tuple(e for e in timeline.events if e.date <= as_of)
    by_id = {e.id: e for e in events}
    fulfilled_by: dict[str, ClinicalEvent] = {}
    for link in timeline.links:
        if link.relation != "fulfills":
            continue
        source = by_id.get(link.source)
        if source is None:  # result lies beyond as_of
            continue
        current = fulfilled_by.get(link.target)
        if current is None or (source.date, source.id) < (current.date, current.id):
            fulfilled_by[link.target] = source

    node_for_code: dict[str, str] = {}
    for node_id in topological_order(graph):
        for code in graph.node(node_id).codes:
            node_for_code.setdefault(code, node_id)

    findings: list[GapFinding] = []
    for order in events:
        if order.kind != "order" or order.id in fulfilled_by:
            continue
        window = DEFAULT_WINDOW_DAYS
        node_id = node_for_code.get(order.code)
        if node_id is not None and graph.node(node_id).expected_window_days is not None:
            window = graph.node(node_id).expected_window_days
        delay = (as_of - order.date).days - window
        if delay > 0:
            findings.append(
                GapFinding(
                    kind="unfulfilled-order",
                    subject=order.id,
                    window_days=window,
                    observed_delay_days=delay,
                    as_of=as_of,
                    detail=f"order {order.id} ({order.code}) has no result within {window} days",
                )
            )

    steps, _ = _match_events(events, graph)
    matched_ids = {s.node_id for s in steps}
    reported: set[str] = set()
    for step in steps:  # already ordered earliest-first
        for edge in successors(graph, step.node_id):
            target = edge.target
            if target in matched_ids or target in reported:
                continue
            if edge.condition is not None:
                if snapshot is None:
                    continue
                verdict, _trace = evaluate(edge.condition, snapshot)
                if verdict is not Verdict.MET:
                    continue
            window = graph.node(target).expected_window_days
            if window is None:
                window = DEFAULT_WINDOW_DAYS
            delay = (as_of - step.first_date).days - window
            if delay > 0:
                reported.add(target)
                findings.append(
                    GapFinding(
                        kind="overdue-step",
                        subject=target,
                        window_days=window,
                        observed_delay_days=delay,
                        as_of=as_of,
                        detail=(
                            f"step {target} due within {window} days of {step.node_id} "
                            f"(first matched {step.first_date.isoformat()})"
                        ),
                    )
                )
    return findings


# ---------------------------------------------------------------------------
# Export documents
# ---------------------------------------------------------------------------

def gap_to_doc(gap: GapFinding) -> dict:
    return {
        "kind": gap.kind,
        "subject": gap.subject,
        "window_days": gap.window_days,
        "observed_delay_days": gap.observed_delay_days,
        "as_of": gap.as_of.isoformat(),
        "detail": gap.detail,
    }


def timeline_export(timeline: Timeline, gaps: list[GapFinding]) -> dict:
    """The {events, links, gaps} document consumed by the console and CLI."""
    notes = dict(timeline.annotations)
    events = []
    for event in timeline.events:
        doc = event_to_doc(event)
        if event.id in notes:
            doc["annotations"] = list(notes[event.id])
        events.append(doc)
    return {
        "record_id": timeline.record_id,
        "events": events,
        "links": [
            {
                "relation": l.relation,
                "from": l.source,
                "to": l.target,
                "inferred": l.inferred,
            }
            for l in timeline.links
        ],
        "gaps": [gap_to_doc(g) for g in gaps],
    }


def journey_to_doc(journey: Journey) -> dict:
    return {
        "steps": [
            {
                "node_id": s.node_id,
                "event_ids": list(s.event_ids),
                "first_date": s.first_date.isoformat(),
            }
            for s in journey.steps
        ],
        "unmatched_event_ids": list(journey.unmatched_event_ids),
    }
