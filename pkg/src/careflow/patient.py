"""Patient records: coded facts, timestamped clinical events, and snapshots.

Records are immutable values; ``apply_event`` returns a new record. Dates are
calendar dates only (ISO ``YYYY-MM-DD``), which keeps snapshotting and replay
deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import date
from typing import Mapping, Optional, Sequence, Union

from .codes import is_code
from .errors import ExtractionError, ParseError, StructuralError

EVENT_KINDS = (
    "symptom-onset",
    "encounter",
    "order",
    "result",
    "imaging",
    "treatment-start",
    "treatment-end",
)
LINK_RELATIONS = ("fulfills", "follows-from", "treats")

Value = Union[int, float, str, None]


@dataclass(frozen=True)
class ClinicalFact:
    """A coded assertion about the patient, effective from a calendar date.

    Provenance is one of ``asserted``, ``derived-from-event:<event id>``, or
    ``extracted:<note id>``.
    """

    code: str
    effective_date: date
    value: Value = None
    provenance: str = "asserted"


@dataclass(frozen=True)
class EventLink:
    relation: str
    target: str


@dataclass(frozen=True)
class ClinicalEvent:
    id: str
    kind: str
    code: str
    date: date
    value: Value = None
    links: tuple[EventLink, ...] = ()
    attributes: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class PatientRecord:
    id: str
    demographics: tuple[tuple[str, str], ...]
    payer_id: str
    facts: tuple[ClinicalFact, ...] = ()
    events: tuple[ClinicalEvent, ...] = ()

    def demographics_map(self) -> dict[str, str]:
        return dict(self.demographics)

    def event_ids(self) -> set[str]:
        return {e.id for e in self.events}

    def latest_data_date(self) -> Optional[date]:
        """Most recent date carried by any fact or event, None when empty."""
        dates = [f.effective_date for f in self.facts] + [e.date for e in self.events]
        return max(dates) if dates else None


@dataclass(frozen=True)
class PatientSnapshot:
    """Point-in-time view: effective facts (latest per code), demographics,
    and events dated at or before ``as_of``. Contains no later data."""

    record_id: str
    as_of: date
    demographics: Mapping[str, str]
    facts: tuple[ClinicalFact, ...]
    events: tuple[ClinicalEvent, ...]

    def effective_fact(self, code: str) -> Optional[ClinicalFact]:
        for fact in self.facts:
            if fact.code == code:
                return fact
        return None


# ---------------------------------------------------------------------------
# Loading and saving
# ---------------------------------------------------------------------------

def _parse_date(raw, where: str) -> date:
    if not isinstance(raw, str):
        raise ParseError(f"{where}: date must be a YYYY-MM-DD string")
    try:
        return date.fromisoformat(raw)
    except ValueError:
        raise ParseError(f"{where}: invalid date {raw!r}") from None


def _require_code(raw, where: str) -> str:
    if not isinstance(raw, str) or not is_code(raw):
        raise ParseError(f"{where}: malformed code {raw!r}")
    return raw


def _parse_provenance(raw, where: str) -> str:
    if raw is None:
        return "asserted"
    if not isinstance(raw, str):
        raise ParseError(f"{where}: bad provenance {raw!r}")
    if raw == "asserted" or raw.startswith("derived-from-event:") or raw.startswith("extracted:"):
        return raw
    raise ParseError(f"{where}: bad provenance {raw!r}")


def _parse_fact(doc, index: int) -> ClinicalFact:
    where = f"facts[{index}]"
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object")
    return ClinicalFact(
        code=_require_code(doc.get("code"), where),
        effective_date=_parse_date(doc.get("effective_date"), where),
        value=doc.get("value"),
        provenance=_parse_provenance(doc.get("provenance"), where),
    )


def parse_event(doc, where: str = "event") -> ClinicalEvent:
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object")
    kind = doc.get("kind")
    if kind not in EVENT_KINDS:
        raise ParseError(f"{where}: unknown event kind {kind!r}")
    event_id = doc.get("id")
    if not isinstance(event_id, str) or not event_id:
        raise ParseError(f"{where}: missing event id")
    links = []
    for link_doc in doc.get("links", []):
        if (
            not isinstance(link_doc, dict)
            or link_doc.get("relation") not in LINK_RELATIONS
            or not isinstance(link_doc.get("target"), str)
        ):
            raise ParseError(f"{where}: bad link {link_doc!r}")
        links.append(EventLink(link_doc["relation"], link_doc["target"]))
    attributes = doc.get("attributes", {})
    if not isinstance(attributes, dict):
        raise ParseError(f"{where}: attributes must be an object")
    return ClinicalEvent(
        id=event_id,
        kind=kind,
        code=_require_code(doc.get("code"), where),
        date=_parse_date(doc.get("date"), where),
        value=doc.get("value"),
        links=tuple(links),
        attributes=tuple(sorted((str(k), str(v)) for k, v in attributes.items())),
    )


def _check_links(events: Sequence[ClinicalEvent]) -> None:
    by_id: dict[str, ClinicalEvent] = {}
    for ev in events:
        if ev.id in by_id:
            raise StructuralError(f"duplicate event id {ev.id!r}")
        by_id[ev.id] = ev
    for ev in events:
        for link in ev.links:
            target = by_id.get(link.target)
            if target is None:
                raise StructuralError(
                    f"event {ev.id!r} links to missing event {link.target!r}"
                )
            if link.relation == "fulfills":
                if ev.kind not in ("result", "imaging") or target.kind != "order":
                    raise StructuralError(
                        f"fulfills link {ev.id!r} -> {link.target!r} must run "
                        "from a result/imaging event to an order"
                    )
                if ev.code != target.code:
                    raise StructuralError(
                        f"fulfills link {ev.id!r} -> {link.target!r} has "
                        f"mismatched codes {ev.code!r} vs {target.code!r}"
                    )


def load_record(document: Union[str, Mapping]) -> PatientRecord:
    """Load and validate a patient record from JSON text or a parsed object."""
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ParseError("patient document must be an object")
    record_id = doc.get("id")
    if not isinstance(record_id, str) or not record_id:
        raise ParseError("patient document missing id")
    payer_id = doc.get("payer_id")
    if not isinstance(payer_id, str) or not payer_id:
        raise ParseError("patient document missing payer_id")
    demographics = doc.get("demographics", {})
    if not isinstance(demographics, dict):
        raise ParseError("demographics must be an object")
    facts = tuple(_parse_fact(f, i) for i, f in enumerate(doc.get("facts", [])))
    events = tuple(
        parse_event(e, f"events[{i}]") for i, e in enumerate(doc.get("events", []))
    )
    _check_links(events)
    return PatientRecord(
        id=record_id,
        demographics=tuple((str(k), str(v)) for k, v in demographics.items()),
        payer_id=payer_id,
        facts=facts,
        events=events,
    )


def fact_to_doc(fact: ClinicalFact) -> dict:
    doc: dict = {"code": fact.code, "effective_date": fact.effective_date.isoformat()}
    if fact.value is not None:
        doc["value"] = fact.value
    doc["provenance"] = fact.provenance
    return doc


def event_to_doc(event: ClinicalEvent) -> dict:
    doc: dict = {
        "id": event.id,
        "kind": event.kind,
        "code": event.code,
        "date": event.date.isoformat(),
    }
    if event.value is not None:
        doc["value"] = event.value
    if event.links:
        doc["links"] = [{"relation": l.relation, "target": l.target} for l in event.links]
    if event.attributes:
        doc["attributes"] = {k: v for k, v in event.attributes}
    return doc


def record_to_doc(record: PatientRecord) -> dict:
    return {
        "id": record.id,
        "demographics": {k: v for k, v in record.demographics},
        "payer_id": record.payer_id,
        "facts": [fact_to_doc(f) for f in record.facts],
        "events": [event_to_doc(e) for e in record.events],
    }


# ---------------------------------------------------------------------------
# Snapshots and event application
# ---------------------------------------------------------------------------

def snapshot_at(record: PatientRecord, as_of: date) -> PatientSnapshot:
    """Point-in-time snapshot: latest fact per code with effective_date at or
    before ``as_of``; ties on date resolve to the later list entry."""
    effective: dict[str, ClinicalFact] = {}
    for fact in record.facts:
        if fact.effective_date > as_of:
            continue
        current = effective.get(fact.code)
        if current is None or fact.effective_date >= current.effective_date:
            effective[fact.code] = fact
    events = tuple(
        sorted((e for e in record.events if e.date <= as_of), key=lambda e: (e.date, e.id))
    )
    return PatientSnapshot(
        record_id=record.id,
        as_of=as_of,
        demographics=record.demographics_map(),
        facts=tuple(effective[c] for c in sorted(effective)),
        events=events,
    )


def truncate_record(record: PatientRecord, as_of: date) -> PatientRecord:
    """The record as it stood at ``as_of``: later facts and events dropped."""
    return replace(
        record,
        facts=tuple(f for f in record.facts if f.effective_date <= as_of),
        events=tuple(e for e in record.events if e.date <= as_of),
    )


def apply_event(record: PatientRecord, event: ClinicalEvent) -> PatientRecord:
    """Append an event, deriving a fact when a result carries a value."""
    if event.id in record.event_ids():
        raise StructuralError(f"duplicate event id {event.id!r}")
    _check_links(record.events + (event,))
    facts = record.facts
    if event.kind == "result" and event.value is not None:
        facts = facts + (
            ClinicalFact(
                code=event.code,
                effective_date=event.date,
                value=event.value,
                provenance=f"derived-from-event:{event.id}",
            ),
        )
    return replace(record, events=record.events + (event,), facts=facts)


# ---------------------------------------------------------------------------
# Free-text extraction gateway
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Note:
    id: str
    date: date
    text: str


class KeywordGateway:
    """Deterministic keyword-to-code extraction table.

    Stands in for model-based extraction behind the same interface; the table
    covers the ovarian presenting-symptom vocabulary.
    """

    TABLE: tuple[tuple[str, str], ...] = (
        ("bloating", "sx:bloating"),
        ("pelvic pain", "sx:pelvic-pain"),
        ("abdominal pain", "sx:pelvic-pain"),
        ("early satiety", "sx:early-satiety"),
        ("feeling full", "sx:early-satiety"),
        ("difficulty eating", "sx:early-satiety"),
        ("urinary", "sx:urinary"),
        ("ascites", "sx:ascites"),
        ("pelvic mass", "exam:pelvic-mass"),
        ("abdominal mass", "exam:pelvic-mass"),
    )

    def extract(self, note: Note) -> list[str]:
        """Codes whose keyword appears in the note, sorted and deduped."""
        lowered = note.text.lower()
        hits = {code for phrase, code in self.TABLE if phrase in lowered}
        return sorted(hits)


DEFAULT_GATEWAY = KeywordGateway()


def extract_facts(note: Note, gateway=None) -> list[ClinicalFact]:
    """Run the extraction gateway over a note, yielding extracted facts."""
    gateway = gateway if gateway is not None else DEFAULT_GATEWAY
    try:
        codes = gateway.extract(note)
    except Exception as exc:
        raise ExtractionError(note.id, str(exc)) from exc
    return [
        ClinicalFact(
            code=code,
            effective_date=note.date,
            provenance=f"extracted:{note.id}",
        )
        for code in codes
    ]
