"""Medical-necessity determinations, batch simulation, and CPT selection."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

from .errors import (
    AmbiguousCodeMatch,
    NoCodeMatch,
    NoGuidelineFound,
    ParseError,
)
from .guidelines import GuidelineRegistry
from .patient import PatientSnapshot
from .rules import RuleTrace, Verdict, World, evaluate, explain, trace_to_doc


class Status(enum.Enum):
    APPROVED = "APPROVED"
    DENIED = "DENIED"
    INSUFFICIENT_INFORMATION = "INSUFFICIENT_INFORMATION"


_STATUS_BY_VERDICT = {
    Verdict.MET: Status.APPROVED,
    Verdict.NOT_MET: Status.DENIED,
    Verdict.UNKNOWN: Status.INSUFFICIENT_INFORMATION,
}


@dataclass(frozen=True)
class Determination:
    """Approval verdict for one intervention, with the full evaluation trace,
    the codes whose absence kept atoms UNKNOWN, and reasoning lines."""

    code: str
    payer: str
    guideline_id: str
    status: Status
    trace: RuleTrace
    missing_codes: tuple[str, ...]
    reasoning: tuple[str, ...]


@dataclass(frozen=True)
class BatchError:
    """Per-item failure inside a batch simulation; never aborts the batch."""

    code: str
    payer: str
    error: str


BatchResult = Union[Determination, BatchError]


def determine(
    registry: GuidelineRegistry,
    payer: str,
    code: str,
    snapshot: PatientSnapshot,
    world: World = World.OPEN,
) -> Determination:
    """Evaluate the governing guideline for (payer, code) over a snapshot.

    Status maps one-to-one onto the trace root verdict: MET is APPROVED,
    NOT_MET is DENIED, UNKNOWN is INSUFFICIENT_INFORMATION.
    """
    guideline = registry.lookup(payer, code)
    verdict, trace = evaluate(guideline.rule, snapshot, world)
    status = _STATUS_BY_VERDICT[verdict]
    reasoning = [
        f"applying guideline {guideline.id} ({guideline.title}) "
        f"for {code}, payer {payer}, world {world.value}",
    ]
    reasoning.extend(f"| {line}" for line in guideline.source_text.splitlines() if line)
    reasoning.extend(explain(trace))
    reasoning.append(f"status: {status.value}")
    return Determination(
        code=code,
        payer=payer,
        guideline_id=guideline.id,
        status=status,
        trace=trace,
        missing_codes=trace.unknown_missing_codes(),
        reasoning=tuple(reasoning),
    )


def simulate_batch(
    registry: GuidelineRegistry,
    payer: str,
    codes: Sequence[str],
    snapshot: PatientSnapshot,
    world: World = World.OPEN,
) -> list[BatchResult]:
    """One determination per code, input order preserved; codes with no
    guideline become embedded error entries instead of aborting."""
    results: list[BatchResult] = []
    for code in codes:
        try:
            results.append(determine(registry, payer, code, snapshot, world))
        except NoGuidelineFound as exc:
            results.append(BatchError(code=code, payer=payer, error=str(exc)))
    return results


def determination_to_doc(det: BatchResult) -> dict:
    if isinstance(det, BatchError):
        return {"code": det.code, "payer": det.payer, "error": det.error}
    return {
        "code": det.code,
        "payer": det.payer,
        "guideline_id": det.guideline_id,
        "status": det.status.value,
        "missing_codes": list(det.missing_codes),
        "reasoning": list(det.reasoning),
        "trace": trace_to_doc(det.trace),
    }


# ---------------------------------------------------------------------------
# Procedure code selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcedureSpec:
    modality: str
    body_sites: frozenset[str] = frozenset()
    attributes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.modality:
            raise ValueError("modality must be non-empty")

    @classmethod
    def of(cls, modality: str, body_sites=(), attributes: Optional[Mapping] = None):
        attrs = tuple(sorted((str(k), _norm(v)) for k, v in (attributes or {}).items()))
        return cls(modality=modality, body_sites=frozenset(body_sites), attributes=attrs)


def _norm(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


@dataclass(frozen=True)
class CodeMapRow:
    modality: str
    body_sites: frozenset[str]
    attributes: tuple[tuple[str, str], ...]
    code: str


class CodeMap:
    """Rows mapping (modality, body sites, attributes) to a billing code."""

    def __init__(self, rows: Sequence[CodeMapRow]):
        self.rows = tuple(rows)

    def matches(self, spec: ProcedureSpec) -> list[CodeMapRow]:
        wanted = dict(spec.attributes)
        hits = []
        for row in self.rows:
            if row.modality.lower() != spec.modality.lower():
                continue
            if row.body_sites != spec.body_sites:
                continue
            # Every attribute the row discriminates on must be present and
            # equal; extra attributes on the spec are ignored.
            if any(wanted.get(k) != v for k, v in row.attributes):
                continue
            hits.append(row)
        return hits


def load_code_map(document: Union[str, Mapping]) -> CodeMap:
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    else:
        doc = document
    if not isinstance(doc, dict) or not isinstance(doc.get("rows"), list):
        raise ParseError("code map document must contain a rows list")
    rows = []
    for i, row_doc in enumerate(doc["rows"]):
        where = f"rows[{i}]"
        if not isinstance(row_doc, dict):
            raise ParseError(f"{where}: expected an object")
        modality = row_doc.get("modality")
        code = row_doc.get("code")
        if not isinstance(modality, str) or not modality:
            raise ParseError(f"{where}: missing modality")
        if not isinstance(code, str) or not code:
            raise ParseError(f"{where}: missing code")
        attrs = row_doc.get("attributes", {})
        if not isinstance(attrs, dict):
            raise ParseError(f"{where}: attributes must be an object")
        rows.append(
            CodeMapRow(
                modality=modality,
                body_sites=frozenset(row_doc.get("body_sites", [])),
                attributes=tuple(sorted((str(k), _norm(v)) for k, v in attrs.items())),
                code=code,
            )
        )
    return CodeMap(rows)


def select_cpt(spec: ProcedureSpec, table: CodeMap) -> str:
    """The unique code for a procedure spec; raises on zero or multiple hits."""
    hits = table.matches(spec)
    if not hits:
        raise NoCodeMatch(f"no code-map row matches {spec.modality} {sorted(spec.body_sites)}")
    if len(hits) > 1:
        raise AmbiguousCodeMatch(
            f"{len(hits)} rows match {spec.modality} {sorted(spec.body_sites)}: "
            + ", ".join(sorted(r.code for r in hits))
        )
    return hits[0].code
