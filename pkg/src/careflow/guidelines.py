"""Guideline records and the payer/NCCN registry with fallback lookup."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Union

from .codes import is_code, namespace_of
from .dsl import parse_rule, print_rule
from .errors import NoGuidelineFound, ParseError, StructuralError
from .rules import Rule

NCCN = "nccn"


@dataclass(frozen=True)
class Guideline:
    """A payer or NCCN checklist compiled to a rule tree.

    ``intervention_codes`` name the codes this guideline gates; an entry of
    the form ``<namespace>:*`` registers the guideline for the whole code
    class. ``source_text`` keeps the verbatim checklist wording for display.
    """

    id: str
    payer: str
    title: str
    intervention_codes: tuple[str, ...]
    rule: Rule
    source_text: str

    def __post_init__(self):
        if not self.intervention_codes:
            raise ValueError(f"guideline {self.id!r} has no intervention codes")


class GuidelineRegistry:
    """Guidelines indexed by (payer, code), with class and NCCN fallbacks."""

    def __init__(self, guidelines: list[Guideline]):
        self._by_id: dict[str, Guideline] = {}
        self._exact: dict[tuple[str, str], Guideline] = {}
        self._by_class: dict[tuple[str, str], Guideline] = {}
        for g in guidelines:
            if g.id in self._by_id:
                raise StructuralError(f"duplicate guideline id {g.id!r}")
            self._by_id[g.id] = g
            for code in g.intervention_codes:
                if code.endswith(":*"):
                    key = (g.payer, code[:-2])
                    index = self._by_class
                else:
                    key = (g.payer, code)
                    index = self._exact
                if key in index:
                    raise StructuralError(
                        f"guidelines {index[key].id!r} and {g.id!r} both claim "
                        f"payer={key[0]!r} code={key[1]!r}"
                    )
                index[key] = g

    def __len__(self) -> int:
        return len(self._by_id)

    def ids(self) -> list[str]:
        return sorted(self._by_id)

    def has(self, guideline_id: str) -> bool:
        return guideline_id in self._by_id

    def get(self, guideline_id: str) -> Guideline:
        return self._by_id[guideline_id]

    def lookup(self, payer: str, code: str) -> Guideline:
        """Most specific match wins: (payer, code), then (payer, code class),
        then (nccn, code). Raises NoGuidelineFound otherwise."""
        hit = self._exact.get((payer, code))
        if hit is not None:
            return hit
        hit = self._by_class.get((payer, namespace_of(code)))
        if hit is not None:
            return hit
        hit = self._exact.get((NCCN, code))
        if hit is not None:
            return hit
        raise NoGuidelineFound(payer, code)


def _parse_guideline(doc, index: int) -> Guideline:
    where = f"guidelines[{index}]"
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object")
    for field in ("id", "payer", "title", "rule"):
        if not isinstance(doc.get(field), str) or not doc[field]:
            raise ParseError(f"{where}: missing or bad {field}")
    codes = doc.get("intervention_codes")
    if not isinstance(codes, list) or not codes:
        raise ParseError(f"{where}: intervention_codes must be a non-empty list")
    for code in codes:
        if not isinstance(code, str) or not (
            is_code(code) or (code.endswith(":*") and len(code) > 2)
        ):
            raise ParseError(f"{where}: bad intervention code {code!r}")
    try:
        rule = parse_rule(doc["rule"])
    except ParseError as exc:
        raise ParseError(f"{where}: {exc.message}", exc.line, exc.column) from None
    return Guideline(
        id=doc["id"],
        payer=doc["payer"],
        title=doc["title"],
        intervention_codes=tuple(codes),
        rule=rule,
        source_text=doc.get("source_text", ""),
    )


def load_registry(document: Union[str, Mapping]) -> GuidelineRegistry:
    """Load a guideline registry from JSON text or a parsed object."""
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    else:
        doc = document
    if not isinstance(doc, dict) or not isinstance(doc.get("guidelines"), list):
        raise ParseError("registry document must contain a guidelines list")
    guidelines = [_parse_guideline(g, i) for i, g in enumerate(doc["guidelines"])]
    return GuidelineRegistry(guidelines)


def guideline_to_doc(g: Guideline) -> dict:
    return {
        "id": g.id,
        "payer": g.payer,
        "title": g.title,
        "intervention_codes": list(g.intervention_codes),
        "rule": print_rule(g.rule),
        "source_text": g.source_text,
    }
