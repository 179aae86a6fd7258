"""Guideline rule trees and their three-valued (Kleene) evaluation.

A rule is a tree of atoms combined with ANY / ALL / ATLEAST / NOT. Atoms are
code-based predicates over a patient snapshot. Evaluation is three-valued:
MET, NOT_MET, or UNKNOWN (missing data). Two world modes control how absent
data resolves: OPEN keeps it UNKNOWN, CLOSED collapses it to NOT_MET.

Evaluation is pure and deterministic; every call returns a trace tree that is
shape-isomorphic to the rule tree, so callers can render per-node reasoning.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Union


class Verdict(enum.Enum):
    MET = "MET"
    NOT_MET = "NOT_MET"
    UNKNOWN = "UNKNOWN"


class World(enum.Enum):
    """How missing data resolves: OPEN keeps UNKNOWN, CLOSED means NOT_MET."""

    OPEN = "open"
    CLOSED = "closed"


COMPARE_OPS = ("<", "<=", "=", ">=", ">", "!=")
_ORDERING_OPS = frozenset({"<", "<=", ">=", ">"})


# ---------------------------------------------------------------------------
# Rule tree nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HasFact:
    """Satisfied when the snapshot holds any effective fact with this code."""

    code: str


@dataclass(frozen=True)
class Compare:
    """Compare the effective fact value for ``code`` against a literal."""

    code: str
    op: str
    value: Union[int, float, str]

    def __post_init__(self):
        if self.op not in COMPARE_OPS:
            raise ValueError(f"bad comparison operator {self.op!r}")
        if self.op in _ORDERING_OPS and isinstance(self.value, str):
            raise ValueError(f"operator {self.op!r} requires a numeric literal")


@dataclass(frozen=True)
class Demo:
    """Match a demographics entry, e.g. menopause=post."""

    key: str
    value: str


@dataclass(frozen=True)
class HadEvent:
    """Satisfied when an event of the given kind and code occurred, optionally
    within ``within_days`` of the snapshot date."""

    kind: str
    code: str
    within_days: Union[int, None] = None

    def __post_init__(self):
        if self.within_days is not None and self.within_days < 0:
            raise ValueError("within_days must be >= 0")


@dataclass(frozen=True)
class AllOf:
    children: tuple["Rule", ...]

    def __post_init__(self):
        if len(self.children) < 1:
            raise ValueError("ALL requires at least one child")


@dataclass(frozen=True)
class AnyOf:
    children: tuple["Rule", ...]

    def __post_init__(self):
        if len(self.children) < 1:
            raise ValueError("ANY requires at least one child")


@dataclass(frozen=True)
class AtLeast:
    n: int
    children: tuple["Rule", ...]

    def __post_init__(self):
        if not 1 <= self.n <= len(self.children):
            raise ValueError(
                f"ATLEAST n={self.n} out of range for {len(self.children)} children"
            )


@dataclass(frozen=True)
class Not:
    child: "Rule"


Atom = Union[HasFact, Compare, Demo, HadEvent]
Rule = Union[HasFact, Compare, Demo, HadEvent, AllOf, AnyOf, AtLeast, Not]

ATOM_TYPES = (HasFact, Compare, Demo, HadEvent)


def is_atom(rule: Rule) -> bool:
    return isinstance(rule, ATOM_TYPES)


def iter_atoms(rule: Rule):
    """Yield every atom leaf in document order."""
    if is_atom(rule):
        yield rule
    elif isinstance(rule, Not):
        yield from iter_atoms(rule.child)
    else:
        for child in rule.children:
            yield from iter_atoms(child)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuleTrace:
    """Mirror of a rule tree with a verdict at every node.

    Atom nodes additionally carry the facts that satisfied them (``matched``),
    data that was present but contradicted them (``observed``), and codes for
    which no data existed (``missing``).
    """

    rule: Rule
    verdict: Verdict
    children: tuple["RuleTrace", ...] = ()
    matched: tuple[str, ...] = ()
    observed: tuple[str, ...] = ()
    missing: tuple[str, ...] = ()

    def node_count(self) -> int:
        return 1 + sum(c.node_count() for c in self.children)

    def unknown_missing_codes(self) -> tuple[str, ...]:
        """Codes of atoms that evaluated UNKNOWN, sorted and deduped."""
        out: set[str] = set()

        def walk(t: RuleTrace) -> None:
            if not t.children and t.verdict is Verdict.UNKNOWN:
                out.update(t.missing)
            for c in t.children:
                walk(c)

        walk(self)
        return tuple(sorted(out))


@dataclass(frozen=True)
class AtomOutcome:
    verdict: Verdict
    matched: tuple[str, ...] = ()
    observed: tuple[str, ...] = ()
    missing: tuple[str, ...] = ()


AtomEvaluator = Callable[[Atom], AtomOutcome]


# ---------------------------------------------------------------------------
# Kleene propagation
# ---------------------------------------------------------------------------

def kleene_not(v: Verdict) -> Verdict:
    if v is Verdict.MET:
        return Verdict.NOT_MET
    if v is Verdict.NOT_MET:
        return Verdict.MET
    return Verdict.UNKNOWN


def kleene_all(verdicts: list[Verdict]) -> Verdict:
    if any(v is Verdict.NOT_MET for v in verdicts):
        return Verdict.NOT_MET
    if any(v is Verdict.UNKNOWN for v in verdicts):
        return Verdict.UNKNOWN
    return Verdict.MET


def kleene_any(verdicts: list[Verdict]) -> Verdict:
    if any(v is Verdict.MET for v in verdicts):
        return Verdict.MET
    if any(v is Verdict.UNKNOWN for v in verdicts):
        return Verdict.UNKNOWN
    return Verdict.NOT_MET


def kleene_at_least(n: int, verdicts: list[Verdict]) -> Verdict:
    met = sum(1 for v in verdicts if v is Verdict.MET)
    unknown = sum(1 for v in verdicts if v is Verdict.UNKNOWN)
    if met >= n:
        return Verdict.MET
    if met + unknown < n:
        return Verdict.NOT_MET
    return Verdict.UNKNOWN


def evaluate_with(rule: Rule, atom_eval: AtomEvaluator) -> RuleTrace:
    """Propagate atom outcomes up the tree under strong Kleene semantics.

    This is the single propagation path used by :func:`evaluate`; tests drive
    it directly with synthetic atom assignments.
    """
    if is_atom(rule):
        out = atom_eval(rule)
        return RuleTrace(
            rule=rule,
            verdict=out.verdict,
            matched=out.matched,
            observed=out.observed,
            missing=out.missing,
        )
    if isinstance(rule, Not):
        child = evaluate_with(rule.child, atom_eval)
        return RuleTrace(rule=rule, verdict=kleene_not(child.verdict), children=(child,))
    children = tuple(evaluate_with(c, atom_eval) for c in rule.children)
    verdicts = [c.verdict for c in children]
    if isinstance(rule, AllOf):
        verdict = kleene_all(verdicts)
    elif isinstance(rule, AnyOf):
        verdict = kleene_any(verdicts)
    else:
        verdict = kleene_at_least(rule.n, verdicts)
    return RuleTrace(rule=rule, verdict=verdict, children=children)


# ---------------------------------------------------------------------------
# Atom evaluation against a snapshot
# ---------------------------------------------------------------------------
#
# The snapshot is duck-typed to avoid a dependency cycle with the patient
# model. It must provide: effective_fact(code) -> fact-or-None (fact exposes
# .value), a .demographics mapping, an .events sequence (each exposing .kind,
# .code, .date), and .as_of.

def _absent(code: str, world: World) -> AtomOutcome:
    verdict = Verdict.UNKNOWN if world is World.OPEN else Verdict.NOT_MET
    return AtomOutcome(verdict=verdict, missing=(code,))


def _fmt_value(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _compare_numbers(observed: float, op: str, literal: float) -> bool:
    if op == "<":
        return observed < literal
    if op == "<=":
        return observed <= literal
    if op == ">=":
        return observed >= literal
    if op == ">":
        return observed > literal
    if op == "=":
        return observed == literal
    return observed != literal


def _eval_atom_against(atom: Atom, snapshot, world: World) -> AtomOutcome:
    if isinstance(atom, HasFact):
        fact = snapshot.effective_fact(atom.code)
        if fact is None:
            return _absent(atom.code, world)
        label = atom.code if fact.value is None else f"{atom.code}={_fmt_value(fact.value)}"
        return AtomOutcome(Verdict.MET, matched=(label,))

    if isinstance(atom, Compare):
        fact = snapshot.effective_fact(atom.code)
        if fact is None or fact.value is None:
            return _absent(atom.code, world)
        observed = f"{atom.code}={_fmt_value(fact.value)}"
        if isinstance(atom.value, str) or isinstance(fact.value, str):
            # Label comparison: only equality is meaningful; ordering ops on a
            # non-numeric fact count as no usable data.
            if atom.op in _ORDERING_OPS:
                return _absent(atom.code, world)
            equal = _fmt_value(fact.value) == _fmt_value(atom.value)
            holds = equal if atom.op == "=" else not equal
        else:
            holds = _compare_numbers(float(fact.value), atom.op, float(atom.value))
        if holds:
            return AtomOutcome(Verdict.MET, matched=(observed,))
        return AtomOutcome(Verdict.NOT_MET, observed=(observed,))

    if isinstance(atom, Demo):
        pseudo = f"demo:{atom.key}"
        demographics = snapshot.demographics
        if atom.key not in demographics:
            return _absent(pseudo, world)
        actual = str(demographics[atom.key])
        if actual == atom.value:
            return AtomOutcome(Verdict.MET, matched=(f"{pseudo}={actual}",))
        return AtomOutcome(Verdict.NOT_MET, observed=(f"{pseudo}={actual}",))

    if isinstance(atom, HadEvent):
        hits = []
        for ev in snapshot.events:
            if ev.kind != atom.kind or ev.code != atom.code:
                continue
            if atom.within_days is not None:
                if (snapshot.as_of - ev.date).days > atom.within_days:
                    continue
            hits.append(ev)
        if not hits:
            return _absent(atom.code, world)
        first = min(hits, key=lambda e: (e.date, e.id))
        return AtomOutcome(
            Verdict.MET, matched=(f"{atom.code} ({atom.kind} on {first.date.isoformat()})",)
        )

    raise TypeError(f"not an atom: {atom!r}")


def evaluate(rule: Rule, snapshot, world: World = World.OPEN) -> tuple[Verdict, RuleTrace]:
    """Evaluate a rule tree against a patient snapshot.

    Returns the root verdict and the full trace. CLOSED-world evaluation never
    produces UNKNOWN at any node.
    """
    trace = evaluate_with(rule, lambda atom: _eval_atom_against(atom, snapshot, world))
    return trace.verdict, trace


# ---------------------------------------------------------------------------
# Human-readable reasoning
# ---------------------------------------------------------------------------

def _node_label(rule: Rule) -> str:
    # Late import: the printer depends on the node types defined above.
    from .dsl import print_rule

    if is_atom(rule):
        return print_rule(rule)
    if isinstance(rule, AllOf):
        return f"ALL of {len(rule.children)}"
    if isinstance(rule, AnyOf):
        return f"ANY of {len(rule.children)}"
    if isinstance(rule, AtLeast):
        return f"ATLEAST {rule.n} of {len(rule.children)}"
    return "NOT"


def explain(trace: RuleTrace) -> list[str]:
    """One depth-indented line per trace node, deterministic."""
    lines: list[str] = []

    def walk(t: RuleTrace, depth: int) -> None:
        prefix = "  " * depth + f"[{t.verdict.value}] " + _node_label(t.rule)
        notes = []
        if t.matched:
            notes.append("matched " + ", ".join(t.matched))
        if t.observed:
            notes.append("observed " + ", ".join(t.observed))
        if t.missing:
            notes.append("no data (" + ", ".join(t.missing) + ")")
        lines.append(prefix + (": " + "; ".join(notes) if notes else ""))
        for c in t.children:
            walk(c, depth + 1)

    walk(trace, 0)
    return lines


def trace_to_doc(trace: RuleTrace) -> dict:
    """JSON-ready view of a trace, used by the service and audit exports."""
    doc: dict = {"verdict": trace.verdict.value, "node": _node_label(trace.rule)}
    if trace.matched:
        doc["matched"] = list(trace.matched)
    if trace.observed:
        doc["observed"] = list(trace.observed)
    if trace.missing:
        doc["missing"] = list(trace.missing)
    if trace.children:
        doc["children"] = [trace_to_doc(c) for c in trace.children]
    return doc
