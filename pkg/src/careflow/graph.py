"""The care-path knowledge graph: typed nodes, condition-guarded edges.

Graphs are immutable after load. Cycles are permitted (monitoring loops), so
entry detection prefers explicit ``entry`` flags and falls back to zero
in-degree. All orderings are deterministic: edges keep document order, id
lists are lexicographic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .codes import is_code, is_known_namespace
from .dsl import parse_rule, print_rule
from .errors import ParseError, StructuralError, UnknownNodeError
from .patient import EVENT_KINDS
from .rules import Compare, HadEvent, HasFact, Rule, iter_atoms

NODE_KINDS = (
    "symptom-cluster",
    "clinical-exam",
    "lab-test",
    "imaging",
    "procedure",
    "diagnosis",
    "treatment",
    "decision",
)

ALWAYS = "ALWAYS"


@dataclass(frozen=True)
class CareNode:
    id: str
    kind: str
    label: str
    codes: tuple[str, ...] = ()
    guideline_ids: tuple[str, ...] = ()
    expected_window_days: Optional[int] = None
    repeatable: bool = False
    entry: bool = False


@dataclass(frozen=True)
class CareEdge:
    """Directed transition; ``condition`` is None for ALWAYS edges."""

    source: str
    target: str
    condition: Optional[Rule] = None
    label: str = ""


@dataclass(frozen=True)
class CareGraph:
    id: str
    cancer_type: str
    guideline_version: str
    nodes: Mapping[str, CareNode]  # insertion order == document order
    edges: tuple[CareEdge, ...]

    def node(self, node_id: str) -> CareNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node id {node_id!r}") from None


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    location: str
    message: str


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def _parse_node(doc, index: int) -> CareNode:
    where = f"nodes[{index}]"
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object")
    node_id = doc.get("id")
    if not isinstance(node_id, str) or not node_id:
        raise ParseError(f"{where}: missing node id")
    kind = doc.get("kind")
    if kind not in NODE_KINDS:
        raise ParseError(f"{where}: unknown node kind {kind!r}")
    codes = doc.get("codes", [])
    if not isinstance(codes, list):
        raise ParseError(f"{where}: codes must be a list")
    for code in codes:
        if not isinstance(code, str) or not is_code(code):
            raise ParseError(f"{where}: malformed code {code!r}")
    window = doc.get("expected_window_days")
    if window is not None and (not isinstance(window, int) or window < 0):
        raise ParseError(f"{where}: expected_window_days must be a non-negative integer")
    return CareNode(
        id=node_id,
        kind=kind,
        label=doc.get("label", node_id),
        codes=tuple(sorted(set(codes))),
        guideline_ids=tuple(sorted(set(doc.get("guideline_ids", [])))),
        expected_window_days=window,
        repeatable=bool(doc.get("repeatable", False)),
        entry=bool(doc.get("entry", False)),
    )


def _parse_edge(doc, index: int) -> CareEdge:
    where = f"edges[{index}]"
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: expected an object")
    source, target = doc.get("from"), doc.get("to")
    if not isinstance(source, str) or not isinstance(target, str):
        raise ParseError(f"{where}: missing from/to node ids")
    condition_text = doc.get("condition", ALWAYS)
    if condition_text in (None, ALWAYS):
        condition = None
    elif isinstance(condition_text, str):
        try:
            condition = parse_rule(condition_text)
        except ParseError as exc:
            raise ParseError(f"{where}: {exc.message}", exc.line, exc.column) from None
    else:
        raise ParseError(f"{where}: condition must be DSL text or {ALWAYS!r}")
    return CareEdge(
        source=source,
        target=target,
        condition=condition,
        label=doc.get("label", ""),
    )


def load_graph(document: Union[str, Mapping]) -> CareGraph:
    """Load a care graph from JSON text or a parsed object.

    Raises ParseError on malformed documents and StructuralError on dangling
    edge endpoints, duplicate node ids, or an empty node set.
    """
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ParseError("graph document must be an object")
    nodes: dict[str, CareNode] = {}
    for i, node_doc in enumerate(doc.get("nodes", [])):
        node = _parse_node(node_doc, i)
        if node.id in nodes:
            raise StructuralError(f"duplicate node id {node.id!r}")
        nodes[node.id] = node
    if not nodes:
        raise StructuralError("no entry node: graph has no nodes")
    edges = []
    for i, edge_doc in enumerate(doc.get("edges", [])):
        edge = _parse_edge(edge_doc, i)
        for endpoint in (edge.source, edge.target):
            if endpoint not in nodes:
                raise StructuralError(
                    f"edges[{i}]: endpoint {endpoint!r} names no node"
                )
        edges.append(edge)
    return CareGraph(
        id=str(doc.get("id", "")),
        cancer_type=str(doc.get("cancer_type", "")),
        guideline_version=str(doc.get("guideline_version", "")),
        nodes=nodes,
        edges=tuple(edges),
    )


def node_to_doc(node: CareNode) -> dict:
    doc: dict = {"id": node.id, "kind": node.kind, "label": node.label}
    if node.codes:
        doc["codes"] = list(node.codes)
    if node.guideline_ids:
        doc["guideline_ids"] = list(node.guideline_ids)
    if node.expected_window_days is not None:
        doc["expected_window_days"] = node.expected_window_days
    if node.repeatable:
        doc["repeatable"] = True
    if node.entry:
        doc["entry"] = True
    return doc


def graph_to_doc(graph: CareGraph) -> dict:
    return {
        "id": graph.id,
        "cancer_type": graph.cancer_type,
        "guideline_version": graph.guideline_version,
        "nodes": [node_to_doc(n) for n in graph.nodes.values()],
        "edges": [
            {
                "from": e.source,
                "to": e.target,
                "condition": ALWAYS if e.condition is None else print_rule(e.condition),
                "label": e.label,
            }
            for e in graph.edges
        ],
    }


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def entry_nodes(graph: CareGraph) -> list[str]:
    """Entry-flagged nodes, else zero in-degree nodes; lexicographic order."""
    flagged = sorted(n.id for n in graph.nodes.values() if n.entry)
    if flagged:
        return flagged
    with_incoming = {e.target for e in graph.edges}
    return sorted(n for n in graph.nodes if n not in with_incoming)


def successors(graph: CareGraph, node_id: str) -> list[CareEdge]:
    """All edges out of a node, in document order."""
    if node_id not in graph.nodes:
        raise UnknownNodeError(f"unknown node id {node_id!r}")
    return [e for e in graph.edges if e.source == node_id]


def find_nodes_by_code(graph: CareGraph, code: str) -> list[str]:
    return sorted(n.id for n in graph.nodes.values() if code in n.codes)


def topological_order(graph: CareGraph) -> list[str]:
    """Kahn's algorithm with lexicographic tie-breaks; any nodes left on a
    cycle are appended lexicographically. Used for deterministic ambiguity
    resolution when mapping events onto nodes."""
    indegree = {n: 0 for n in graph.nodes}
    for e in graph.edges:
        indegree[e.target] += 1
    ready = sorted(n for n, d in indegree.items() if d == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for e in graph.edges:
            if e.source == node:
                indegree[e.target] -= 1
                if indegree[e.target] == 0:
                    ready.append(e.target)
                    changed = True
        if changed:
            ready.sort()
    remaining = sorted(n for n in graph.nodes if n not in set(order))
    return order + remaining


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _condition_issues(edge_index: int, rule: Rule) -> list[ValidationIssue]:
    issues = []
    location = f"edge:{edge_index}"
    for atom in iter_atoms(rule):
        if isinstance(atom, (HasFact, Compare, HadEvent)):
            if not is_known_namespace(atom.code):
                issues.append(
                    ValidationIssue(
                        "warning",
                        location,
                        f"condition uses unknown code namespace in {atom.code!r}",
                    )
                )
        if isinstance(atom, HadEvent) and atom.kind not in EVENT_KINDS:
            issues.append(
                ValidationIssue(
                    "warning", location, f"condition uses unknown event kind {atom.kind!r}"
                )
            )
    return issues


def validate(graph: CareGraph, registry) -> list[ValidationIssue]:
    """Check all graph invariants plus guideline resolution.

    Returns an empty list iff the graph is fully valid against the registry.
    Issues are returned, never raised.
    """
    issues: list[ValidationIssue] = []
    for node in graph.nodes.values():
        location = f"node:{node.id}"
        for gid in node.guideline_ids:
            if not registry.has(gid):
                issues.append(
                    ValidationIssue(
                        "error", location, f"guideline id {gid!r} does not resolve"
                    )
                )
        for code in node.codes:
            if not is_known_namespace(code):
                issues.append(
                    ValidationIssue(
                        "warning", location, f"code {code!r} uses an unknown namespace"
                    )
                )
        if node.expected_window_days is not None and node.expected_window_days < 0:
            issues.append(
                ValidationIssue("error", location, "expected_window_days is negative")
            )
    for i, edge in enumerate(graph.edges):
        for endpoint in (edge.source, edge.target):
            if endpoint not in graph.nodes:
                issues.append(
                    ValidationIssue(
                        "error", f"edge:{i}", f"endpoint {endpoint!r} names no node"
                    )
                )
        if edge.condition is not None:
            issues.extend(_condition_issues(i, edge.condition))
    if not entry_nodes(graph):
        issues.append(
            ValidationIssue(
                "error",
                "graph",
                "no entry node: none flagged and every node has incoming edges",
            )
        )
    return issues
