"""Lexical and linguistic knowledge graphs plus the retrieval queries over them.

Lexical item nodes are ``lex:<gloss_id>``; phonological component nodes are
``<kind>:<label>`` (e.g. ``handshape-base:B``). Component edges carry the
component kind as their relation.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from .datamodel import DictionaryEntry, validate_phonology
from .errors import DataError, DuplicateGloss, ParseError, UnknownGloss

LEXICAL_ITEM = "lexical-item"
PHONO_COMPONENT = "phonological-component"
CONCEPT = "concept"
FEATURE = "feature"
NODE_KINDS = (LEXICAL_ITEM, PHONO_COMPONENT, CONCEPT, FEATURE)


@dataclass(frozen=True)
class Node:
    node_id: str
    kind: str
    labels: tuple[str, ...] = ()
    properties: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"node_id": self.node_id, "kind": self.kind, "labels": list(self.labels), "properties": dict(self.properties)}


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    relation: str

    def to_dict(self) -> dict[str, str]:
        return {"src": self.src, "dst": self.dst, "relation": self.relation}


class KnowledgeGraph:
    """Directed graph with unique node ids; immutable once built."""

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge]):
        self._nodes: dict[str, Node] = {}
        for n in nodes:
            if n.node_id in self._nodes:
                raise DataError(f"duplicate node id {n.node_id!r}")
            if n.kind not in NODE_KINDS:
                raise DataError(f"{n.node_id}: unknown node kind {n.kind!r}")
            self._nodes[n.node_id] = n
        self._edges = tuple(sorted(set(edges)))
        self._out: dict[str, list[Edge]] = {k: [] for k in self._nodes}
        self._in: dict[str, list[Edge]] = {k: [] for k in self._nodes}
        for e in self._edges:
            if e.src not in self._nodes or e.dst not in self._nodes:
                raise DataError(f"edge {e.src}->{e.dst} has a missing endpoint")
            self._out[e.src].append(e)
            self._in[e.dst].append(e)
        self._keywords: dict[str, list[str]] = {}
        for n in self._nodes.values():
            if n.kind == LEXICAL_ITEM:
                for word in set(n.labels[1:]):
                    self._keywords.setdefault(word, []).append(n.properties["gloss_id"])

    @property
    def nodes(self) -> Mapping[str, Node]:
        return MappingProxyType(self._nodes)

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    def node(self, node_id: str) -> Node:
        return self._nodes[node_id]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def out_edges(self, node_id: str) -> list[Edge]:
        return list(self._out[node_id])

    def in_edges(self, node_id: str) -> list[Edge]:
        return list(self._in[node_id])

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [self._nodes[k].to_dict() for k in sorted(self._nodes)],
            "edges": [e.to_dict() for e in self._edges],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "KnowledgeGraph":
        if "nodes" not in doc or "edges" not in doc:
            raise ParseError("graph document needs top-level 'nodes' and 'edges'")
        nodes = [
            Node(d["node_id"], d["kind"], tuple(d.get("labels", ())), dict(d.get("properties", {})))
            for d in doc["nodes"]
        ]
        edges = [Edge(d["src"], d["dst"], d.get("relation", "related-to")) for d in doc["edges"]]
        return cls(nodes, edges)


def load_graph(path) -> KnowledgeGraph:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return KnowledgeGraph.from_dict(doc)


def save_graph(graph: KnowledgeGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def lexical_node_id(gloss_id: str) -> str:
    return f"lex:{gloss_id}"


def component_node_id(kind: str, label: str) -> str:
    return f"{kind}:{label}"


def build_lexical_graph(dictionary: Iterable[DictionaryEntry], label_sets=None) -> KnowledgeGraph:
    entries = list(dictionary)
    if not entries:
        raise DataError("dictionary is empty")
    nodes: list[Node] = []
    components: dict[str, Node] = {}
    edges: list[Edge] = []
    seen: set[str] = set()
    for e in entries:
        if e.gloss_id in seen:
            raise DuplicateGloss(e.gloss_id)
        seen.add(e.gloss_id)
        validate_phonology(e.gloss_id, e.canonical_phonology, label_sets)
        lex = lexical_node_id(e.gloss_id)
        nodes.append(
            Node(
                lex,
                LEXICAL_ITEM,
                (e.gloss_id, *e.keywords),
                {"gloss_id": e.gloss_id, "handedness": e.handedness, "frequency": e.frequency},
            )
        )
        for kind in sorted(e.canonical_phonology):
            label = e.canonical_phonology[kind]
            cid = component_node_id(kind, label)
            if cid not in components:
                components[cid] = Node(cid, PHONO_COMPONENT, (label,), {"component_kind": kind, "label": label})
            edges.append(Edge(lex, cid, kind))
    return KnowledgeGraph(nodes + [components[k] for k in sorted(components)], edges)


def gloss_ids(graph: KnowledgeGraph) -> list[str]:
    return sorted(n.properties["gloss_id"] for n in graph.nodes.values() if n.kind == LEXICAL_ITEM)


def canonical_phonology(graph: KnowledgeGraph, gloss_id: str) -> dict[str, str]:
    lex = lexical_node_id(gloss_id)
    if lex not in graph or graph.node(lex).kind != LEXICAL_ITEM:
        raise UnknownGloss(f"unknown gloss {gloss_id!r}")
    return {e.relation: graph.node(e.dst).properties["label"] for e in graph.out_edges(lex)}


def glosses_by_phonology(graph: KnowledgeGraph, constraints: Mapping[str, Any]) -> list[tuple[str, int]]:
    """Rank glosses by how many component constraints they satisfy.

    A constraint value is a single label or a collection of acceptable labels.
    With constraints, only glosses satisfying at least one are returned.
    """
    allowed = {
        kind: {value} if isinstance(value, str) else set(value) for kind, value in constraints.items()
    }
    # Walk from component nodes back to lexical items rather than scanning every entry.
    counts: dict[str, int] = {}
    for kind, labels in allowed.items():
        for label in labels:
            cid = component_node_id(kind, label)
            if cid not in graph:
                continue
            for e in graph.in_edges(cid):
                if e.relation == kind:
                    gid = graph.node(e.src).properties["gloss_id"]
                    counts[gid] = counts.get(gid, 0) + 1
    if not allowed:
        counts = {g: 0 for g in gloss_ids(graph)}
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def glosses_for_token(graph: KnowledgeGraph, token: str) -> list[str]:
    """Inverse dictionary lookup: glosses whose keywords include ``token``."""
    return sorted(graph._keywords.get(token.lower(), ()))


@dataclass
class RetrievalResult:
    matched_nodes: list[tuple[str, int]]
    neighborhood: list[Edge]
    provenance: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "matched_nodes": [{"node_id": n, "match_count": c} for n, c in self.matched_nodes],
            "neighborhood": [e.to_dict() for e in self.neighborhood],
            "provenance": dict(self.provenance),
        }


def query_linguistic_graph(graph: KnowledgeGraph, query_terms: Iterable[str], radius: int = 1) -> RetrievalResult:
    """Case-insensitive substring match on node labels, then radius-``r`` edge closure.

    The closure treats edges as undirected for reachability and keeps every edge
    with an endpoint strictly closer than ``radius`` hops to a matched node.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    terms = [t.lower() for t in query_terms if t]
    scored = []
    for node_id, node in graph.nodes.items():
        hay = [label.lower() for label in node.labels] + [node_id.lower()]
        count = sum(1 for t in terms if any(t in h for h in hay))
        if count:
            scored.append((node_id, count))
    scored.sort(key=lambda kv: (-kv[1], kv[0]))

    dist: dict[str, int] = {n: 0 for n, _ in scored}
    queue = deque(dist)
    while queue:
        u = queue.popleft()
        if dist[u] >= radius:
            continue
        for e in graph.out_edges(u) + graph.in_edges(u):
            v = e.dst if e.src == u else e.src
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    hood = [
        e for e in graph.edges if min(dist.get(e.src, radius), dist.get(e.dst, radius)) < radius
    ]
    return RetrievalResult(scored, hood, {"query_terms": list(query_terms), "radius": radius})
