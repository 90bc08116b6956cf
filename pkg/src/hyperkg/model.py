"""Hypergraph data model, validation, and canonical JSON serialization.

Entities are keyed by canonical name (trimmed, internal whitespace collapsed,
case preserved). Hyperedge members are stored in first-mention order but
compared as sets, so two edges with the same relation text and the same member
set are duplicates regardless of member ordering.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable

from .errors import GraphFormatError, GraphValidationError

TIERS = ("binary", "qualified_binary", "nary")

_WS = re.compile(r"\s+")


def canonical_name(name: str) -> str:
    """Trim and collapse internal whitespace; case is preserved."""
    return _WS.sub(" ", name.strip())


@dataclass
class Entity:
    """A node: canonical surface form plus type, description, and merged aliases.

    ``provenance`` records the chunk ids the entity was extracted from; it is
    in-memory bookkeeping for deduplication audits and is not serialized.
    """

    name: str
    entity_type: str = ""
    description: str = ""
    aliases: set[str] = field(default_factory=set)
    provenance: set[str] = field(default_factory=set, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "type": self.entity_type,
            "description": self.description,
            "aliases": sorted(self.aliases),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Entity":
        return cls(
            name=d["name"],
            entity_type=d.get("type", ""),
            description=d.get("description", ""),
            aliases=set(d.get("aliases", [])),
        )


@dataclass
class Hyperedge:
    """An n-ary fact: a relation description over >= 2 participating entities."""

    relation: str
    members: tuple[str, ...]
    tier: str = "nary"
    provenance: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        self.members = tuple(self.members)

    @property
    def member_set(self) -> frozenset[str]:
        return frozenset(self.members)

    def dedup_key(self) -> tuple[str, frozenset[str]]:
        return (self.relation, self.member_set)

    def to_dict(self) -> dict[str, Any]:
        return {
            "relation": self.relation,
            "members": list(self.members),
            "tier": self.tier,
            "provenance": sorted(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Hyperedge":
        return cls(
            relation=d["relation"],
            members=tuple(d["members"]),
            tier=d.get("tier", "nary"),
            provenance=set(d.get("provenance", [])),
        )


@dataclass
class KnowledgeHypergraph:
    """Entity map plus hyperedge list for one source document."""

    source_id: str = ""
    entities: dict[str, Entity] = field(default_factory=dict)
    hyperedges: list[Hyperedge] = field(default_factory=list)

    def add_entity(self, entity: Entity) -> Entity:
        """Register an entity under its canonical name.

        An existing entry with the same canonical name wins; the incoming
        surface form is absorbed as an alias when it differs.
        """
        key = canonical_name(entity.name)
        existing = self.entities.get(key)
        if existing is None:
            entity.name = key
            entity.aliases = {a for a in entity.aliases if a != key}
            self.entities[key] = entity
            return entity
        if entity.name != key:
            existing.aliases.add(entity.name)
        existing.provenance |= entity.provenance
        return existing

    def add_hyperedge(self, edge: Hyperedge) -> bool:
        """Append an edge; an exact duplicate (relation + member set) is a no-op.

        Duplicate insertion merges provenance into the existing edge and
        returns False.
        """
        key = edge.dedup_key()
        for existing in self.hyperedges:
            if existing.dedup_key() == key:
                existing.provenance |= edge.provenance
                return False
        self.hyperedges.append(edge)
        return True

    def edges_incident_to(self, entity_name: str) -> list[Hyperedge]:
        return [e for e in self.hyperedges if entity_name in e.member_set]

    def to_dict(self) -> dict[str, Any]:
        return {
            "source_id": self.source_id,
            "entities": [self.entities[k].to_dict() for k in sorted(self.entities)],
            "hyperedges": [
                e.to_dict()
                for e in sorted(self.hyperedges, key=lambda e: (e.relation, e.members))
            ],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KnowledgeHypergraph":
        try:
            entities = {e["name"]: Entity.from_dict(e) for e in d["entities"]}
            edges = [Hyperedge.from_dict(e) for e in d["hyperedges"]]
        except KeyError as exc:
            raise GraphFormatError(f"graph document missing required key: {exc}") from exc
        return cls(source_id=d.get("source_id", ""), entities=entities, hyperedges=edges)


def validate_hypergraph(graph: KnowledgeHypergraph) -> list[str]:
    """Return every invariant violation in the graph; empty list means valid."""
    violations: list[str] = []
    for key, entity in graph.entities.items():
        if not entity.name.strip():
            violations.append(f"entity {key!r}: empty name")
        if canonical_name(entity.name) != entity.name:
            violations.append(f"entity {key!r}: name is not in canonical form")
        if key != entity.name:
            violations.append(f"entity map key {key!r} != entity name {entity.name!r}")
        if entity.name in entity.aliases:
            violations.append(f"entity {entity.name!r}: aliases contain the name itself")
    seen_edges: set[tuple[str, frozenset[str]]] = set()
    for i, edge in enumerate(graph.hyperedges):
        label = f"hyperedge #{i} ({edge.relation!r})"
        if not edge.relation.strip():
            violations.append(f"{label}: empty relation text")
        distinct = set(edge.members)
        if len(distinct) < 2:
            violations.append(f"{label}: needs >= 2 distinct members, has {len(distinct)}")
        if len(distinct) != len(edge.members):
            violations.append(f"{label}: duplicate member entries")
        if edge.tier not in TIERS:
            violations.append(f"{label}: unknown tier {edge.tier!r}")
        elif edge.tier == "binary" and len(distinct) != 2:
            violations.append(f"{label}: binary tier requires exactly 2 members")
        elif edge.tier == "qualified_binary" and len(distinct) < 3:
            violations.append(f"{label}: qualified_binary tier requires >= 3 members")
        for member in edge.members:
            if member not in graph.entities:
                violations.append(f"{label}: member {member!r} is not a graph entity")
        key = edge.dedup_key()
        if key in seen_edges:
            violations.append(f"{label}: exact duplicate of an earlier edge")
        seen_edges.add(key)
    return violations


def graph_to_json(graph: KnowledgeHypergraph) -> str:
    """Canonical byte-deterministic JSON rendering (sorted arrays, fixed key order)."""
    return json.dumps(graph.to_dict(), ensure_ascii=False, indent=2) + "\n"


def save_graph(graph: KnowledgeHypergraph, path: str | Path) -> None:
    violations = validate_hypergraph(graph)
    if violations:
        raise GraphValidationError(violations)
    Path(path).write_text(graph_to_json(graph), encoding="utf-8")


def load_graph(source: str | Path | IO[str]) -> KnowledgeHypergraph:
    """Load and validate a graph from a path or text stream."""
    if hasattr(source, "read"):
        text = source.read()  # type: ignore[union-attr]
        origin = "<stream>"
    else:
        text = Path(source).read_text(encoding="utf-8")  # type: ignore[arg-type]
        origin = str(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{origin}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise GraphFormatError(f"{origin}: top level must be a JSON object")
    graph = KnowledgeHypergraph.from_dict(data)
    violations = validate_hypergraph(graph)
    if violations:
        raise GraphValidationError(violations)
    return graph


def merge_raw(
    source_id: str,
    entity_batches: Iterable[Iterable[Entity]],
    edge_batches: Iterable[Iterable[Hyperedge]],
) -> KnowledgeHypergraph:
    """Union per-chunk extraction outputs into a single graph (exact-dup edges collapse)."""
    graph = KnowledgeHypergraph(source_id=source_id)
    for batch in entity_batches:
        for entity in batch:
            graph.add_entity(entity)
    for batch in edge_batches:
        for edge in batch:
            graph.add_hyperedge(edge)
    return graph
