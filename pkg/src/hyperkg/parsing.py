"""Strict parsers for every structured model-output format the pipeline uses.

Models wrap JSON payloads in code fences and prose; every parser first pulls
out the first balanced JSON value it finds. Parsers either return structured
data or raise ``ResponseParseError`` carrying the raw text — nothing is
silently dropped.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

from .errors import ResponseParseError
from .model import Entity, Hyperedge, TIERS, canonical_name

log = logging.getLogger(__name__)

# Word budgets (whitespace-split) for reflection insights, by origin.
INSIGHT_WORD_BUDGET = {"unstable": 50, "missed": 32}

_STATE_FALSE = re.compile(r"\{+\s*State\s*:\s*False\s*\}+", re.IGNORECASE)
_INSIGHT_BLOCK = re.compile(r"<Insight>(.*?)</Insight>", re.DOTALL | re.IGNORECASE)


def extract_first_json(raw: str):
    """Return the first balanced JSON object or array embedded in ``raw``."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(raw):
        if ch in "[{":
            try:
                value, _ = decoder.raw_decode(raw, i)
            except json.JSONDecodeError:
                continue
            return value
    raise ResponseParseError("no JSON value found in response", raw=raw)


def parse_entities(raw: str) -> list[Entity] | None:
    """Parse an entity-extraction response.

    Returns None when the model emitted the empty-content sentinel
    (``{State: False}``). Duplicate names collapse, first description kept.
    """
    if _STATE_FALSE.search(raw):
        return None
    data = extract_first_json(raw)
    if not isinstance(data, dict) or not isinstance(data.get("nodes"), list):
        raise ResponseParseError('expected {"nodes": [...]} object', raw=raw)
    entities: dict[str, Entity] = {}
    for node in data["nodes"]:
        if not isinstance(node, dict):
            raise ResponseParseError(f"entity entry is not an object: {node!r}", raw=raw)
        name = canonical_name(str(node.get("name", "")))
        if not name:
            log.warning("dropping entity with empty name: %r", node)
            continue
        if name in entities:
            continue
        entities[name] = Entity(
            name=name,
            entity_type=str(node.get("type", "")).strip(),
            description=str(node.get("description", "")).strip(),
        )
    return list(entities.values())


def parse_relations(raw: str, default_tier: str = "nary") -> list[Hyperedge]:
    """Parse a relation-extraction response into hyperedges.

    Member names are canonicalized; membership filtering against the known-node
    list is the extractor's job, not the parser's.
    """
    data = extract_first_json(raw)
    if not isinstance(data, dict) or not isinstance(data.get("relations"), list):
        raise ResponseParseError('expected {"relations": [...]} object', raw=raw)
    edges = []
    for rel in data["relations"]:
        if not isinstance(rel, dict):
            raise ResponseParseError(f"relation entry is not an object: {rel!r}", raw=raw)
        description = str(rel.get("description", "")).strip()
        nodes = rel.get("nodes", [])
        if not description or not isinstance(nodes, list):
            log.warning("dropping malformed relation entry: %r", rel)
            continue
        tier = str(rel.get("type", "")).strip() or default_tier
        if tier not in TIERS:
            tier = default_tier
        members = []
        for node in nodes:
            name = canonical_name(str(node))
            if name and name not in members:
                members.append(name)
        edges.append(Hyperedge(relation=description, members=tuple(members), tier=tier))
    return edges


@dataclass
class InsightProposal:
    """One distilled skill proposal from a reflection call."""

    trigger: str
    action: str
    origin: str  # "unstable" | "missed"
    source_relation: str = ""
    skill_kind: str = "RELATION DISCOVERY"

    def word_count(self) -> int:
        return len(self.trigger.split()) + len(self.action.split())

    def render_block(self) -> str:
        return (
            "<Insight>\n"
            f"SKILL: {self.skill_kind}\n"
            f"TRIGGER: {self.trigger}\n"
            f"ACTION: {self.action}\n"
            "</Insight>"
        )


def _parse_insight_block(body: str) -> tuple[str, str, str]:
    fields = {"SKILL": "", "TRIGGER": "", "ACTION": ""}
    current: str | None = None
    for line in body.splitlines():
        stripped = line.strip()
        matched = False
        for key in fields:
            if stripped.upper().startswith(key + ":"):
                fields[key] = stripped[len(key) + 1 :].strip()
                current = key
                matched = True
                break
        if not matched and current and stripped:
            fields[current] += " " + stripped
    return fields["SKILL"], fields["TRIGGER"], fields["ACTION"]


def parse_insights(raw: str, origin: str) -> list[InsightProposal]:
    """Extract every well-formed <Insight> block; reject over-budget blocks.

    Raises when zero well-formed blocks survive; malformed blocks among valid
    ones are logged and skipped.
    """
    if origin not in INSIGHT_WORD_BUDGET:
        raise ValueError(f"unknown insight origin {origin!r}")
    budget = INSIGHT_WORD_BUDGET[origin]
    proposals = []
    blocks = _INSIGHT_BLOCK.findall(raw)
    for body in blocks:
        skill, trigger, action = _parse_insight_block(body)
        if not trigger or not action:
            log.warning("skipping malformed insight block (missing trigger/action)")
            continue
        proposal = InsightProposal(trigger=trigger, action=action, origin=origin)
        if proposal.word_count() > budget:
            log.warning(
                "skipping over-budget insight (%d words > %d, origin=%s)",
                proposal.word_count(),
                budget,
                origin,
            )
            continue
        proposals.append(proposal)
    if not proposals:
        raise ResponseParseError(
            f"no well-formed <Insight> block within the {budget}-word budget", raw=raw
        )
    return proposals


LIBRARY_OPS = ("ADD", "MERGE", "SKIP", "DELETE")


@dataclass
class LibraryOp:
    """One skill-library controller operation."""

    op: str
    trigger: str = ""
    action: str = ""
    merge_with_ids: list[str] = field(default_factory=list)
    target_id: str = ""
    reason: str = ""


def _op_field(entry: dict, *names: str) -> object:
    for name in names:
        if name in entry:
            return entry[name]
    return None


def parse_library_ops(raw: str) -> list[LibraryOp]:
    """Parse the controller's JSON array of ADD/MERGE/SKIP/DELETE operations.

    Legacy labels are rewritten to the executable set: MODIFY becomes
    DELETE + ADD, KEEP becomes SKIP. Unknown labels are rejected by name.
    """
    data = extract_first_json(raw)
    if not isinstance(data, list):
        raise ResponseParseError("expected a JSON array of operations", raw=raw)
    ops: list[LibraryOp] = []
    for entry in data:
        if not isinstance(entry, dict):
            raise ResponseParseError(f"operation entry is not an object: {entry!r}", raw=raw)
        label = str(_op_field(entry, "operation", "op") or "").upper()
        trigger = str(_op_field(entry, "trigger") or "").strip()
        action = str(_op_field(entry, "action") or "").strip()
        target = str(_op_field(entry, "target id", "target_id") or "").strip()
        reason = str(_op_field(entry, "reason") or "").strip()
        merge_ids = _op_field(entry, "merge with ids", "merge_with_ids") or []
        if label == "KEEP":
            label = "SKIP"
        if label == "MODIFY":
            if not target or not trigger or not action:
                raise ResponseParseError(
                    "MODIFY requires target id, trigger, and action", raw=raw
                )
            ops.append(LibraryOp(op="DELETE", target_id=target, reason="modified"))
            ops.append(LibraryOp(op="ADD", trigger=trigger, action=action))
            continue
        if label not in LIBRARY_OPS:
            raise ResponseParseError(f"unknown operation label {label or entry!r}", raw=raw)
        if label == "ADD" and (not trigger or not action):
            raise ResponseParseError("ADD requires trigger and action", raw=raw)
        if label == "MERGE":
            if not trigger or not action:
                raise ResponseParseError("MERGE requires trigger and action", raw=raw)
            if not isinstance(merge_ids, list) or not merge_ids:
                raise ResponseParseError("MERGE requires non-empty merge with ids", raw=raw)
        if label == "DELETE" and not target:
            raise ResponseParseError("DELETE requires target id", raw=raw)
        ops.append(
            LibraryOp(
                op=label,
                trigger=trigger,
                action=action,
                merge_with_ids=[str(i) for i in merge_ids] if isinstance(merge_ids, list) else [],
                target_id=target,
                reason=reason,
            )
        )
    return ops


def parse_verdict(raw: str) -> int:
    """Parse the fact-judge response into 0 or 1."""
    stripped = raw.strip().strip("`").strip()
    if stripped and stripped[0] in "01":
        return int(stripped[0])
    raise ResponseParseError(f"judge verdict is not 0/1: {raw!r}", raw=raw)
