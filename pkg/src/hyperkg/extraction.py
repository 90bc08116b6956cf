"""Per-chunk entity extraction and coarse-to-fine hyperedge extraction.

Each chunk gets one entity-extraction call followed by one relation call per
granularity tier, in coarse-to-fine order. Finer tiers see the edges already
extracted by coarser tiers as prompt context. Skills from the library are
rendered verbatim into the Experiences slot.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .chunking import Chunk, ChunkingConfig, chunk_document
from .errors import ExtractionError, FixtureMissError, HyperKGError, ResponseParseError
from .gateway import Gateway
from .model import Entity, Hyperedge, TIERS, canonical_name
from .parsing import parse_entities, parse_relations
from .skills import Skill, SkillLibrary, render_skill_block, select_skills

log = logging.getLogger(__name__)

TIER_GUIDANCE = {
    "binary": (
        "Extract ONLY basic pairwise links (the structural skeleton). "
        "Each relation in this pass must connect exactly 2 entities. "
        'Set "type" to "binary".'
    ),
    "qualified_binary": (
        "Extract binary relations augmented with qualifying arguments such as "
        "time, location, or specific conditions. Each relation in this pass "
        "must connect a core pair plus at least 1 qualifier entity (3 or more "
        'entities total). Set "type" to "qualified_binary".'
    ),
    "nary": (
        "Extract general n-ary relations: entire events or story plots where "
        "multiple participants jointly instantiate a coherent scenario. Treat "
        'each event as one holistic unit. Set "type" to "nary".'
    ),
}

_TIER_MIN_MEMBERS = {"binary": 2, "qualified_binary": 3, "nary": 2}


def load_template(name: str, override_dir: str | Path | None = None) -> str:
    """Load a prompt template, preferring a user override directory."""
    if override_dir:
        candidate = Path(override_dir) / f"{name}.txt"
        if candidate.exists():
            return candidate.read_text(encoding="utf-8")
    return resources.files("hyperkg.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def fill_template(template: str, **slots: str) -> str:
    """Substitute named ``{slot}`` placeholders literally (no format-spec parsing)."""
    for key, value in slots.items():
        template = template.replace("{" + key + "}", value)
    return template


@dataclass
class ExtractionConfig:
    tiers: tuple[str, ...] = TIERS
    skills_enabled: bool = True
    max_skills_injected: int = 20
    prompt_dir: str = ""
    max_parallel_chunks: int = 4

    def validate(self) -> None:
        if not self.tiers:
            raise ExtractionError("tiers must be non-empty")
        seen = set()
        for tier in self.tiers:
            if tier not in TIERS:
                raise ExtractionError(f"unknown tier {tier!r}")
            if tier in seen:
                raise ExtractionError(f"duplicate tier {tier!r}")
            seen.add(tier)


@dataclass
class DocumentExtraction:
    """Raw (pre-deduplication) extraction output for one document.

    ``mentions`` keeps one record per chunk-level entity mention, so the same
    surface form extracted from two overlapping chunks appears twice; the
    consolidator owns merging. ``responses`` keeps the raw relation-pass texts
    for reflection.
    """

    source_id: str
    mentions: list[Entity] = field(default_factory=list)
    edges: list[Hyperedge] = field(default_factory=list)
    responses: list[str] = field(default_factory=list)
    chunk_count: int = 0
    failed_chunks: list[str] = field(default_factory=list)


def build_entity_prompt(chunk: Chunk, config: ExtractionConfig) -> str:
    template = load_template("entity_extraction", config.prompt_dir or None)
    return fill_template(template, text=chunk.text)


def build_relation_prompt(
    chunk: Chunk,
    tier: str,
    known_names: list[str],
    prior_edges: list[Hyperedge],
    skills: list[Skill],
    config: ExtractionConfig,
) -> str:
    template = load_template("relation_extraction", config.prompt_dir or None)
    if prior_edges:
        prior = "\n".join(
            f"- {{{'; '.join(e.members)}}} -> {e.relation}" for e in prior_edges
        )
    else:
        prior = "(none yet)"
    experiences = render_skill_block(skills) if config.skills_enabled else render_skill_block([])
    return fill_template(
        template,
        **{
            "tier guidance": TIER_GUIDANCE[tier],
            "prior relations": prior,
            "experiences": experiences,
            "known nodes": "; ".join(known_names),
            "text": chunk.text,
        },
    )


def extract_entities(
    chunk: Chunk, gateway: Gateway, config: ExtractionConfig, sample_index: int = 0
) -> list[Entity]:
    """Entities for one chunk; empty list when the chunk has no meaningful content."""
    prompt = build_entity_prompt(chunk, config)
    try:
        raw = gateway.complete(prompt, sample_index=sample_index)
        entities = parse_entities(raw)
    except HyperKGError as exc:
        raise type(exc)(f"chunk {chunk.id}: {exc}") from exc
    if entities is None:
        return []
    for entity in entities:
        entity.provenance.add(chunk.id)
    return entities


def extract_hyperedges_tiered(
    chunk: Chunk,
    known_entities: list[Entity],
    skills: list[Skill],
    gateway: Gateway,
    config: ExtractionConfig,
    sample_index: int = 0,
) -> tuple[list[Hyperedge], list[str]]:
    """One relation call per tier in coarse-to-fine order.

    Returned edges are filtered to known entity names and tagged with their
    tier and chunk provenance. Also returns the raw per-tier response texts.
    """
    if not known_entities:
        raise ExtractionError(f"chunk {chunk.id}: known_entities must be non-empty")
    known_names = [e.name for e in known_entities]
    known_set = set(known_names)
    collected: list[Hyperedge] = []
    responses: list[str] = []
    failures = 0
    for tier in config.tiers:
        prompt = build_relation_prompt(chunk, tier, known_names, collected, skills, config)
        try:
            raw = gateway.complete(prompt, sample_index=sample_index)
            responses.append(raw)
            parsed = parse_relations(raw, default_tier=tier)
        except ResponseParseError as exc:
            log.warning("chunk %s tier %s: parse failure, tier skipped (%s)", chunk.id, tier, exc)
            failures += 1
            continue
        for edge in parsed:
            members = tuple(m for m in edge.members if m in known_set)
            if len(set(members)) < _TIER_MIN_MEMBERS[tier]:
                log.debug("chunk %s: dropping %r after member filter", chunk.id, edge.relation)
                continue
            if tier == "binary" and len(set(members)) != 2:
                log.debug("chunk %s: dropping non-pair edge in binary pass", chunk.id)
                continue
            collected.append(
                Hyperedge(relation=edge.relation, members=members, tier=tier, provenance={chunk.id})
            )
    if failures == len(config.tiers):
        raise ExtractionError(f"chunk {chunk.id}: every tier pass failed")
    return collected, responses


def extract_document(
    document: str,
    skills: SkillLibrary | list[Skill] | None,
    gateway: Gateway,
    chunk_config: ChunkingConfig | None = None,
    extraction_config: ExtractionConfig | None = None,
    sample_index: int = 0,
    source_id: str = "doc",
) -> DocumentExtraction:
    """Run the full per-chunk pipeline and union the results into a raw graph.

    Chunks are processed independently (concurrently up to
    ``max_parallel_chunks``); results are merged in chunk order so output is
    order-independent of scheduling. The run fails only if every chunk failed.
    """
    config = extraction_config or ExtractionConfig()
    config.validate()
    chunks = chunk_document(document, chunk_config)
    if isinstance(skills, SkillLibrary):
        context = chunks[0].text[:1000]
        selected = (
            select_skills(skills, context, config.max_skills_injected, gateway)
            if skills.skills
            else []
        )
    else:
        selected = list(skills or [])

    def run_chunk(chunk: Chunk):
        mentions = extract_entities(chunk, gateway, config, sample_index)
        if not mentions:
            return mentions, [], []
        edges, responses = extract_hyperedges_tiered(
            chunk, mentions, selected, gateway, config, sample_index
        )
        return mentions, edges, responses

    result = DocumentExtraction(source_id=source_id, chunk_count=len(chunks))
    outcomes: list[tuple | Exception] = [None] * len(chunks)  # type: ignore[list-item]
    with ThreadPoolExecutor(max_workers=max(1, config.max_parallel_chunks)) as pool:
        futures = [pool.submit(run_chunk, chunk) for chunk in chunks]
        for i, future in enumerate(futures):
            try:
                outcomes[i] = future.result()
            except HyperKGError as exc:
                outcomes[i] = exc
    for chunk, outcome in zip(chunks, outcomes):
        if isinstance(outcome, Exception):
            log.warning("chunk %s failed: %s", chunk.id, outcome)
            result.failed_chunks.append(chunk.id)
            continue
        mentions, edges, responses = outcome
        result.mentions.extend(mentions)
        result.edges.extend(edges)
        result.responses.extend(responses)
    if result.failed_chunks and len(result.failed_chunks) == len(chunks):
        for outcome in outcomes:
            # Surface a fixture miss as-is so callers can map it to exit code 3.
            if isinstance(outcome, FixtureMissError):
                raise outcome
        raise ExtractionError(f"{source_id}: every chunk failed extraction")
    return result
