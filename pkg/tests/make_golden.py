"""Regenerate the golden end-to-end fixtures under tests/data/.

Produces a two-chunk document, scripted-provider fixture files covering every
completion and embedding the pipeline requests for it, and the expected output
graph. Run from the repository root:

    python3 tests/make_golden.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from conftest import hash_vector

from hyperkg.chunking import chunk_document
from hyperkg.dedup import deduplicate_graph
from hyperkg.extraction import (
    ExtractionConfig,
    build_entity_prompt,
    build_relation_prompt,
    extract_document,
)
from hyperkg.gateway import Gateway, GatewayConfig, ScriptedProvider
from hyperkg.model import Hyperedge, graph_to_json
from hyperkg.parsing import parse_relations
from hyperkg.skills import SkillLibrary

DATA_DIR = Path(__file__).parent / "data"

PARAGRAPH_1 = (
    "Pong is a table-tennis arcade video game that Atari released in 1972. "
    "The home console adaptation of Pong arrived a few years later, and the "
    "cartridge version was eventually released for the Atari 2600, the console "
    "that carried Atari through the late nineteen seventies. Pong began as a "
    "training exercise assigned to a new engineer, yet the finished cabinet "
    "became one of the earliest commercially successful video games and "
    "established the coin-operated game business as a serious industry. "
    "Distributors who had been skeptical of electronic amusements ordered "
    "thousands of cabinets once the first test locations reported queues "
    "around the block. The simple two-paddle design also proved easy to "
    "manufacture at scale, which mattered far more than novelty in those "
    "first years. Imitators appeared within months, and the resulting flood "
    "of paddle games pushed Atari to look for its next idea well before the "
    "original cabinets had stopped earning. "
)

PARAGRAPH_2 = (
    "Long before any of that, Spacewar! was developed in 1962 at the "
    "Massachusetts Institute of Technology. The program ran on the PDP-1, a "
    "room-sized machine that students could occasionally book overnight, and "
    "it spread from laboratory to laboratory with the machine itself. Two "
    "ships dueled around a central star whose gravity bent every torpedo "
    "shot, a simulation detail that gave the game its lasting depth. Because "
    "the code circulated freely, Spacewar! became a shared reference point "
    "for a generation of programmers who later built the commercial industry."
)

DOCUMENT = PARAGRAPH_1 + "\n\n" + PARAGRAPH_2

CHUNK_ENTITIES = {
    0: [
        {"name": "Pong", "type": "video game", "description": "table-tennis arcade game"},
        {"name": "Atari", "type": "company", "description": "arcade game manufacturer"},
        {"name": "Atari 2600", "type": "console", "description": "home video game console"},
        {"name": "1972", "type": "year", "description": "release year of Pong"},
    ],
    1: [
        {"name": "Spacewar!", "type": "video game", "description": "early space combat program"},
        {"name": "1962", "type": "year", "description": "year Spacewar! was developed"},
        {
            "name": "Massachusetts Institute of Technology",
            "type": "university",
            "description": "where Spacewar! was written",
        },
        {"name": "PDP-1", "type": "computer", "description": "machine Spacewar! ran on"},
    ],
}

CHUNK_RELATIONS = {
    0: {
        "binary": [
            {"description": "was released for", "nodes": ["Pong", "Atari 2600"], "type": "binary"},
            {"description": "was released in", "nodes": ["Pong", "1972"], "type": "binary"},
        ],
        "qualified_binary": [
            {
                "description": "released Pong in 1972",
                "nodes": ["Atari", "Pong", "1972"],
                "type": "qualified_binary",
            }
        ],
        "nary": [],
    },
    1: {
        "binary": [
            {"description": "was developed in", "nodes": ["Spacewar!", "1962"], "type": "binary"}
        ],
        "qualified_binary": [],
        "nary": [
            {
                "description": "origin of early computer gaming",
                "nodes": [
                    "Spacewar!",
                    "1962",
                    "Massachusetts Institute of Technology",
                    "PDP-1",
                ],
                "type": "nary",
            }
        ],
    },
}


class RecordingProvider(ScriptedProvider):
    """Scripted completions plus hash embeddings, recording every text embedded."""

    def __init__(self):
        super().__init__()
        self.recorded: dict[str, list[float]] = {}

    def embed(self, texts):
        out = []
        for text in texts:
            vec = hash_vector(text)
            self.recorded[text] = vec
            out.append(vec)
        return out


def register_fixtures(provider: RecordingProvider, config: ExtractionConfig) -> None:
    chunks = chunk_document(DOCUMENT)
    assert len(chunks) == 2, f"expected a 2-chunk document, got {len(chunks)}"
    for i, chunk in enumerate(chunks):
        provider.register(
            build_entity_prompt(chunk, config), 0, json.dumps({"nodes": CHUNK_ENTITIES[i]})
        )
        known = [e["name"] for e in CHUNK_ENTITIES[i]]
        collected: list[Hyperedge] = []
        for tier in config.tiers:
            prompt = build_relation_prompt(chunk, tier, known, collected, [], config)
            raw = json.dumps({"relations": CHUNK_RELATIONS[i][tier]})
            provider.register(prompt, 0, raw)
            for edge in parse_relations(raw, default_tier=tier):
                collected.append(
                    Hyperedge(
                        relation=edge.relation,
                        members=edge.members,
                        tier=tier,
                        provenance={chunk.id},
                    )
                )


def main() -> None:
    config = ExtractionConfig()
    provider = RecordingProvider()
    register_fixtures(provider, config)
    gateway = Gateway(config=GatewayConfig(provider="scripted"), provider=provider)
    raw = extract_document(DOCUMENT, SkillLibrary(), gateway, None, config, source_id="golden_doc")
    graph = deduplicate_graph(raw, gateway, None)
    # Record embeddings for the edge render strings so the same fixture set
    # also supports evaluation runs over the golden graph.
    from hyperkg.evaluation import render_edge

    gateway.embed([render_edge(e) for e in graph.hyperedges])

    fixtures = DATA_DIR / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    (DATA_DIR / "golden_doc.txt").write_text(DOCUMENT, encoding="utf-8")
    (fixtures / "completions.json").write_text(
        json.dumps(provider.completions, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (fixtures / "embeddings.json").write_text(
        json.dumps(provider.recorded, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (DATA_DIR / "golden_doc.graph.json").write_text(graph_to_json(graph), encoding="utf-8")
    print(f"document: {len(DOCUMENT)} chars, {raw.chunk_count} chunks")
    print(f"graph: {len(graph.entities)} entities, {len(graph.hyperedges)} hyperedges")
    print(f"fixtures: {len(provider.completions)} completions, {len(provider.recorded)} embeddings")


if __name__ == "__main__":
    main()
