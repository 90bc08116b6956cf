"""Knowledge hypergraph extraction with an evolving skill library."""

from .chunking import Chunk, ChunkingConfig, chunk_document
from .dedup import DedupConfig, cluster_entities, deduplicate_graph
from .evaluation import (
    MatchResult,
    PRPoint,
    aggregate_corpus,
    build_pr_curve,
    match_relations,
    retrieve_evidence,
    score_prf,
    verify_fact,
)
from .extraction import DocumentExtraction, ExtractionConfig, extract_document
from .gateway import Gateway, GatewayConfig, ScriptedProvider
from .model import (
    Entity,
    Hyperedge,
    KnowledgeHypergraph,
    load_graph,
    save_graph,
    validate_hypergraph,
)
from .skills import Skill, SkillLibrary, apply_library_ops, render_skill_block, select_skills
from .training import (
    RolloutConfig,
    RolloutSet,
    StabilityPartition,
    partition_by_stability,
    run_learning_round,
    sample_rollouts,
)

__version__ = "0.1.0"

__all__ = [
    "Chunk",
    "ChunkingConfig",
    "chunk_document",
    "DedupConfig",
    "cluster_entities",
    "deduplicate_graph",
    "MatchResult",
    "PRPoint",
    "aggregate_corpus",
    "build_pr_curve",
    "match_relations",
    "retrieve_evidence",
    "score_prf",
    "verify_fact",
    "DocumentExtraction",
    "ExtractionConfig",
    "extract_document",
    "Gateway",
    "GatewayConfig",
    "ScriptedProvider",
    "Entity",
    "Hyperedge",
    "KnowledgeHypergraph",
    "load_graph",
    "save_graph",
    "validate_hypergraph",
    "Skill",
    "SkillLibrary",
    "apply_library_ops",
    "render_skill_block",
    "select_skills",
    "RolloutConfig",
    "RolloutSet",
    "StabilityPartition",
    "partition_by_stability",
    "run_learning_round",
    "sample_rollouts",
]
