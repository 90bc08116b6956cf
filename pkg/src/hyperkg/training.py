"""Closed-loop skill acquisition: rollouts, stability partitioning, reflection,
and library update.

A gold relation counts as retrieved in one rollout when the optimal matching
assigns it a predicted edge with similarity >= the training threshold. Gold
relations retrieved in every rollout are stable (ignored), in some rollouts
unstable (path induction over a successful trace), and in none missed
(hindsight reasoning conditioned on the gold edge).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .chunking import ChunkingConfig
from .dedup import DedupConfig, deduplicate_graph
from .errors import HyperKGError, ReflectionError, ResponseParseError, RolloutError
from .extraction import ExtractionConfig, extract_document, fill_template, load_template
from .evaluation import match_relations
from .gateway import Gateway
from .model import Hyperedge, KnowledgeHypergraph
from .parsing import InsightProposal, LibraryOp, parse_insights, parse_library_ops
from .skills import SkillLibrary, apply_library_ops, render_skill_pool

log = logging.getLogger(__name__)


@dataclass
class RolloutConfig:
    k_samples: int = 4
    temperature: float = 0.8
    train_match_threshold: float = 0.70

    def validate(self) -> None:
        if self.k_samples < 2:
            raise RolloutError(f"k_samples must be >= 2, got {self.k_samples}")
        if self.temperature <= 0:
            raise RolloutError(f"temperature must be > 0, got {self.temperature}")
        if not 0 < self.train_match_threshold <= 1:
            raise RolloutError(
                f"train_match_threshold must be in (0, 1], got {self.train_match_threshold}"
            )


@dataclass
class RolloutSet:
    document_id: str
    candidates: list[KnowledgeHypergraph]
    traces: list[list[str]] = field(default_factory=list)


@dataclass
class StabilityPartition:
    counts: dict[int, int]
    stable: set[int]
    unstable: set[int]
    missed: set[int]
    # gold edge index -> [(candidate index, matched predicted edge), ...]
    witness: dict[int, list[tuple[int, Hyperedge]]] = field(default_factory=dict)


def sample_rollouts(
    document: str,
    skills: SkillLibrary,
    gateway: Gateway,
    rollout_config: RolloutConfig,
    chunk_config: ChunkingConfig | None = None,
    extraction_config: ExtractionConfig | None = None,
    dedup_config: DedupConfig | None = None,
    document_id: str = "doc",
) -> RolloutSet:
    """Run the full extract+consolidate pipeline K times at distinct sample indices."""
    rollout_config.validate()
    saved_temperature = gateway.config.temperature
    gateway.config.temperature = rollout_config.temperature
    candidates: list[KnowledgeHypergraph] = []
    traces: list[list[str]] = []
    try:
        for k in range(rollout_config.k_samples):
            last_error: Exception | None = None
            for attempt in range(2):
                try:
                    raw = extract_document(
                        document,
                        skills,
                        gateway,
                        chunk_config,
                        extraction_config,
                        sample_index=k,
                        source_id=document_id,
                    )
                    candidates.append(deduplicate_graph(raw, gateway, dedup_config))
                    traces.append(list(raw.responses))
                    last_error = None
                    break
                except HyperKGError as exc:
                    last_error = exc
                    log.warning("rollout %d attempt %d failed: %s", k, attempt + 1, exc)
            if last_error is not None:
                raise RolloutError(f"rollout sample {k} failed persistently: {last_error}")
    finally:
        gateway.config.temperature = saved_temperature
    return RolloutSet(document_id=document_id, candidates=candidates, traces=traces)


def partition_by_stability(
    rollouts: RolloutSet,
    gold: KnowledgeHypergraph,
    gateway: Gateway,
    rollout_config: RolloutConfig,
) -> StabilityPartition:
    """Count per-gold-edge retrievals across candidates and derive the three sets."""
    if not gold.hyperedges:
        raise ValueError("gold graph has no hyperedges to partition")
    k_total = len(rollouts.candidates)
    tau = rollout_config.train_match_threshold
    counts = {i: 0 for i in range(len(gold.hyperedges))}
    witness: dict[int, list[tuple[int, Hyperedge]]] = {}
    for k, candidate in enumerate(rollouts.candidates):
        match = match_relations(candidate.hyperedges, gold.hyperedges, gateway)
        for pred_idx, gold_idx, sim in match.assignment:
            if sim >= tau:
                counts[gold_idx] += 1
                witness.setdefault(gold_idx, []).append((k, candidate.hyperedges[pred_idx]))
    stable = {i for i, c in counts.items() if c == k_total}
    missed = {i for i, c in counts.items() if c == 0}
    unstable = set(counts) - stable - missed
    return StabilityPartition(
        counts=counts, stable=stable, unstable=unstable, missed=missed, witness=witness
    )


def _gold_slots(gold_edge: Hyperedge) -> dict[str, str]:
    return {
        "nodes": "; ".join(gold_edge.members),
        "type": gold_edge.tier,
        "description": gold_edge.relation,
    }


def _reflect(
    template_name: str,
    slots: dict[str, str],
    origin: str,
    gateway: Gateway,
    prompt_dir: str = "",
) -> InsightProposal:
    template = load_template(template_name, prompt_dir or None)
    prompt = fill_template(template, **slots)
    for attempt in range(2):
        raw = gateway.complete(prompt, sample_index=attempt)
        try:
            proposals = parse_insights(raw, origin=origin)
        except ResponseParseError as exc:
            log.warning("reflection parse failed (attempt %d): %s", attempt + 1, exc)
            continue
        if len(proposals) > 1:
            log.warning("reflection returned %d insight blocks; taking the first", len(proposals))
        return proposals[0]
    raise ReflectionError(f"no usable insight after reprompt (origin={origin})")


def induce_from_unstable(
    gold_edge: Hyperedge,
    witnesses: list[tuple[int, Hyperedge]],
    document: str,
    gateway: Gateway,
    rollouts: RolloutSet | None = None,
    prompt_dir: str = "",
) -> InsightProposal:
    """Distill a skill from a successful trajectory of an unstable gold relation."""
    if not witnesses:
        raise ReflectionError("induce_from_unstable requires at least one witness")
    candidate_idx, pred_edge = witnesses[0]
    reasoning = "(no reasoning trace captured)"
    if rollouts is not None and candidate_idx < len(rollouts.traces):
        trace = rollouts.traces[candidate_idx]
        if trace:
            reasoning = "\n".join(trace)
    slots = _gold_slots(gold_edge)
    slots["text"] = document
    slots["success reasoning"] = reasoning
    slots["success edge"] = f"{{{'; '.join(pred_edge.members)}}} -> {pred_edge.relation}"
    proposal = _reflect("reflect_unstable", slots, "unstable", gateway, prompt_dir)
    proposal.source_relation = gold_edge.relation
    _lint_entity_names(proposal, gold_edge)
    return proposal


def hindsight_from_missed(
    gold_edge: Hyperedge,
    document: str,
    gateway: Gateway,
    prompt_dir: str = "",
) -> InsightProposal:
    """Distill a skill for a missed gold relation, conditioned on the gold edge only."""
    slots = _gold_slots(gold_edge)
    slots["text"] = document
    proposal = _reflect("reflect_missed", slots, "missed", gateway, prompt_dir)
    proposal.source_relation = gold_edge.relation
    _lint_entity_names(proposal, gold_edge)
    return proposal


def _lint_entity_names(proposal: InsightProposal, gold_edge: Hyperedge) -> None:
    # Entity names in insights are discouraged but not enforced.
    text = f"{proposal.trigger} {proposal.action}".casefold()
    offenders = [m for m in gold_edge.members if m.casefold() in text]
    if offenders:
        log.warning("insight mentions specific entity names %s (lint only)", offenders)


@dataclass
class RoundReport:
    round: int
    documents: list[dict] = field(default_factory=list)
    ops_applied: int = 0
    library_size_before: int = 0
    library_size_after: int = 0

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "documents": self.documents,
            "ops_applied": self.ops_applied,
            "library_size_before": self.library_size_before,
            "library_size_after": self.library_size_after,
        }


def _controller_ops(
    proposals: list[InsightProposal],
    library: SkillLibrary,
    gateway: Gateway,
    prompt_dir: str = "",
) -> list[LibraryOp]:
    template = load_template("skill_update", prompt_dir or None)
    prompt = fill_template(
        template,
        **{
            "existing experiences": render_skill_pool(library),
            "new experiences": "\n\n".join(p.render_block() for p in proposals),
        },
    )
    raw = gateway.complete(prompt, sample_index=0)
    return parse_library_ops(raw)


def run_learning_round(
    train_docs: list[tuple[str, KnowledgeHypergraph]],
    library: SkillLibrary,
    gateway: Gateway,
    rollout_config: RolloutConfig | None = None,
    chunk_config: ChunkingConfig | None = None,
    extraction_config: ExtractionConfig | None = None,
    dedup_config: DedupConfig | None = None,
    update_between_docs: bool = True,
    prompt_dir: str = "",
) -> tuple[SkillLibrary, RoundReport]:
    """One learning round over the training documents.

    Stable gold edges produce no proposals. Proposals for one document are
    batched into a single controller call. By default the updated library is
    used for subsequent documents within the round.
    """
    if not train_docs:
        raise ValueError("train_docs must be non-empty")
    rollout_config = rollout_config or RolloutConfig()
    rollout_config.validate()
    report = RoundReport(round=library.round + 1, library_size_before=len(library.skills))
    current = library
    pending_ops: list[LibraryOp] = []
    failures = 0
    for doc_index, (document, gold) in enumerate(train_docs):
        doc_id = gold.source_id or f"doc{doc_index}"
        doc_report: dict = {"document_id": doc_id}
        try:
            rollouts = sample_rollouts(
                document,
                current,
                gateway,
                rollout_config,
                chunk_config,
                extraction_config,
                dedup_config,
                document_id=doc_id,
            )
            partition = partition_by_stability(rollouts, gold, gateway, rollout_config)
            doc_report.update(
                stable=len(partition.stable),
                unstable=len(partition.unstable),
                missed=len(partition.missed),
            )
            proposals: list[InsightProposal] = []
            for gold_idx in sorted(partition.unstable):
                try:
                    proposals.append(
                        induce_from_unstable(
                            gold.hyperedges[gold_idx],
                            partition.witness.get(gold_idx, []),
                            document,
                            gateway,
                            rollouts,
                            prompt_dir,
                        )
                    )
                except ReflectionError as exc:
                    log.warning("unstable reflection skipped for edge %d: %s", gold_idx, exc)
            for gold_idx in sorted(partition.missed):
                try:
                    proposals.append(
                        hindsight_from_missed(
                            gold.hyperedges[gold_idx], document, gateway, prompt_dir
                        )
                    )
                except ReflectionError as exc:
                    log.warning("missed reflection skipped for edge %d: %s", gold_idx, exc)
            doc_report["proposals"] = len(proposals)
            ops: list[LibraryOp] = []
            if proposals:
                ops = _controller_ops(proposals, current, gateway, prompt_dir)
            doc_report["ops"] = [op.op for op in ops]
            if update_between_docs:
                if ops:
                    current = apply_library_ops(current, ops)
                    current.round = library.round  # one increment per round, applied below
                    report.ops_applied += len([op for op in ops if op.op != "SKIP"])
            else:
                pending_ops.extend(ops)
        except HyperKGError as exc:
            log.warning("document %s failed in learning round: %s", doc_id, exc)
            doc_report["error"] = str(exc)
            failures += 1
        report.documents.append(doc_report)
    if failures == len(train_docs):
        raise RolloutError("every training document failed in this learning round")
    if not update_between_docs and pending_ops:
        current = apply_library_ops(current, pending_ops)
        current.round = library.round
        report.ops_applied += len([op for op in pending_ops if op.op != "SKIP"])
    result = SkillLibrary(skills=current.skills, round=library.round + 1)
    report.library_size_after = len(result.skills)
    return result, report
