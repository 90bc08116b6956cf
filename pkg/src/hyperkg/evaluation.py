"""Semantic matching evaluation: optimal assignment, P/R/F1, PR curves,
fact-coverage verification, and one-hop evidence retrieval.

Predicted and gold hyperedges are rendered as "relation; participants: ..."
strings, embedded, scored with cosine similarity, and matched one-to-one with
an optimal linear assignment. A matched pair counts as a true positive at
threshold tau when its assigned similarity is >= tau.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import GatewayError, MatchingError, ResponseParseError, RetrievalError, VerificationError
from .extraction import fill_template, load_template
from .gateway import Gateway
from .model import Entity, Hyperedge, KnowledgeHypergraph
from .parsing import parse_verdict

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (0.65, 0.70, 0.75)


def render_edge(edge: Hyperedge) -> str:
    """Embedding key for a hyperedge: relation text plus sorted member names."""
    return f"{edge.relation}; participants: {', '.join(sorted(edge.member_set))}"


def render_entity(entity: Entity) -> str:
    return f"{entity.name}: {entity.description}" if entity.description else entity.name


@dataclass
class MatchResult:
    """One-to-one assignment between predicted and gold hyperedges."""

    assignment: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_pred: set[int] = field(default_factory=set)
    unmatched_gold: set[int] = field(default_factory=set)

    @property
    def total_similarity(self) -> float:
        return sum(sim for _, _, sim in self.assignment)

    def true_positives(self, threshold: float) -> int:
        return sum(1 for _, _, sim in self.assignment if sim >= threshold)


@dataclass
class PRPoint:
    threshold: float
    precision: float
    recall: float
    f1: float


def similarity_matrix(
    pred: list[Hyperedge], gold: list[Hyperedge], gateway: Gateway
) -> np.ndarray:
    texts = [render_edge(e) for e in pred] + [render_edge(e) for e in gold]
    try:
        vectors = np.asarray(gateway.embed(texts))
    except GatewayError as exc:
        raise MatchingError(f"embedding failed during matching: {exc}") from exc
    pred_vecs, gold_vecs = vectors[: len(pred)], vectors[len(pred) :]
    return pred_vecs @ gold_vecs.T


def match_from_matrix(sim: np.ndarray) -> MatchResult:
    """Optimal assignment maximizing total similarity over a (possibly
    rectangular) similarity matrix; assignment size is min of the two sides."""
    n_pred, n_gold = sim.shape
    if n_pred == 0 or n_gold == 0:
        return MatchResult(
            unmatched_pred=set(range(n_pred)), unmatched_gold=set(range(n_gold))
        )
    rows, cols = linear_sum_assignment(-sim)
    assignment = [(int(i), int(j), float(sim[i, j])) for i, j in zip(rows, cols)]
    assignment.sort()
    matched_pred = {i for i, _, _ in assignment}
    matched_gold = {j for _, j, _ in assignment}
    return MatchResult(
        assignment=assignment,
        unmatched_pred=set(range(n_pred)) - matched_pred,
        unmatched_gold=set(range(n_gold)) - matched_gold,
    )


def match_relations(
    pred: list[Hyperedge], gold: list[Hyperedge], gateway: Gateway
) -> MatchResult:
    """Semantically match predicted against gold hyperedges (either may be empty)."""
    if not pred or not gold:
        return MatchResult(
            unmatched_pred=set(range(len(pred))), unmatched_gold=set(range(len(gold)))
        )
    return match_from_matrix(similarity_matrix(pred, gold, gateway))


def score_prf(
    match: MatchResult, threshold: float, n_pred: int, n_gold: int
) -> tuple[float, float, float]:
    """Precision, recall, and F1 at the given similarity threshold."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    tp = match.true_positives(threshold)
    return prf_from_counts(tp, n_pred, n_gold)


def prf_from_counts(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def aggregate_corpus(
    per_doc: list[tuple[int, int, int]],
) -> dict[str, tuple[float, float, float]]:
    """Micro (pooled counts) and macro (per-doc means) P/R/F1 over (TP, n_pred, n_gold)."""
    if not per_doc:
        raise ValueError("per_doc must be non-empty")
    tp = sum(t for t, _, _ in per_doc)
    n_pred = sum(p for _, p, _ in per_doc)
    n_gold = sum(g for _, _, g in per_doc)
    micro = prf_from_counts(tp, n_pred, n_gold)
    doc_scores = [prf_from_counts(t, p, g) for t, p, g in per_doc]
    macro = tuple(sum(s[i] for s in doc_scores) / len(doc_scores) for i in range(3))
    return {"micro": micro, "macro": macro}  # type: ignore[dict-item]


def build_pr_curve(
    match: MatchResult, n_pred: int, n_gold: int, thresholds: list[float] | tuple[float, ...]
) -> list[PRPoint]:
    """One PRPoint per threshold, all computed from the same fixed assignment."""
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    points = []
    for tau in thresholds:
        precision, recall, f1 = score_prf(match, tau, n_pred, n_gold)
        points.append(PRPoint(threshold=tau, precision=precision, recall=recall, f1=f1))
    return points


@dataclass
class EvidenceSubgraph:
    entities: list[Entity] = field(default_factory=list)
    edges: list[Hyperedge] = field(default_factory=list)

    def render(self) -> str:
        lines = ["Entities:"]
        lines += [f"- {render_entity(e)}" for e in self.entities] or ["- (none)"]
        lines.append("Relations:")
        lines += [
            f"- {{{'; '.join(e.members)}}} -> {e.relation}" for e in self.edges
        ] or ["- (none)"]
        return "\n".join(lines)


def _rank_entities(fact: str, graph: KnowledgeHypergraph, gateway: Gateway) -> list[tuple[str, float]]:
    names = sorted(graph.entities)
    try:
        vectors = gateway.embed([fact] + [render_entity(graph.entities[n]) for n in names])
    except GatewayError as exc:
        raise RetrievalError(f"entity embedding failed: {exc}") from exc
    fact_vec = np.asarray(vectors[0])
    scores = [(name, float(fact_vec @ np.asarray(vec))) for name, vec in zip(names, vectors[1:])]
    scores.sort(key=lambda item: (-item[1], item[0]))
    return scores


def expand_neighborhood(
    graph: KnowledgeHypergraph, seeds: list[str], hops: int
) -> EvidenceSubgraph:
    """Breadth-first expansion over the entity-hyperedge incidence structure.

    One hop = entity -> incident hyperedges -> their member entities.
    """
    entities = {name for name in seeds if name in graph.entities}
    edges: list[Hyperedge] = []
    seen_edges: set[int] = set()
    frontier = set(entities)
    for _ in range(hops):
        next_frontier: set[str] = set()
        for i, edge in enumerate(graph.hyperedges):
            if i in seen_edges or not (edge.member_set & frontier):
                continue
            seen_edges.add(i)
            edges.append(edge)
            next_frontier |= edge.member_set - entities
        if not next_frontier:
            break
        entities |= next_frontier
        frontier = next_frontier
    ordered = [graph.entities[n] for n in sorted(entities)]
    return EvidenceSubgraph(entities=ordered, edges=edges)


def verify_fact(
    fact: str,
    graph: KnowledgeHypergraph,
    gateway: Gateway,
    top_n: int = 5,
    hops: int = 2,
    prompt_dir: str = "",
) -> tuple[int, EvidenceSubgraph]:
    """Judge whether the graph supports a fact from its top-node 2-hop evidence."""
    if not graph.entities:
        raise RetrievalError("cannot verify a fact against an empty graph")
    seeds = [name for name, _ in _rank_entities(fact, graph, gateway)[:top_n]]
    evidence = expand_neighborhood(graph, seeds, hops)
    template = load_template("fact_judge", prompt_dir or None)
    prompt = fill_template(template, fact=fact, evidence=evidence.render())
    for attempt in range(2):
        raw = gateway.complete(prompt, sample_index=attempt)
        try:
            return parse_verdict(raw), evidence
        except ResponseParseError:
            log.warning("judge verdict unparseable (attempt %d): %r", attempt + 1, raw)
    raise VerificationError(f"judge produced no 0/1 verdict for fact {fact!r}")


@dataclass
class ScoredItem:
    kind: str  # "entity" | "hyperedge"
    key: str
    score: float


@dataclass
class EvidenceBundle:
    entities: list[Entity] = field(default_factory=list)
    edges: list[Hyperedge] = field(default_factory=list)
    scores: list[ScoredItem] = field(default_factory=list)


def retrieve_evidence(
    query: str, graph: KnowledgeHypergraph, gateway: Gateway, k: int = 5
) -> EvidenceBundle:
    """Top-k entities and top-k hyperedges by query similarity, entities
    expanded one hop; deduplicated and ordered by score."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not graph.entities and not graph.hyperedges:
        return EvidenceBundle()
    names = sorted(graph.entities)
    edge_renders = [render_edge(e) for e in graph.hyperedges]
    try:
        vectors = gateway.embed(
            [query]
            + [render_entity(graph.entities[n]) for n in names]
            + edge_renders
        )
    except GatewayError as exc:
        raise RetrievalError(f"retrieval embedding failed: {exc}") from exc
    query_vec = np.asarray(vectors[0])
    entity_scores = [
        ScoredItem("entity", name, float(query_vec @ np.asarray(vec)))
        for name, vec in zip(names, vectors[1 : 1 + len(names)])
    ]
    edge_scores = [
        ScoredItem("hyperedge", render, float(query_vec @ np.asarray(vec)))
        for render, vec in zip(edge_renders, vectors[1 + len(names) :])
    ]
    entity_scores.sort(key=lambda s: (-s.score, s.key))
    edge_scores.sort(key=lambda s: (-s.score, s.key))
    top_entities = entity_scores[:k]
    top_edges = edge_scores[:k]

    selected_entities = {s.key for s in top_entities}
    selected_edge_idx: list[int] = []
    top_edge_renders = {s.key for s in top_edges}
    for i, render in enumerate(edge_renders):
        if render in top_edge_renders:
            selected_edge_idx.append(i)
    # One-hop expansion from the retrieved entities.
    for i, edge in enumerate(graph.hyperedges):
        if i not in selected_edge_idx and edge.member_set & selected_entities:
            selected_edge_idx.append(i)
    for i in selected_edge_idx:
        selected_entities |= graph.hyperedges[i].member_set
    bundle = EvidenceBundle(
        entities=[graph.entities[n] for n in sorted(selected_entities) if n in graph.entities],
        edges=[graph.hyperedges[i] for i in sorted(selected_edge_idx)],
        scores=top_entities + top_edges,
    )
    return bundle
