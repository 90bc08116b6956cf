"""Global deduplication: entity coreference clustering and hyperedge merging.

Entity mentions cluster by case-folded canonical-name equality and by
embedding similarity of "name: description" strings (single-link connected
components). Hyperedges merge only when their canonical member sets are
identical AND their relation descriptions are semantically close; member-set
equality keeps distinct facts that share phrasing apart.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import GatewayError
from .extraction import DocumentExtraction
from .gateway import Gateway, cosine
from .model import Entity, Hyperedge, KnowledgeHypergraph, canonical_name

log = logging.getLogger(__name__)


@dataclass
class DedupConfig:
    entity_sim_threshold: float = 0.90
    edge_sim_threshold: float = 0.85
    fusion_mode: str = "concat_unique"

    def validate(self) -> None:
        for name, value in (
            ("entity_sim_threshold", self.entity_sim_threshold),
            ("edge_sim_threshold", self.edge_sim_threshold),
        ):
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if self.fusion_mode not in ("concat_unique", "llm_summarize"):
            raise ValueError(f"unknown fusion_mode {self.fusion_mode!r}")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _fuse_texts(texts: list[str], mode: str, gateway: Gateway | None) -> str:
    """Combine descriptions; concat_unique keeps unique texts in source order."""
    unique: list[str] = []
    for text in texts:
        text = text.strip()
        if text and text not in unique:
            unique.append(text)
    if not unique:
        return ""
    if mode == "llm_summarize" and gateway is not None and len(unique) > 1:
        prompt = (
            "Synthesize the following descriptions of the same item into one "
            "concise description, aggregating details without repetition.\n\n"
            + "\n".join(f"- {t}" for t in unique)
        )
        try:
            return gateway.complete(prompt).strip()
        except GatewayError as exc:
            log.warning("llm_summarize fusion failed (%s); falling back to concat", exc)
    return " ".join(unique)


def cluster_entities(
    mentions: list[Entity], gateway: Gateway | None, config: DedupConfig | None = None
) -> list[list[Entity]]:
    """Partition mentions into coreference clusters.

    Exact matches after case-folded canonicalization always cluster; embedding
    links at entity_sim_threshold add cross-surface-form clusters. Falls back
    to exact-name clustering when embedding fails.
    """
    if not mentions:
        raise ValueError("mentions must be non-empty")
    config = config or DedupConfig()
    config.validate()
    uf = _UnionFind(len(mentions))
    by_folded: dict[str, int] = {}
    for i, mention in enumerate(mentions):
        folded = canonical_name(mention.name).casefold()
        if folded in by_folded:
            uf.union(by_folded[folded], i)
        else:
            by_folded[folded] = i
    if gateway is not None:
        texts = [f"{m.name}: {m.description}" if m.description else m.name for m in mentions]
        try:
            vectors = gateway.embed(texts)
        except GatewayError as exc:
            log.warning("entity embedding failed (%s); exact-name clustering only", exc)
            vectors = None
        if vectors is not None:
            for i in range(len(mentions)):
                for j in range(i + 1, len(mentions)):
                    if cosine(vectors[i], vectors[j]) >= config.entity_sim_threshold:
                        uf.union(i, j)
    clusters: dict[int, list[Entity]] = {}
    for i, mention in enumerate(mentions):
        clusters.setdefault(uf.find(i), []).append(mention)
    return [clusters[root] for root in sorted(clusters)]


def elect_canonical(cluster: list[Entity]) -> str:
    """Most frequent surface form; ties broken by longest form, then lexicographic."""
    counts: dict[str, int] = {}
    for mention in cluster:
        name = canonical_name(mention.name)
        counts[name] = counts.get(name, 0) + 1
    return max(counts, key=lambda name: (counts[name], len(name), [-ord(c) for c in name]))


def _merged_entity(cluster: list[Entity], config: DedupConfig, gateway: Gateway | None) -> Entity:
    name = elect_canonical(cluster)
    aliases: set[str] = set()
    provenance: set[str] = set()
    for mention in cluster:
        surface = canonical_name(mention.name)
        if surface != name:
            aliases.add(surface)
        aliases |= {a for a in mention.aliases if a != name}
        provenance |= mention.provenance
    entity_type = next((m.entity_type for m in cluster if m.entity_type), "")
    description = _fuse_texts([m.description for m in cluster], config.fusion_mode, gateway)
    return Entity(
        name=name,
        entity_type=entity_type,
        description=description,
        aliases=aliases,
        provenance=provenance,
    )


def _merge_edge_group(
    edges: list[Hyperedge], gateway: Gateway | None, config: DedupConfig
) -> list[Hyperedge]:
    """Merge same-member-set edges whose relation texts are semantically close."""
    if len(edges) == 1:
        return list(edges)
    uf = _UnionFind(len(edges))
    vectors = None
    if gateway is not None:
        try:
            vectors = gateway.embed([e.relation for e in edges])
        except GatewayError as exc:
            log.warning("edge embedding failed (%s); exact-text merging only", exc)
    for i in range(len(edges)):
        for j in range(i + 1, len(edges)):
            if edges[i].relation == edges[j].relation:
                uf.union(i, j)
            elif vectors is not None and cosine(vectors[i], vectors[j]) >= config.edge_sim_threshold:
                uf.union(i, j)
    groups: dict[int, list[Hyperedge]] = {}
    for i, edge in enumerate(edges):
        groups.setdefault(uf.find(i), []).append(edge)
    merged = []
    for root in sorted(groups):
        group = groups[root]
        first = group[0]
        relation = _fuse_texts([e.relation for e in group], config.fusion_mode, gateway)
        provenance: set[str] = set()
        for edge in group:
            provenance |= edge.provenance
        # Coarsest tier among the merged instances wins (skeleton-first reading).
        tier = min(group, key=lambda e: ("binary", "qualified_binary", "nary").index(e.tier)).tier
        merged.append(
            Hyperedge(relation=relation, members=first.members, tier=tier, provenance=provenance)
        )
    return merged


def deduplicate_graph(
    raw: DocumentExtraction | KnowledgeHypergraph,
    gateway: Gateway | None,
    config: DedupConfig | None = None,
) -> KnowledgeHypergraph:
    """Collapse entity clusters, rewrite edge members, and merge duplicate edges.

    Accepts either a raw extraction or an already-consolidated graph (so the
    operation can be applied idempotently). Every input edge maps into exactly
    one output edge unless member rewriting collapses it below 2 distinct
    members, which is logged and dropped.
    """
    config = config or DedupConfig()
    config.validate()
    if isinstance(raw, KnowledgeHypergraph):
        mentions = list(raw.entities.values())
        edges = list(raw.hyperedges)
        source_id = raw.source_id
    else:
        mentions = list(raw.mentions)
        edges = list(raw.edges)
        source_id = raw.source_id
    graph = KnowledgeHypergraph(source_id=source_id)
    if not mentions:
        return graph
    clusters = cluster_entities(mentions, gateway, config)
    rename: dict[str, str] = {}
    for cluster in clusters:
        entity = _merged_entity(cluster, config, gateway)
        graph.add_entity(entity)
        for mention in cluster:
            rename[canonical_name(mention.name)] = entity.name

    by_members: dict[frozenset[str], list[Hyperedge]] = {}
    for edge in edges:
        members = []
        for member in edge.members:
            target = rename.get(canonical_name(member))
            if target is not None and target not in members:
                members.append(target)
        if len(members) < 2:
            log.warning("dropping edge %r: members collapsed below 2 after rewrite", edge.relation)
            continue
        tier = edge.tier
        if tier == "binary" and len(members) != 2:
            tier = "nary"
        if tier == "qualified_binary" and len(members) < 3:
            tier = "nary"
        rewritten = Hyperedge(
            relation=edge.relation, members=tuple(members), tier=tier, provenance=set(edge.provenance)
        )
        by_members.setdefault(rewritten.member_set, []).append(rewritten)
    for member_set in sorted(by_members, key=lambda s: sorted(s)):
        for merged in _merge_edge_group(by_members[member_set], gateway, config):
            graph.add_hyperedge(merged)
    return graph
