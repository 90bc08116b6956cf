"""Acceptance gate: ten checks covering metric arithmetic, oracle equivalence,
and deterministic end-to-end behavior. Each test prints one pass/fail line."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from hyperkg.chunking import ChunkingConfig, chunk_document
from hyperkg.dedup import DedupConfig, deduplicate_graph
from hyperkg.errors import SkillOpError
from hyperkg.evaluation import (
    DEFAULT_THRESHOLDS,
    MatchResult,
    build_pr_curve,
    expand_neighborhood,
    match_from_matrix,
    score_prf,
    verify_fact,
)
from hyperkg.extraction import (
    DocumentExtraction,
    ExtractionConfig,
    extract_document,
    fill_template,
    load_template,
)
from hyperkg.gateway import Gateway, GatewayConfig, ScriptedProvider
from hyperkg.model import Entity, Hyperedge, KnowledgeHypergraph, graph_to_json
from hyperkg.parsing import LibraryOp
from hyperkg.skills import Skill, SkillLibrary, apply_library_ops
from hyperkg.training import RolloutConfig, RolloutSet, partition_by_stability, run_learning_round

from conftest import make_gateway
from test_evaluation import bfs_oracle, brute_force_max

DATA = Path(__file__).parent / "data"


def report(capsys, name: str, ok: bool, detail: str = "") -> None:
    with capsys.disabled():
        suffix = f" ({detail})" if detail else ""
        print(f"acceptance {name}: {'PASS' if ok else 'FAIL'}{suffix}")
    assert ok, f"{name} failed {detail}"


def test_01_metric_arithmetic_matches_reference_rows(capsys):
    rows = [
        (0.8327, 0.3140, 0.4560),
        (0.8024, 0.4300, 0.5600),
    ]
    ok = True
    details = []
    for precision, recall, f1_expected in rows:
        tp = int(round(precision * 10000))
        n_pred = 10000
        n_gold = int(round(tp / recall))
        match = MatchResult(assignment=[(i, i, 1.0) for i in range(tp)])
        p, r, f1 = score_prf(match, 0.70, n_pred, n_gold)
        ok = ok and abs(p - precision) < 1e-4 and abs(f1 - f1_expected) <= 0.0005
        details.append(f"F1={f1:.4f} vs {f1_expected}")
    report(capsys, "01 metric arithmetic", ok, "; ".join(details))


def test_02_matching_equals_brute_force(capsys):
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 8))
        m = int(rng.integers(1, 8))
        sim = rng.random((n, m))
        got = match_from_matrix(sim).total_similarity
        worst = max(worst, abs(got - brute_force_max(sim)))
    report(capsys, "02 matching optimality", worst <= 1e-9, f"max deviation {worst:.2e}")


def test_03_stability_partition_matches_recount(capsys):
    rng = np.random.default_rng(3)
    gateway = make_gateway()
    config = RolloutConfig()
    gold_pool = [Hyperedge(relation=f"rel {g}", members=(f"n{g}a", f"n{g}b")) for g in range(10)]
    ok = True
    for _ in range(500):
        k = int(rng.integers(2, 9))
        n_gold = int(rng.integers(1, 11))
        gold = KnowledgeHypergraph()
        for g in range(n_gold):
            for m in gold_pool[g].members:
                gold.add_entity(Entity(name=m))
            gold.add_hyperedge(gold_pool[g])
        outcome = rng.random((k, n_gold)) < 0.5
        candidates = []
        for ki in range(k):
            cand = KnowledgeHypergraph()
            cand.hyperedges = [gold_pool[g] for g in range(n_gold) if outcome[ki, g]]
            candidates.append(cand)
        part = partition_by_stability(
            RolloutSet(document_id="d", candidates=candidates), gold, gateway, config
        )
        # Independent exhaustive recount straight from the outcome matrix.
        counts = {g: int(outcome[:, g].sum()) for g in range(n_gold)}
        ok = ok and part.counts == counts
        ok = ok and part.stable == {g for g, c in counts.items() if c == k}
        ok = ok and part.missed == {g for g, c in counts.items() if c == 0}
        ok = ok and part.unstable == set(counts) - part.stable - part.missed
        union = part.stable | part.unstable | part.missed
        ok = ok and union == set(range(n_gold))
        ok = ok and len(part.stable) + len(part.unstable) + len(part.missed) == n_gold
        if not ok:
            break
    report(capsys, "03 stability partition", ok)


def test_04_golden_extraction_byte_identical(capsys):
    document = (DATA / "golden_doc.txt").read_text(encoding="utf-8")
    golden = (DATA / "golden_doc.graph.json").read_text(encoding="utf-8")
    outputs = []
    for _ in range(3):
        gateway = Gateway(
            config=GatewayConfig(provider="scripted"),
            provider=ScriptedProvider.from_dir(DATA / "fixtures"),
        )
        raw = extract_document(
            document, SkillLibrary(), gateway, None, ExtractionConfig(), source_id="golden_doc"
        )
        outputs.append(graph_to_json(deduplicate_graph(raw, gateway, None)))
    ok = all(out == golden for out in outputs)
    report(capsys, "04 deterministic extraction", ok, "3 runs byte-identical to golden")


def test_05_chunker_coverage_property(capsys):
    rng = np.random.default_rng(5)
    alphabet = list("abcdefgh ")
    ok = True
    for _ in range(300):
        target = int(rng.integers(40, 300))
        overlap = int(rng.integers(0, target // 2))
        config = ChunkingConfig(target_size=target, overlap=overlap)
        length = int(target * rng.uniform(0.5, 5.0))
        chars = rng.choice(alphabet, size=max(1, length))
        doc = "".join(chars)
        # Sprinkle sentence and paragraph boundaries through the text.
        for _ in range(length // 40):
            i = int(rng.integers(0, max(1, length - 2)))
            doc = doc[:i] + (". " if rng.random() < 0.7 else "\n\n") + doc[i + 2 :]
        chunks = chunk_document(doc, config)
        covered = np.zeros(len(doc), dtype=bool)
        for chunk in chunks:
            start, end = chunk.span
            ok = ok and chunk.text == doc[start:end]
            covered[start:end] = True
        ok = ok and bool(covered.all())
        for prev, cur in zip(chunks, chunks[1:]):
            shared = prev.span[1] - cur.span[0]
            ok = ok and (shared == overlap or cur.span[0] == prev.span[0] + 1)
        again = chunk_document(doc, config)
        ok = ok and [c.span for c in again] == [c.span for c in chunks]
        if not ok:
            break
    report(capsys, "05 chunker coverage", ok)


def reference_apply(skills: list[Skill], ops: list[LibraryOp], round_before: int):
    """Independent interpreter: list-of-rows state, monotonically fresh ids."""
    state = [[s.id, s.trigger, s.action, list(s.lineage)] for s in skills]
    highest = -1
    for row in state:
        for sid in [row[0], *row[3]]:
            if sid.startswith("E") and sid[1:].isdigit():
                highest = max(highest, int(sid[1:]))
    nxt = highest + 1
    for op in ops:
        if op.op == "SKIP":
            continue
        if op.op == "ADD":
            state.append([f"E{nxt}", op.trigger, op.action, []])
            nxt += 1
        elif op.op == "DELETE":
            if not any(row[0] == op.target_id for row in state):
                raise KeyError(op.target_id)
            state = [row for row in state if row[0] != op.target_id]
        elif op.op == "MERGE":
            if any(not any(row[0] == i for row in state) for i in op.merge_with_ids):
                raise KeyError(op.merge_with_ids)
            state = [row for row in state if row[0] not in op.merge_with_ids]
            state.append([f"E{nxt}", op.trigger, op.action, list(op.merge_with_ids)])
            nxt += 1
    return state, round_before + 1


def random_op_script(rng) -> tuple[SkillLibrary, list[LibraryOp]]:
    n = int(rng.integers(0, 5))
    library = SkillLibrary(
        skills=[Skill(id=f"E{i}", trigger=f"t{i}", action=f"a{i}") for i in range(n)],
        round=int(rng.integers(0, 3)),
    )
    live = [s.id for s in library.skills]
    nxt = n  # fresh ids count up from the initial high-water mark
    ops: list[LibraryOp] = []
    for step in range(int(rng.integers(1, 9))):
        labels = ["ADD", "SKIP"]
        if live:
            labels += ["DELETE", "MERGE"]
        label = str(rng.choice(labels))
        if label == "ADD":
            ops.append(LibraryOp(op="ADD", trigger=f"nt{step}", action=f"na{step}"))
            live.append(f"E{nxt}")
            nxt += 1
        elif label == "SKIP":
            ops.append(LibraryOp(op="SKIP", reason="covered"))
        elif label == "DELETE":
            target = str(rng.choice(live))
            ops.append(LibraryOp(op="DELETE", target_id=target))
            live.remove(target)
        else:
            size = int(rng.integers(1, min(3, len(live)) + 1))
            chosen = [str(i) for i in rng.choice(live, size=size, replace=False)]
            ops.append(
                LibraryOp(op="MERGE", trigger=f"mt{step}", action=f"ma{step}", merge_with_ids=chosen)
            )
            live = [i for i in live if i not in chosen] + [f"E{nxt}"]
            nxt += 1
    return library, ops


def test_06_controller_replay_matches_reference(capsys):
    rng = np.random.default_rng(6)
    ok = True
    for _ in range(50):
        library, ops = random_op_script(rng)
        expected_state, expected_round = reference_apply(library.skills, ops, library.round)
        result = apply_library_ops(library, ops)
        got_state = [[s.id, s.trigger, s.action, list(s.lineage)] for s in result.skills]
        ok = ok and sorted(got_state) == sorted(expected_state)
        ok = ok and result.round == expected_round
        if not ok:
            break
    # Invalid scripts are rejected all-or-nothing.
    library, ops = random_op_script(np.random.default_rng(66))
    before = library.to_dict()
    bad = ops[: len(ops) // 2] + [LibraryOp(op="DELETE", target_id="E999")] + ops[len(ops) // 2 :]
    try:
        apply_library_ops(library, bad)
        ok = False
    except SkillOpError:
        ok = ok and library.to_dict() == before
    report(capsys, "06 controller replay", ok)


NAME_POOL = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
RELATION_POOL = [f"relation {i}" for i in range(8)]


def random_raw_graph(rng):
    present = [n for n in NAME_POOL if rng.random() < 0.8] or [NAME_POOL[0]]
    mentions: list[Entity] = []
    canonical: dict[str, str] = {}
    forms: dict[str, list[str]] = {}
    for name in present:
        lower = int(rng.integers(1, 4))
        upper = int(rng.integers(0, 3))
        while upper == lower:
            upper = int(rng.integers(0, 3))
        mentions += [Entity(name=name)] * lower
        mentions += [Entity(name=name.capitalize())] * upper
        # Frequency decides the canonical surface form; counts are never tied.
        winner = name if lower > upper else name.capitalize()
        forms[name] = [name] * lower + [name.capitalize()] * upper
        for form in (name, name.capitalize()):
            canonical[form] = winner
    edges: list[Hyperedge] = []
    for _ in range(int(rng.integers(1, 7))):
        size = int(rng.integers(2, min(4, len(present)) + 1))
        chosen = [str(n) for n in rng.choice(present, size=size, replace=False)]
        # Only surface forms that actually occur as mentions may appear in edges.
        surface = tuple(str(rng.choice(forms[n])) for n in chosen)
        relation = str(rng.choice(RELATION_POOL))
        tier = "binary" if len(surface) == 2 else "nary"
        edge = Hyperedge(relation=relation, members=surface, tier=tier)
        edges.append(edge)
        if rng.random() < 0.4:  # inject an exact duplicate
            edges.append(Hyperedge(relation=relation, members=surface, tier=tier))
    expected = set()
    for edge in edges:
        members = frozenset(canonical[m] for m in edge.members)
        if len(members) >= 2:
            expected.add((edge.relation, members))
    raw = DocumentExtraction(source_id="r", mentions=mentions, edges=edges)
    return raw, expected


def test_07_consolidation_idempotent_and_preserving(capsys):
    rng = np.random.default_rng(7)
    gateway = make_gateway()
    ok = True
    for _ in range(100):
        raw, expected = random_raw_graph(rng)
        once = deduplicate_graph(raw, gateway, DedupConfig())
        got = {(e.relation, frozenset(e.member_set)) for e in once.hyperedges}
        ok = ok and got == expected
        ok = ok and len(once.hyperedges) == len(expected)
        twice = deduplicate_graph(once, gateway, DedupConfig())
        ok = ok and once.to_dict() == twice.to_dict()
        if not ok:
            break
    report(capsys, "07 consolidation idempotence", ok)


def test_08_learning_round_integration(capsys):
    from test_training import CHUNK_CONFIG, DOC, scripted_learning_gateway

    gateway, gold = scripted_learning_gateway()
    library, round_report = run_learning_round(
        [(DOC, gold)], SkillLibrary(), gateway, RolloutConfig(k_samples=2), CHUNK_CONFIG
    )
    doc = round_report.documents[0]
    ok = (doc["stable"], doc["unstable"], doc["missed"]) == (1, 1, 1)
    ok = ok and doc["proposals"] == 2  # one path-induction plus one hindsight
    ok = ok and doc["ops"] == ["ADD", "ADD"]
    ok = ok and [s.id for s in library.skills] == ["E0", "E1"]
    ok = ok and round_report.library_size_after == 2
    report(capsys, "08 learning round", ok, f"counts {doc}")


def test_09_pr_curve_monotone_with_f1_identity(capsys):
    match = MatchResult(
        assignment=[(i, i, sim) for i, sim in enumerate([0.66, 0.68, 0.72, 0.74, 0.80, 0.30])]
    )
    points = build_pr_curve(match, 8, 7, DEFAULT_THRESHOLDS)
    recalls = [p.recall for p in points]
    ok = recalls[2] <= recalls[1] <= recalls[0]
    for p in points:
        expected = (
            2 * p.precision * p.recall / (p.precision + p.recall) if p.precision + p.recall else 0.0
        )
        ok = ok and p.f1 == pytest.approx(expected)
    report(capsys, "09 pr-curve monotonicity", ok, f"recalls {recalls}")


def test_10_fact_coverage_harness(capsys):
    graph = KnowledgeHypergraph()
    for name in ("pong", "atari", "atari 2600", "arcade", "spacewar!", "1962", "mit", "pdp-1"):
        graph.add_entity(Entity(name=name))
    for relation, members in [
        ("made", ("atari", "pong")),
        ("released for", ("pong", "atari 2600")),
        ("is a", ("pong", "arcade")),
        ("developed in", ("spacewar!", "1962")),
        ("developed at", ("spacewar!", "mit")),
        ("ran on", ("spacewar!", "pdp-1")),
    ]:
        graph.add_hyperedge(Hyperedge(relation=relation, members=members, tier="binary"))
    facts = [
        "Atari made Pong.",
        "Pong was released for the Atari 2600.",
        "Pong is an arcade game.",
        "Spacewar! was developed in 1962 at MIT.",
        "Spacewar! ran on the PDP-1.",
    ]
    gateway = make_gateway()
    template = load_template("fact_judge")
    from hyperkg.evaluation import _rank_entities

    verdicts = []
    ok = True
    for fact in facts:
        seeds = [name for name, _ in _rank_entities(fact, graph, gateway)[:5]]
        evidence = expand_neighborhood(graph, seeds, 2)
        want_entities, want_edges = bfs_oracle(graph, seeds, 2)
        ok = ok and {e.name for e in evidence.entities} == want_entities
        ok = ok and {id(e) for e in evidence.edges} == {id(graph.hyperedges[i]) for i in want_edges}
        gateway.provider.register(
            fill_template(template, fact=fact, evidence=evidence.render()), 0, "1"
        )
        verdict, _ = verify_fact(fact, graph, gateway)
        verdicts.append(verdict)
    accuracy = sum(verdicts) / len(verdicts)
    ok = ok and accuracy == 1.0
    report(capsys, "10 fact coverage", ok, f"accuracy {accuracy}")
