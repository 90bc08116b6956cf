"""Command-line entry points tying the pipeline together.

Exit codes: 0 success, 1 pipeline error, 2 usage error, 3 missing scripted
fixture.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import RunConfig, load_run_config
from .dedup import deduplicate_graph
from .errors import FixtureMissError, HyperKGError
from .evaluation import (
    DEFAULT_THRESHOLDS,
    PRPoint,
    match_relations,
    prf_from_counts,
    verify_fact,
)
from .extraction import extract_document
from .gateway import Gateway
from .model import load_graph, save_graph
from .reporting import (
    plot_fact_accuracy,
    plot_pr_curve,
    plot_skill_growth,
    write_json_report,
    write_pr_csv,
)
from .skills import SkillLibrary, load_library, save_library
from .training import run_learning_round

log = logging.getLogger(__name__)


def _build_gateway(config: RunConfig) -> Gateway:
    return Gateway(config=config.gateway)


def _load_skills(path: str | None) -> SkillLibrary:
    if path and Path(path).exists():
        return load_library(path)
    return SkillLibrary()


def _output_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON run configuration file.")
@click.option("--provider", type=click.Choice(["live", "scripted"]), default=None,
              help="Override the gateway provider.")
@click.option("--fixtures-dir", type=click.Path(), default=None,
              help="Scripted-provider fixture directory.")
@click.option("--output-dir", type=click.Path(), default=None, help="Results directory.")
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
@click.pass_context
def main(ctx, config_path, provider, fixtures_dir, output_dir, verbose):
    """Knowledge hypergraph extraction, skill learning, and evaluation."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)
    config = load_run_config(config_path)
    if provider:
        config.gateway.provider = provider
    if fixtures_dir:
        config.gateway.fixtures_dir = fixtures_dir
    if output_dir:
        config.output_dir = output_dir
    ctx.obj = config


@main.command()
@click.argument("document", type=click.Path(exists=True))
@click.option("--skills", "skills_path", type=click.Path(), default=None,
              help="Skill library JSON to inject during extraction.")
@click.option("--source-id", default=None, help="Document identifier (default: file stem).")
@click.pass_obj
def extract(config: RunConfig, document, skills_path, source_id):
    """Extract a consolidated knowledge hypergraph from DOCUMENT."""
    text = Path(document).read_text(encoding="utf-8")
    source_id = source_id or Path(document).stem
    gateway = _build_gateway(config)
    library = _load_skills(skills_path or config.skill_library)
    raw = extract_document(
        text, library, gateway, config.chunking, config.extraction, source_id=source_id
    )
    graph = deduplicate_graph(raw, gateway, config.dedup)
    out = _output_dir(config) / f"{source_id}.graph.json"
    save_graph(graph, out)
    click.echo(f"wrote {out} ({len(graph.entities)} entities, {len(graph.hyperedges)} hyperedges)")


@main.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--skills", "skills_path", type=click.Path(), required=True,
              help="Skill library JSON file (created if missing, updated in place).")
@click.option("--rounds", type=int, default=1, show_default=True, help="Learning rounds to run.")
@click.pass_obj
def learn(config: RunConfig, manifest, skills_path, rounds):
    """Run skill-learning rounds over the MANIFEST of training documents.

    MANIFEST is a JSON list of {"document_path": ..., "gold_graph_path": ...}.
    """
    if rounds < 1:
        raise click.UsageError(f"--rounds must be >= 1, got {rounds}")
    entries = json.loads(Path(manifest).read_text(encoding="utf-8"))
    if not isinstance(entries, list) or not entries:
        raise click.UsageError("manifest must be a non-empty JSON list")
    train_docs = []
    for entry in entries:
        document = Path(entry["document_path"]).read_text(encoding="utf-8")
        gold = load_graph(entry["gold_graph_path"])
        train_docs.append((document, gold))
    gateway = _build_gateway(config)
    library = _load_skills(skills_path)
    out = _output_dir(config)
    reports = []
    for _ in range(rounds):
        library, report = run_learning_round(
            train_docs,
            library,
            gateway,
            config.rollout,
            config.chunking,
            config.extraction,
            config.dedup,
            prompt_dir=config.extraction.prompt_dir,
        )
        save_library(library, skills_path)
        report_path = out / f"round_report_{report.round:03d}.json"
        write_json_report(report.to_dict(), report_path)
        reports.append(report.to_dict())
        click.echo(
            f"round {report.round}: library {report.library_size_before} -> "
            f"{report.library_size_after} skills ({report.ops_applied} ops)"
        )
    plot_skill_growth(reports, out / "skill_growth.png")


def _threshold_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad threshold list {text!r}: {exc}")
    if not values or values != sorted(values):
        raise click.UsageError("thresholds must be a non-empty ascending list")
    return values


@main.command(name="eval")
@click.argument("pred_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("gold_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--thresholds", default=",".join(str(t) for t in DEFAULT_THRESHOLDS),
              show_default=True, help="Comma-separated ascending similarity thresholds.")
@click.pass_obj
def eval_cmd(config: RunConfig, pred_dir, gold_dir, thresholds):
    """Score predicted graphs in PRED_DIR against gold graphs in GOLD_DIR."""
    taus = _threshold_list(thresholds)
    gold_files = {p.name: p for p in sorted(Path(gold_dir).glob("*.json"))}
    pred_files = {p.name: p for p in sorted(Path(pred_dir).glob("*.json"))}
    shared = sorted(set(gold_files) & set(pred_files))
    if not shared:
        raise click.UsageError("no matching graph file names between pred and gold dirs")
    gateway = _build_gateway(config)
    per_doc: dict[str, dict] = {}
    pooled: dict[float, list[tuple[int, int, int]]] = {tau: [] for tau in taus}
    for name in shared:
        pred = load_graph(pred_files[name])
        gold = load_graph(gold_files[name])
        match = match_relations(pred.hyperedges, gold.hyperedges, gateway)
        n_pred, n_gold = len(pred.hyperedges), len(gold.hyperedges)
        doc_scores = {}
        for tau in taus:
            tp = match.true_positives(tau)
            pooled[tau].append((tp, n_pred, n_gold))
            precision, recall, f1 = prf_from_counts(tp, n_pred, n_gold)
            doc_scores[f"{tau:.2f}"] = {"precision": precision, "recall": recall, "f1": f1}
        per_doc[name] = doc_scores
    points = []
    report_thresholds = {}
    for tau in taus:
        docs = pooled[tau]
        tp = sum(t for t, _, _ in docs)
        n_pred = sum(p for _, p, _ in docs)
        n_gold = sum(g for _, _, g in docs)
        micro = prf_from_counts(tp, n_pred, n_gold)
        doc_scores = [prf_from_counts(t, p, g) for t, p, g in docs]
        macro = tuple(sum(s[i] for s in doc_scores) / len(doc_scores) for i in range(3))
        points.append(PRPoint(threshold=tau, precision=micro[0], recall=micro[1], f1=micro[2]))
        report_thresholds[f"{tau:.2f}"] = {
            "micro": {"precision": micro[0], "recall": micro[1], "f1": micro[2]},
            "macro": {"precision": macro[0], "recall": macro[1], "f1": macro[2]},
        }
    out = _output_dir(config)
    write_pr_csv(points, out / "pr_curve.csv")
    plot_pr_curve(points, out / "pr_curve.png")
    write_json_report(
        {
            "embedding_model_id": config.gateway.embedding_model_id,
            "match_render": "relation + participants",
            "documents": per_doc,
            "thresholds": report_thresholds,
        },
        out / "eval_report.json",
    )
    for point in points:
        click.echo(
            f"tau={point.threshold:.2f} micro P={point.precision:.4f} "
            f"R={point.recall:.4f} F1={point.f1:.4f}"
        )
    click.echo(f"wrote {out / 'eval_report.json'}, {out / 'pr_curve.csv'}, {out / 'pr_curve.png'}")


@main.command()
@click.argument("facts_file", type=click.Path(exists=True))
@click.argument("graph_file", type=click.Path(exists=True))
@click.option("--top-n", type=int, default=5, show_default=True)
@click.option("--hops", type=int, default=2, show_default=True)
@click.pass_obj
def factcheck(config: RunConfig, facts_file, graph_file, top_n, hops):
    """Verify each fact (one per line in FACTS_FILE) against GRAPH_FILE."""
    facts = [l.strip() for l in Path(facts_file).read_text(encoding="utf-8").splitlines() if l.strip()]
    if not facts:
        raise click.UsageError("facts file contains no facts")
    graph = load_graph(graph_file)
    gateway = _build_gateway(config)
    verdicts = []
    for fact in facts:
        supported, evidence = verify_fact(
            fact, graph, gateway, top_n=top_n, hops=hops,
            prompt_dir=config.extraction.prompt_dir,
        )
        verdicts.append(
            {
                "fact": fact,
                "supported": supported,
                "evidence_entities": [e.name for e in evidence.entities],
                "evidence_edges": [e.relation for e in evidence.edges],
            }
        )
    accuracy = sum(v["supported"] for v in verdicts) / len(verdicts)
    out = _output_dir(config)
    write_json_report({"accuracy": accuracy, "verdicts": verdicts}, out / "factcheck.json")
    plot_fact_accuracy(verdicts, out / "fact_accuracy.png")
    click.echo(f"accuracy {accuracy:.4f} over {len(verdicts)} facts -> {out / 'factcheck.json'}")


@main.group()
def library():
    """Inspect skill library files."""


@library.command()
@click.argument("library_file", type=click.Path(exists=True))
def show(library_file):
    """Print the skills in LIBRARY_FILE."""
    lib = load_library(library_file)
    click.echo(f"round {lib.round}, {len(lib.skills)} skills")
    for skill in lib.skills:
        click.echo(f"[{skill.id}] (round {skill.created_round})")
        click.echo(f"  trigger: {skill.trigger}")
        click.echo(f"  action:  {skill.action}")
        if skill.lineage:
            click.echo(f"  lineage: {', '.join(skill.lineage)}")


@library.command()
@click.argument("old_file", type=click.Path(exists=True))
@click.argument("new_file", type=click.Path(exists=True))
def diff(old_file, new_file):
    """Show skill ids added and removed between OLD_FILE and NEW_FILE."""
    old = load_library(old_file)
    new = load_library(new_file)
    old_ids, new_ids = set(old.ids()), set(new.ids())
    for skill_id in sorted(new_ids - old_ids):
        skill = new.get(skill_id)
        click.echo(f"+ [{skill_id}] {skill.trigger}")
    for skill_id in sorted(old_ids - new_ids):
        skill = old.get(skill_id)
        click.echo(f"- [{skill_id}] {skill.trigger}")
    if old_ids == new_ids:
        click.echo("no skill id changes")


def run() -> int:
    try:
        main.main(standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except FixtureMissError as exc:
        click.echo(f"fixture miss: {exc}", err=True)
        return 3
    except HyperKGError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(run())
