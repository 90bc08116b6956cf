"""Report outputs: delimited PR data, JSON reports, and matplotlib figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import PRPoint


def write_pr_csv(points: list[PRPoint], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["threshold", "precision", "recall", "f1"])
        for point in points:
            writer.writerow(
                [f"{point.threshold:.2f}", f"{point.precision:.4f}", f"{point.recall:.4f}", f"{point.f1:.4f}"]
            )


def plot_pr_curve(points: list[PRPoint], path: str | Path, title: str = "Precision-Recall") -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    recalls = [p.recall for p in points]
    precisions = [p.precision for p in points]
    ax.plot(recalls, precisions, "o-", color="tab:blue")
    for point in points:
        ax.annotate(
            f"{point.threshold:.2f}",
            (point.recall, point.precision),
            textcoords="offset points",
            xytext=(5, 5),
            fontsize=8,
        )
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_skill_growth(round_reports: list[dict], path: str | Path) -> None:
    """Library size and proposal counts across learning rounds."""
    rounds = [r["round"] for r in round_reports]
    sizes = [r["library_size_after"] for r in round_reports]
    proposals = [sum(d.get("proposals", 0) for d in r.get("documents", [])) for r in round_reports]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(rounds, sizes, "o-", color="tab:green", label="library size")
    ax.plot(rounds, proposals, "s--", color="tab:orange", label="proposals")
    ax.set_xlabel("Learning round")
    ax.set_ylabel("Count")
    ax.set_title("Skill library growth")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_fact_accuracy(verdicts: list[dict], path: str | Path) -> None:
    """Per-fact verdict bar strip plus overall accuracy line."""
    fig, ax = plt.subplots(figsize=(6, 3))
    values = [v["supported"] for v in verdicts]
    ax.bar(range(len(values)), values, color="tab:blue")
    accuracy = sum(values) / len(values) if values else 0.0
    ax.axhline(accuracy, color="tab:red", linestyle="--", label=f"accuracy={accuracy:.2f}")
    ax.set_xlabel("Fact index")
    ax.set_ylabel("Supported")
    ax.set_ylim(0, 1.1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_json_report(data: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
