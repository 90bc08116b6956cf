"""Global skill library: storage, controller ops, retrieval, and rendering."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import GatewayError, SkillOpError
from .gateway import Gateway, cosine
from .parsing import LibraryOp

log = logging.getLogger(__name__)


@dataclass
class Skill:
    """A trigger/action pair distilled from reflection."""

    id: str
    trigger: str
    action: str
    created_round: int = 0
    lineage: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "trigger": self.trigger,
            "action": self.action,
            "created_round": self.created_round,
            "lineage": list(self.lineage),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Skill":
        return cls(
            id=d["id"],
            trigger=d["trigger"],
            action=d["action"],
            created_round=d.get("created_round", 0),
            lineage=list(d.get("lineage", [])),
        )


@dataclass
class SkillLibrary:
    """Ordered skill list plus the number of learning rounds applied."""

    skills: list[Skill] = field(default_factory=list)
    round: int = 0

    def ids(self) -> list[str]:
        return [s.id for s in self.skills]

    def get(self, skill_id: str) -> Skill | None:
        for skill in self.skills:
            if skill.id == skill_id:
                return skill
        return None

    def _id_high_water(self) -> int:
        """Highest numeric id ever referenced (live ids plus merge lineage)."""
        highest = -1
        for skill in self.skills:
            for skill_id in [skill.id, *skill.lineage]:
                if skill_id.startswith("E") and skill_id[1:].isdigit():
                    highest = max(highest, int(skill_id[1:]))
        return highest

    def to_dict(self) -> dict:
        return {"round": self.round, "skills": [s.to_dict() for s in self.skills]}

    @classmethod
    def from_dict(cls, d: dict) -> "SkillLibrary":
        return cls(
            skills=[Skill.from_dict(s) for s in d.get("skills", [])],
            round=d.get("round", 0),
        )


def apply_library_ops(library: SkillLibrary, ops: list[LibraryOp]) -> SkillLibrary:
    """Apply controller operations in order; all-or-nothing on unknown ids.

    Returns a new library with the round counter incremented once. The input
    library is never mutated.
    """
    skills = [Skill.from_dict(s.to_dict()) for s in library.skills]
    working = SkillLibrary(skills=skills, round=library.round)
    counter = working._id_high_water()

    def fresh_id() -> str:
        nonlocal counter
        counter += 1
        return f"E{counter}"

    for op in ops:
        if op.op == "SKIP":
            continue
        if op.op == "ADD":
            working.skills.append(
                Skill(
                    id=fresh_id(),
                    trigger=op.trigger,
                    action=op.action,
                    created_round=library.round + 1,
                )
            )
        elif op.op == "DELETE":
            if working.get(op.target_id) is None:
                raise SkillOpError(f"DELETE references unknown skill id {op.target_id!r}")
            working.skills = [s for s in working.skills if s.id != op.target_id]
        elif op.op == "MERGE":
            missing = [i for i in op.merge_with_ids if working.get(i) is None]
            if missing:
                raise SkillOpError(f"MERGE references unknown skill ids {missing}")
            working.skills = [s for s in working.skills if s.id not in op.merge_with_ids]
            working.skills.append(
                Skill(
                    id=fresh_id(),
                    trigger=op.trigger,
                    action=op.action,
                    created_round=library.round + 1,
                    lineage=list(op.merge_with_ids),
                )
            )
        else:
            raise SkillOpError(f"unknown operation {op.op!r}")
    working.round = library.round + 1
    return working


def select_skills(
    library: SkillLibrary, context: str, k: int, gateway: Gateway | None = None
) -> list[Skill]:
    """Top-k skills by trigger/context embedding similarity; id order on ties.

    Falls back to the first k skills by id when the library is small, no
    gateway is available, or embedding fails.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(library.skills) <= k:
        return list(library.skills)
    if gateway is None or not context:
        return list(library.skills[:k])
    try:
        vectors = gateway.embed([context] + [s.trigger for s in library.skills])
    except GatewayError as exc:
        log.warning("skill retrieval embedding failed (%s); using first %d skills", exc, k)
        return list(library.skills[:k])
    context_vec = vectors[0]
    scored = [
        (-cosine(context_vec, vec), index, skill)
        for index, (skill, vec) in enumerate(zip(library.skills, vectors[1:]))
    ]
    scored.sort(key=lambda item: (item[0], item[1]))
    return [skill for _, _, skill in scored[:k]]


def render_skill_block(skills: list[Skill]) -> str:
    """Render skills as the numbered Trigger/Action block injected into prompts."""
    if not skills:
        return "(no experiences yet)"
    lines = []
    for i, skill in enumerate(skills, start=1):
        lines.append(f'"S{i}": {{')
        lines.append(f'  "Trigger": "{skill.trigger}",')
        lines.append(f'  "Action": "{skill.action}"')
        lines.append("}")
    return "\n".join(lines)


def render_skill_pool(library: SkillLibrary) -> str:
    """Render the library with stable ids for the skill-update prompt."""
    if not library.skills:
        return "(empty pool)"
    lines = []
    for skill in library.skills:
        lines.append(f'"{skill.id}": {{')
        lines.append(f'  "trigger": "{skill.trigger}",')
        lines.append(f'  "action": "{skill.action}"')
        lines.append("}")
    return "\n".join(lines)


def library_to_json(library: SkillLibrary) -> str:
    def id_key(entry: dict) -> tuple:
        skill_id = entry["id"]
        if skill_id.startswith("E") and skill_id[1:].isdigit():
            return (0, int(skill_id[1:]), skill_id)
        return (1, 0, skill_id)

    data = {
        "round": library.round,
        "skills": sorted((s.to_dict() for s in library.skills), key=id_key),
    }
    return json.dumps(data, ensure_ascii=False, indent=2) + "\n"


def save_library(library: SkillLibrary, path: str | Path) -> None:
    """Atomic write (temp file + rename) so a crash never corrupts the library."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(library_to_json(library))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_library(path: str | Path) -> SkillLibrary:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    library = SkillLibrary.from_dict(data)
    ids = library.ids()
    if len(ids) != len(set(ids)):
        raise SkillOpError(f"library at {path} has duplicate skill ids")
    return library
