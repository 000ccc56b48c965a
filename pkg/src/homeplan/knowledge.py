"""On-site knowledge artifacts and their prompt renderings.

A robot's knowledge base holds two things extracted from its learned model:
per-region lists of high-probability place words, and a presence table
mapping each object label to a probability row over the robot's rooms.
Renderers emit the prompt-component text blocks consumed by the planner;
parsers invert the two table-like blocks for round-trip checks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import SchemaError
from .spatial import SpatialConceptModel, object_location_posterior, word_posterior
from .world import Environment, Room

ROW_SUM_ATOL = 1e-6

PROMPT_KINDS = (
    "place_vocab",
    "presence_table",
    "skills",
    "objects",
    "allocation_rule",
    "behaviors",
    "dialogue_example",
    "decomposition_example",
)

DEFAULT_SKILLS = ("navigation", "object_detection", "pick", "place")

_DIVIDER = "-" * 16

_COUNT_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six",
    7: "seven", 8: "eight", 9: "nine", 10: "ten", 11: "eleven", 12: "twelve",
}


@dataclass
class KnowledgeBase:
    """A robot's floor-local knowledge: room names, place vocab, presence rows."""

    robot_id: str
    room_names: list[str]
    place_vocab: list[list[str]]
    presence_table: dict[str, list[float]]

    def __post_init__(self):
        if len(self.place_vocab) != len(self.room_names):
            raise ValueError("place_vocab must have one entry per room")
        for obj, row in self.presence_table.items():
            if len(row) != len(self.room_names):
                raise ValueError(f"presence row for {obj!r} has wrong length")

    def row(self, obj: str) -> np.ndarray:
        return np.asarray(self.presence_table[obj], dtype=float)

    def best_room(self, obj: str) -> tuple[str, float]:
        row = self.row(obj)
        idx = int(np.argmax(row))
        return self.room_names[idx], float(row[idx])


@dataclass(frozen=True)
class PromptComponent:
    kind: str
    text: str

    def __post_init__(self):
        if self.kind not in PROMPT_KINDS:
            raise ValueError(f"unknown prompt component kind {self.kind!r}")
        if not self.text:
            raise ValueError("prompt component text must be non-empty")


def match_room_names(model: SpatialConceptModel, rooms: list[Room]) -> list[str]:
    """Label each learned region with the closest room, bijectively.

    Uses a minimum-cost assignment on squared distances between region means
    and room centers; purely an evaluation-side convenience, the learner
    itself never sees room names.
    """
    if len(rooms) < model.num_regions:
        raise ValueError("need at least as many candidate rooms as regions")
    means = np.stack([r.mean for r in model.regions])
    centers = np.stack([r.center_array for r in rooms])
    cost = ((means[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    region_idx, room_idx = linear_sum_assignment(cost)
    names = [""] * model.num_regions
    for reg, room in zip(region_idx, room_idx):
        names[reg] = rooms[room].name
    return names


def extract_knowledge(
    model: SpatialConceptModel,
    room_names: list[str],
    vocab_threshold: float = 0.05,
    robot_id: str = "robot",
) -> KnowledgeBase:
    """Turn a learned model into place-vocabulary lists and a presence table.

    ``room_names`` supplies the display name for each region index, so its
    length must equal the model's region count.  Presence rows are exactly
    the object-location posteriors, with no further smoothing.
    """
    if len(room_names) != model.num_regions:
        raise ValueError("room_names must name every region")
    if not 0.0 < vocab_threshold < 1.0:
        raise ValueError("vocab_threshold must be in (0, 1)")
    place_vocab = []
    for region in range(model.num_regions):
        probs = word_posterior(model, region).probs
        order = np.argsort(-probs, kind="stable")
        place_vocab.append([model.vocab_places[i] for i in order if probs[i] >= vocab_threshold])
    presence = {}
    for obj in model.vocab_objects:
        presence[obj] = object_location_posterior(model, obj).probs.tolist()
    return KnowledgeBase(
        robot_id=robot_id,
        room_names=list(room_names),
        place_vocab=place_vocab,
        presence_table=presence,
    )


def knowledge_from_environment(env: Environment, floor: str, robot_id: str) -> KnowledgeBase:
    """Ground-truth knowledge base: one-hot presence rows from true placements."""
    rooms = env.rooms_on(floor)
    if not rooms:
        raise ValueError(f"floor {floor!r} has no rooms")
    names = [r.name for r in rooms]
    presence = {}
    for obj in env.objects_on(floor):
        row = [0.0] * len(names)
        row[names.index(env.placements[obj])] = 1.0
        presence[obj] = row
    vocab = [list(env.place_words.get(n, [])) for n in names]
    return KnowledgeBase(robot_id=robot_id, room_names=names, place_vocab=vocab, presence_table=presence)


def _count_word(n: int) -> str:
    return _COUNT_WORDS.get(n, str(n))


def render_place_vocab(kb: KnowledgeBase) -> PromptComponent:
    """Place-vocabulary block: count preamble plus one bracketed list per region."""
    n = len(kb.room_names)
    word = _count_word(n)
    lines = [
        f"There are {word} location areas in a home environment.",
        f"Your initial position is outside of the {word} rooms.",
        "In each region, words related to the following locations are likely to be observed.",
    ]
    for i, words in enumerate(kb.place_vocab, start=1):
        lines.append(f"place{i}: [{', '.join(words)}]")
    return PromptComponent("place_vocab", "\n".join(lines))


_PLACE_LINE = re.compile(r"^place(\d+): \[(.*)\]$")


def parse_place_vocab(text: str) -> list[list[str]]:
    """Invert :func:`render_place_vocab`, returning the per-region word lists."""
    out = []
    for line in text.splitlines():
        m = _PLACE_LINE.match(line.strip())
        if m:
            body = m.group(2)
            out.append([w for w in body.split(", ") if w] if body else [])
    return out


def format_probability(p: float) -> str:
    """Up to four decimals with trailing zeros trimmed: 0.0100 -> "0.01"."""
    s = f"{p:.4f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def render_presence_table(kbs: list[KnowledgeBase]) -> PromptComponent:
    """Per-robot presence-table blocks separated by a dashed divider."""
    if not kbs:
        raise ValueError("need at least one knowledge base")
    blocks = []
    for kb in kbs:
        lines = [
            kb.robot_id,
            '"List of probabilities that an object exists":',
            f"[{', '.join(kb.room_names)}]",
        ]
        for obj, row in kb.presence_table.items():
            rendered = ", ".join(format_probability(p) for p in row)
            lines.append(f"{obj} = [{rendered}]")
        blocks.append("\n".join(lines))
    return PromptComponent("presence_table", f"\n{_DIVIDER}\n".join(blocks))


_ROW_LINE = re.compile(r"^(\S+) = \[(.*)\]$")
_ROOMS_LINE = re.compile(r"^\[(.*)\]$")


def parse_presence_table(text: str) -> list[KnowledgeBase]:
    """Invert :func:`render_presence_table`.

    Rows are renormalized to absorb rendering precision; the place vocabulary
    is not part of this block, so parsed bases carry empty vocab lists.
    """
    kbs = []
    for block in text.split(_DIVIDER):
        lines = [ln.strip() for ln in block.strip().splitlines() if ln.strip()]
        if len(lines) < 3:
            raise SchemaError("presence table block too short")
        robot_id = lines[0]
        if "List of probabilities" not in lines[1]:
            raise SchemaError(f"missing table title in block for {robot_id!r}")
        rooms_match = _ROOMS_LINE.match(lines[2])
        if not rooms_match:
            raise SchemaError(f"missing room-name line in block for {robot_id!r}")
        rooms = [r for r in rooms_match.group(1).split(", ") if r]
        presence = {}
        for line in lines[3:]:
            m = _ROW_LINE.match(line)
            if not m:
                raise SchemaError(f"unparseable presence row: {line!r}")
            values = np.array([float(v) for v in m.group(2).split(", ")])
            if values.sum() > 0:
                values = values / values.sum()
            presence[m.group(1)] = values.tolist()
        kbs.append(KnowledgeBase(
            robot_id=robot_id,
            room_names=rooms,
            place_vocab=[[] for _ in rooms],
            presence_table=presence,
        ))
    return kbs


def skills_component(skills=DEFAULT_SKILLS) -> PromptComponent:
    return PromptComponent("skills", ", ".join(skills))


def objects_component(object_vocab: list[str]) -> PromptComponent:
    return PromptComponent("objects", ", ".join(object_vocab))


def allocation_rule_component() -> PromptComponent:
    text = ('# IMPORTANT: Subtasks are assigned taking into consideration the objects listed in the '
            '"List of probabilities that an object exists" that each robot has.')
    return PromptComponent("allocation_rule", text)


def behaviors_component() -> PromptComponent:
    text = "\n".join([
        "navigation (location_name): move to location_name",
        "object_detection (object_name): detect an object_name and its position from a captured image",
        "pick (object_name): pick up an object_name",
        "place (location_name): place an object to the location_name",
        "",
        'These behaviors return "succeeded" or "failed". If "failed" is returned, try the same or another behavior again.',
        "Do not ask back anything about the user's instructions.",
    ])
    return PromptComponent("behaviors", text)


def dialogue_example_component() -> PromptComponent:
    text = "\n".join([
        "USER : bring the cup to the kitchen",
        "ASSISTANT : navigation (living_room)",
        "USER : succeeded",
        "ASSISTANT : object_detection (cup)",
        "USER : succeeded",
        "ASSISTANT : pick (cup)",
        "USER : failed",
        "ASSISTANT : pick (cup)",
        "USER : succeeded",
        "ASSISTANT : navigation (kitchen)",
        "USER : succeeded%finished",
        'USER : "I need you to locate a cup for me."',
    ])
    return PromptComponent("dialogue_example", text)


def decomposition_example_component() -> PromptComponent:
    text = "\n".join([
        "Task Description:",
        "Prepare for the excursion.",
        "",
        "SubTask 1: Bring a water bottle.",
        "SubTask 2: Bring a backpack.",
    ])
    return PromptComponent("decomposition_example", text)


def knowledge_to_dict(kb: KnowledgeBase) -> dict:
    return {
        "robot_id": kb.robot_id,
        "room_names": list(kb.room_names),
        "place_vocab": [list(v) for v in kb.place_vocab],
        "presence_table": {k: list(v) for k, v in kb.presence_table.items()},
    }


def knowledge_from_dict(data: dict) -> KnowledgeBase:
    missing = [k for k in ("robot_id", "room_names", "place_vocab", "presence_table") if k not in data]
    if missing:
        raise SchemaError(f"knowledge document missing keys: {missing}")
    return KnowledgeBase(
        robot_id=data["robot_id"],
        room_names=list(data["room_names"]),
        place_vocab=[list(v) for v in data["place_vocab"]],
        presence_table={k: list(v) for k, v in data["presence_table"].items()},
    )


def save_knowledge(kb: KnowledgeBase, path) -> None:
    Path(path).write_text(json.dumps(knowledge_to_dict(kb), indent=2))


def load_knowledge(path) -> KnowledgeBase:
    return knowledge_from_dict(json.loads(Path(path).read_text()))
