"""Multi-label annotation of in-game speech."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from ..engine import SPEAK
from ..errors import ParseFailure

DECEPTION = "Deception"
TRUTH_TELLING = "TruthTelling"
LEADERSHIP = "LeadershipInfluence"
SUSPICION = "SuspicionDefense"
OTHER = "Other"
CATEGORIES = (DECEPTION, TRUTH_TELLING, LEADERSHIP, SUSPICION, OTHER)

_NAMES = {
    DECEPTION: r"decept",
    TRUTH_TELLING: r"truth[\s-]*telling",
    LEADERSHIP: r"leadership",
    SUSPICION: r"suspicion",
    OTHER: r"\bother\b",
}


@lru_cache(maxsize=None)
def category_definitions() -> str:
    return resources.files("crewsim.data").joinpath("speech_categories.txt").read_text("utf-8").strip()


def annotation_prompt() -> str:
    return (
        "You annotate speeches made by players of a social deduction game set on a spaceship. "
        "Each speech may belong to several of the categories below.\n\n"
        f"{category_definitions()}\n\n"
        "Reply with one line of the form 'Categories: <name>, <name>' using the category names "
        "Deception, Truth-Telling, Leadership & Influence, Suspicion & Defense, Other."
    )


def parse_labels(reply: str) -> list:
    text = (reply or "").lower()
    m = re.search(r"categor(?:y|ies)\s*:(.*)", text)
    if m:
        text = m.group(1)
    labels = [c for c in CATEGORIES if re.search(_NAMES[c], text)]
    if not labels:
        raise ParseFailure(f"no speech category in {reply!r}")
    return labels


@dataclass
class SpeechAnnotation:
    game_id: str
    event_index: int
    speaker: int
    role: str
    text: str
    labels: list
    annotator: str
    flagged: bool = False


class LLMAnnotator:
    def __init__(self, client, name: str = ""):
        self.client = client
        self.name = name or client.model
        self._system = annotation_prompt()

    def annotate(self, text: str, tag: str) -> list:
        return parse_labels(self.client.ask(self._system, f'Speech: "{text}"', tag))


class FixedAnnotator:
    """Returns the same labels for every speech (or per-text overrides)."""

    name = "mock"

    def __init__(self, labels=(OTHER,), overrides=None):
        self.labels = list(labels)
        self.overrides = dict(overrides or {})

    def annotate(self, text: str, tag: str) -> list:
        return list(self.overrides.get(text, self.labels))


class KeywordAnnotator:
    """Deterministic offline stand-in for a model annotator."""

    name = "mock"
    LEXICON = {
        DECEPTION: (r"\bi was (?:just )?(?:in|at|doing)\b", r"\bnot me\b", r"\btrust me\b",
                    r"\bi didn'?t\b"),
        TRUTH_TELLING: (r"\bi saw\b", r"\bi (?:have )?completed\b", r"\bi(?:'m| am) heading\b",
                        r"\bi noticed\b", r"\bi will (?:head|proceed)\b"),
        LEADERSHIP: (r"\blet'?s\b", r"\bwe (?:should|need|must)\b", r"\beveryone\b",
                     r"\bfocus\b"),
        SUSPICION: (r"\bsuspici", r"\baccus", r"\bwhere (?:were|are) you\b", r"\bexplain\b",
                    r"\bevidence\b", r"\bvote\b", r"\?"),
    }

    def annotate(self, text: str, tag: str) -> list:
        low = text.lower()
        labels = [c for c, pats in self.LEXICON.items() if any(re.search(p, low) for p in pats)]
        return labels or [OTHER]


def annotate_speech(record, annotator) -> tuple:
    """Label every SPEAK event; returns (annotations, per-role proportions)."""
    players = record.players
    game_id = record.header.get("game_id", "")
    annotations = []
    for idx, e in enumerate(record.events):
        if e.kind != SPEAK:
            continue
        text = e.payload.get("text", "")
        flagged = False
        try:
            labels = annotator.annotate(text, f"{game_id}:speech:{idx}")
        except ParseFailure:
            labels, flagged = [OTHER], True
        annotations.append(SpeechAnnotation(game_id, idx, e.actor, players[e.actor]["role"], text,
                                            list(labels), annotator.name, flagged))
    return annotations, category_proportions(annotations)


def category_proportions(annotations) -> dict:
    """role -> label -> share of that role's speeches carrying the label (may sum above 1)."""
    totals = Counter(a.role for a in annotations)
    hits = Counter((a.role, lab) for a in annotations for lab in set(a.labels))
    return {role: {c: hits[(role, c)] / n for c in CATEGORIES} for role, n in sorted(totals.items())}


def write_annotations(annotations, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for a in annotations:
            fh.write(json.dumps(asdict(a)) + "\n")
