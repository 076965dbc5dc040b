"""Controlled-evaluation interviews scored by a judge."""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from ..errors import ClientFailure

CATEGORIES = ("SelfAwareness", "Memory", "Planning", "Reasoning", "Reflection")
IN_GAME = "in-game"
POST_GAME = "post-game"

RUBRICS = {
    "SelfAwareness": "Does the answer state the player's true role and objectives and apply the rules correctly?",
    "Memory": "Are the recalled players, locations and actions consistent with what the player actually observed?",
    "Planning": "Is the stated plan concrete, feasible from the current situation, and aligned with the role's win condition?",
    "Reasoning": "Are conclusions about other players supported by the available evidence and logically sound?",
    "Reflection": "Does the answer identify specific decisions from the game and plausible improvements?",
}
SCALE = ("1 = wrong or irrelevant, 2 = mostly wrong, 3 = partially correct, "
         "4 = correct with minor gaps, 5 = fully correct and well supported")


@dataclass(frozen=True)
class Question:
    category: str
    text: str
    only: Optional[str] = None       # role restriction
    stage: Optional[str] = None      # POST_GAME restricts to after the game

    def applies(self, role: str, stage: str) -> bool:
        if self.only is not None and self.only != role:
            return False
        return self.stage is None or self.stage == stage


def load_question_bank(path=None) -> list:
    if path is None:
        raw = resources.files("crewsim.data").joinpath("questions.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    return [Question(q["category"], q["text"], q.get("only"), q.get("stage")) for q in json.loads(raw)]


@dataclass
class InterviewRecord:
    game_id: str
    player: int
    role: str
    stage: str
    timestep: int
    category: str
    question: str
    answer: str
    score: Optional[int]
    flagged: bool = False


class ConstantJudge:
    name = "mock"

    def __init__(self, score: int = 3):
        self.value = score

    def score(self, category, question, answer, role) -> int:
        return self.value


class LLMJudge:
    def __init__(self, client):
        self.client = client
        self.name = client.model
        self.calls = 0

    def score(self, category, question, answer, role) -> Optional[int]:
        system = (f"You grade answers given by a {role} in a social deduction game. "
                  f"Criterion: {RUBRICS[category]} Scale: {SCALE}. Reply 'Score: N'.")
        self.calls += 1
        reply = self.client.ask(system, f"Question: {question}\nAnswer: {answer}", f"judge:{self.calls}")
        m = re.search(r"score\s*:?\s*([1-5])\b", reply, re.IGNORECASE) or re.search(r"\b([1-5])\b", reply)
        return int(m.group(1)) if m else None


def interview(mind, stage: str, bank, judge, client, *, game_id: str = "", player: int = 0,
              timestep: int = 0) -> list:
    """Pose every applicable question to one agent and score the answers."""
    if stage not in (IN_GAME, POST_GAME):
        raise ValueError(f"unknown interview stage {stage!r}")
    context = mind.last_prompt or f"Previous condensed memory:\n{mind.condensed_memory or 'none'}"
    records = []
    for n, q in enumerate(qq for qq in bank if qq.applies(mind.role, stage)):
        user = f"{context}\n\nInterviewer question: {q.text}\nAnswer briefly in plain prose."
        tag = f"{game_id}:p{player}:interview:{stage}:t{timestep}:{n}"
        flagged = False
        try:
            answer = client.ask(mind.system_prompt, user, tag)
        except ClientFailure:
            answer, flagged = "", True
        score = None
        if not flagged:
            try:
                score = judge.score(q.category, q.text, answer, mind.role)
            except ClientFailure:
                score = None
            if score is None or not 1 <= int(score) <= 5:
                score, flagged = None, True
        records.append(InterviewRecord(game_id, player, mind.role, stage, timestep, q.category,
                                       q.text, answer, score, flagged))
    return records


class Interviewer:
    """Game hook: interviews every LLM agent after meetings and after the game."""

    def __init__(self, judge, bank=None):
        self.judge = judge
        self.bank = bank if bank is not None else load_question_bank()

    def interview_game(self, state, agents, stage: str) -> list:
        out = []
        for pid, agent in sorted(agents.items()):
            mind = getattr(agent, "mind", None)
            if mind is None or (stage == IN_GAME and not state.players[pid].alive):
                continue
            out += interview(mind, stage, self.bank, self.judge, agent.client,
                             game_id=agent.game_id, player=pid, timestep=state.timestep)
        return out


def category_averages(records) -> dict:
    """(category, role) -> mean judge score over scored answers."""
    sums = defaultdict(lambda: [0, 0])
    for r in records:
        if r.score is not None:
            acc = sums[(r.category, r.role)]
            acc[0] += r.score
            acc[1] += 1
    return {key: s / n for key, (s, n) in sorted(sums.items())}


def write_interviews(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")
