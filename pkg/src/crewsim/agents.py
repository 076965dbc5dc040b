"""Decision policies: uniform random, human at a terminal, and the LLM agent."""

from __future__ import annotations

import random
import re
import sys
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

from . import personas
from .engine import (CALL_MEETING, CHECK_CAMERA, COMPLETE_TASK, FAKE_TASK, KILL, MOVE,
                     REPORT_BODY, SPEAK, VENT, VOTE, Action, ActionOption)
from .errors import ParseFailure, RoleMismatch, SessionClosed
from .llm_client import LLMClient
from .observation import Observation, observe, render_prompt
from .personas import PersonaProfile
from .world import IMPOSTOR, GameState

RANDOM_SPEECH = "I have nothing to report."


@lru_cache(maxsize=None)
def base_prompt(role: str) -> str:
    name = "impostor.txt" if role == IMPOSTOR else "crewmate.txt"
    return resources.files("crewsim.data").joinpath("prompts", name).read_text("utf-8").strip()


def compose_prompt(base: str, persona: Optional[PersonaProfile], role: Optional[str] = None,
                   plan: Optional[str] = None) -> str:
    """Base role prompt followed by the persona text, one blank line apart."""
    if persona is None or not persona.description:
        return base
    if role is not None and not persona.applies_to(role):
        raise RoleMismatch(f"{persona.name} is a {persona.applicable_role} persona, not {role}")
    text = f"{base}\n\n{persona.description}"
    if persona.name == personas.RANDOM_PERSONA and plan:
        text += f"\nYour randomly chosen plan: {plan}"
    return text


@dataclass
class AgentMind:
    role: str
    base_prompt: str
    personality: Optional[PersonaProfile] = None
    planner_enabled: bool = True
    condensed_memory: str = ""
    previous_thought: str = ""
    system_prompt: str = ""
    last_prompt: str = ""

    @classmethod
    def create(cls, role: str, persona: Optional[str] = None, planner: bool = True,
               plan: Optional[str] = None) -> "AgentMind":
        base = base_prompt(role)
        profile = personas.get(persona) if persona else None
        mind = cls(role, base, profile, planner)
        mind.system_prompt = compose_prompt(base, profile, role, plan)
        return mind


@dataclass
class Decision:
    chosen: ActionOption
    text: Optional[str] = None
    new_memory: str = ""
    new_thought: Optional[str] = None
    raw_response: str = ""
    fallback_used: bool = False

    def to_action(self) -> Action:
        return Action(self.chosen, self.text, self.fallback_used)


# ---------------------------------------------------------------------------
# response parsing

_SECTION = re.compile(r"\[\s*(condensed memory|thinking process|action)\s*\]", re.IGNORECASE)
_STRIP = " \t\"'`*.“”‘’"
_KEYWORDS = {
    MOVE: r"\bmove\b",
    COMPLETE_TASK: r"\bcomplete\b",
    FAKE_TASK: r"\bfake\b|\bcomplete\b",
    CALL_MEETING: r"\bcall\b|\bmeeting\b|\bemergency\b",
    REPORT_BODY: r"\breport\b",
    CHECK_CAMERA: r"\bcamera\b",
    VENT: r"\bvent\b",
    KILL: r"\bkill\b",
    VOTE: r"\bvote\b",
}


def _norm(text: str) -> str:
    return " ".join(text.lower().split()).strip(_STRIP)


@dataclass
class ParsedReply:
    memory: str
    thought: str
    index: int
    speech: Optional[str] = None


def _payload_token(option: ActionOption) -> Optional[str]:
    if option.kind == VOTE and option.target is None:
        return r"\bskip\b"
    if isinstance(option.target, int):
        return rf"\bplayer\s*{option.target}\b"
    if option.kind in (COMPLETE_TASK, FAKE_TASK):
        return re.escape(_norm(option.display.split(" - ", 1)[1]))
    if isinstance(option.target, str):
        return rf"\b{re.escape(option.target.lower())}\b"
    return None


def _match_action(line: str, options: list) -> int:
    norm = re.sub(r"^\d+\s*[.)]\s+", "", _norm(line))
    if re.fullmatch(r"\d+", norm):
        i = int(norm) - 1
        if 0 <= i < len(options):
            return i
        raise ParseFailure(f"option number {norm} out of range")
    displays = [_norm(o.display) for o in options]
    # (a) exact
    exact = [i for i, d in enumerate(displays) if d == norm]
    if len(exact) == 1:
        return exact[0]
    # (b) option display contained in (or a prefix of) the action line
    contained = [i for i, d in enumerate(displays) if options[i].kind != SPEAK and d and d in norm]
    if len(contained) == 1:
        return contained[0]
    # (c) kind keyword + payload token
    kinds = {kind for kind, pat in _KEYWORDS.items() if re.search(pat, norm)}
    candidates = [i for i, o in enumerate(options) if o.kind in kinds]
    if len(candidates) > 1:
        narrowed = []
        for i in candidates:
            token = _payload_token(options[i])
            if token is not None and re.search(token, norm):
                narrowed.append(i)
        candidates = narrowed
    if len(candidates) == 1:
        return candidates[0]
    raise ParseFailure(f"action {line!r} matches {len(candidates)} options")


def parse_response(text: str, options: list) -> ParsedReply:
    """Extract memory, thought and the chosen option index from a model reply."""
    marks = list(_SECTION.finditer(text or ""))
    if not marks:
        raise ParseFailure("no [Condensed Memory]/[Thinking Process]/[Action] sections")
    sections = {}
    for m, nxt in zip(marks, marks[1:] + [None]):
        body = text[m.end(): nxt.start() if nxt else len(text)]
        sections.setdefault(m.group(1).lower(), body.strip())
    action = sections.get("action")
    if not action:
        raise ParseFailure("empty or missing [Action] section")
    memory = sections.get("condensed memory", "")
    thought = sections.get("thinking process", "")

    first_line = action.strip().splitlines()[0]
    if _norm(first_line).startswith("speak"):
        speak = [i for i, o in enumerate(options) if o.kind == SPEAK]
        if len(speak) != 1:
            raise ParseFailure("SPEAK chosen but not available")
        rest = re.sub(r"^\W*speak\s*:?", "", action.strip(), count=1, flags=re.IGNORECASE)
        speech = " ".join(rest.split()).strip(" \"'“”‘’") or "..."
        return ParsedReply(memory, thought, speak[0], speech)
    return ParsedReply(memory, thought, _match_action(first_line, options))


# ---------------------------------------------------------------------------
# policies


def decide_random(rng: random.Random, options: list) -> Decision:
    choice = rng.choice(options)
    return Decision(choice, RANDOM_SPEECH if choice.kind == SPEAK else None)


def decide_llm(mind: AgentMind, observation: Observation, options: list, client: LLMClient, *,
               tag: str, rng: random.Random) -> Decision:
    if not options:
        raise ValueError("no options to choose from")
    prompt = render_prompt(observation, mind)
    mind.last_prompt = prompt
    raw = client.ask(mind.system_prompt, prompt, tag)
    try:
        parsed = parse_response(raw, options)
    except ParseFailure:
        fallback = decide_random(rng, options)
        fallback.raw_response = raw
        fallback.fallback_used = True
        fallback.new_memory = mind.condensed_memory
        return fallback
    mind.condensed_memory = parsed.memory
    if mind.planner_enabled:
        mind.previous_thought = parsed.thought
    chosen = options[parsed.index]
    return Decision(chosen, parsed.speech, parsed.memory,
                    parsed.thought if mind.planner_enabled else None, raw)


class StdTerminal:
    def __init__(self, stdin=None, stdout=None):
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout

    def write(self, text: str) -> None:
        self.stdout.write(text)
        self.stdout.flush()

    def readline(self) -> str:
        line = self.stdin.readline()
        if not line:
            raise SessionClosed("input stream closed")
        return line.rstrip("\n")


def decide_human(terminal, observation: Observation, options: list, mind=None) -> Decision:
    terminal.write("\n" + render_prompt(observation, mind) + "\n")
    while True:
        terminal.write(f"Choose an action [1-{len(options)}]: ")
        raw = terminal.readline().strip()
        if raw.isdigit() and 1 <= int(raw) <= len(options):
            choice = options[int(raw) - 1]
            break
        terminal.write(f"Invalid choice {raw!r}.\n")
    text = None
    if choice.kind == SPEAK:
        terminal.write("Say: ")
        text = terminal.readline().strip() or "..."
    return Decision(choice, text)


# ---------------------------------------------------------------------------
# controllers used by the game runner


class RandomAgent:
    kind = "random"

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.mind = None

    def decide(self, state: GameState, pid: int, options: list) -> Action:
        return decide_random(self.rng, options).to_action()


class LLMAgent:
    kind = "llm"

    def __init__(self, mind: AgentMind, client: LLMClient, rng: random.Random, game_id: str):
        self.mind = mind
        self.client = client
        self.rng = rng
        self.game_id = game_id
        self.calls = 0
        self.decisions: list = []

    def decide(self, state: GameState, pid: int, options: list) -> Action:
        obs = observe(state, pid, options)
        tag = f"{self.game_id}:p{pid}:t{state.timestep}:{state.phase}:{self.calls}"
        self.calls += 1
        decision = decide_llm(self.mind, obs, options, self.client, tag=tag, rng=self.rng)
        self.decisions.append(decision)
        return decision.to_action()


class HumanAgent:
    kind = "human"

    def __init__(self, terminal):
        self.terminal = terminal
        self.mind = None
        self._view = AgentMind(role="", base_prompt="", planner_enabled=False)

    def decide(self, state: GameState, pid: int, options: list) -> Action:
        obs = observe(state, pid, options)
        return decide_human(self.terminal, obs, options, self._view).to_action()
