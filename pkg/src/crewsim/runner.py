"""Play a single game end to end with a mix of agent kinds."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .agents import AgentMind, HumanAgent, LLMAgent, RandomAgent, StdTerminal
from .engine import run_game
from .errors import AgentFailure, ConfigInvalid
from .llm_client import LLMClient, UniformOptionBackend
from .records import GameRecord, build_record
from .world import GameConfig, GameState, MapData, new_game


def derive_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def offline_client_factory(seed: int) -> LLMClient:
    return LLMClient(UniformOptionBackend(derive_seed(seed, "uniform-option")))


@dataclass
class GameResult:
    record: GameRecord
    state: GameState
    agents: dict
    transcript: list = field(default_factory=list)
    interviews: list = field(default_factory=list)
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.record.complete


def build_agents(state: GameState, *, game_id: str, client: Optional[LLMClient],
                 terminal=None) -> dict:
    agents = {}
    cfg = state.config
    for pid, p in sorted(state.players.items()):
        spec = cfg.agent_for(pid, p.role)
        rng = random.Random(derive_seed(cfg.seed, "agent", pid))
        if spec.kind == "random":
            agents[pid] = RandomAgent(rng)
        elif spec.kind == "llm":
            if client is None:
                raise ConfigInvalid("llm agents need a client backend")
            mind = AgentMind.create(p.role, p.persona, spec.planner, p.persona_plan)
            agents[pid] = LLMAgent(mind, client, rng, game_id)
        elif spec.kind == "human":
            agents[pid] = HumanAgent(terminal or StdTerminal())
        else:
            raise ConfigInvalid(f"unknown agent kind {spec.kind!r}")
    return agents


def play_game(config: GameConfig, *, game_id: str = "game",
              client_factory: Callable[[int], LLMClient] = offline_client_factory,
              terminal=None, interviewer=None, decision_timeout: Optional[float] = None,
              map_data: Optional[MapData] = None, meta: Optional[dict] = None) -> GameResult:
    """Run one game. Agent failures are captured in the result, not raised."""
    state = new_game(config, map_data)
    needs_client = any(config.agent_for(pid, p.role).kind == "llm" for pid, p in state.players.items())
    client = client_factory(config.seed) if needs_client else None
    agents = build_agents(state, game_id=game_id, client=client, terminal=terminal)
    interviews: list = []

    def decide(st, pid, options):
        return agents[pid].decide(st, pid, options)

    hook = None
    if interviewer is not None:
        def hook(st):
            interviews.extend(interviewer.interview_game(st, agents, stage="in-game"))

    error = None
    try:
        run_game(state, decide, decision_timeout=decision_timeout, on_meeting_end=hook)
        if interviewer is not None:
            interviews.extend(interviewer.interview_game(state, agents, stage="post-game"))
    except AgentFailure as exc:
        error = exc
    message = None
    if error is not None:
        cause = error.__cause__
        message = f"{error}" + (f" ({type(cause).__name__})" if cause else "")
    record = build_record(state, game_id=game_id, agents=agents, error=message, meta=meta)
    transcript = client.transcript if client is not None else []
    return GameResult(record, state, agents, transcript, interviews, error)
