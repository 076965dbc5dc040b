"""Hand-built game states shared by several test modules."""

from __future__ import annotations

import random

from crewsim.agents import AgentMind, LLMAgent
from crewsim.observation import observe
from crewsim.engine import ALL, KILL, MOVE, VENT, apply_action, legal_actions, run_game
from crewsim.llm_client import LLMClient, ScriptedBackend
from crewsim.world import CREWMATE, IMPOSTOR, GameConfig, TaskInstance, default_map_data, new_game

COLORS = {1: "blue", 2: "cyan", 3: "black", 4: "orange", 5: "white"}

CREWMATE_REPLY = (
    "[Condensed Memory]\n\nI saw Player 1 killed Player 2.\n\n[Thinking Process]\n\n"
    "I saw Player 1 killed Player 2. I have to call a meeting immediately to discuss this incident "
    "and ask the rest of the crew to vote Player 1 out. I would either REPORT DEAD BODY or CALL "
    "MEETING using the emergency button. In the available actions, I would choose CALL MEETING.\n\n"
    '[Action] CALL MEETING using the emergency button at Cafeteria"'
)
_IMPOSTOR_MEMORY = ("I killed Player 2 and vented from Cafeteria to Admin. Currently, I am in Admin "
                    "with Player 5: cyan. The last time I saw the crew, they were moving to Weapons.")
IMPOSTOR_MOVE_REPLY = (
    f"[Condensed Memory]\n{_IMPOSTOR_MEMORY}\n\n[Thinking Process]\n\n"
    "Now Player 5 is in Admin. I should act normal and possibly move to another location.\n\n"
    "[Action] MOVE from Admin to O2"
)
IMPOSTOR_SPEAK_REPLY = (
    f"[Condensed Memory]\n{_IMPOSTOR_MEMORY}\n\n[Thinking Process]\n"
    "Player 5 is in Admin. Perhaps I could talk to them and try to build trust. I could ask them "
    "about their tasks or whereabouts.\n\n"
    '[Action] SPEAK: "Hey Player 5, where are you headed next?"'
)


def spec(name: str, room: str):
    return next(t for t in default_map_data().catalog if t.name == name and t.room == room)


def _base_state():
    cfg = GameConfig(n_crewmates=4, n_impostors=1,
                     tasks_per_crewmate={"common": 1, "short": 2, "long": 1}, seed=0)
    state = new_game(cfg)
    wiring = spec("Fix Wiring", "Electrical")
    state.common_task = wiring
    for pid, p in state.players.items():
        p.color = COLORS[pid]
        p.role = IMPOSTOR if pid == 1 else CREWMATE
        p.persona = p.persona_plan = None
        p.known_tasks = [wiring] if pid == 1 else []
        specs = [] if pid == 1 else [wiring, spec("Upload Data", "Admin"),
                                     spec("Clean O2 Filter", "O2"), spec("Clear Asteroids", "Weapons")]
        p.tasks = [TaskInstance(s, pid, s.duration_steps) for s in specs]
    return state


def _option(state, pid, kind, target):
    return next(o for o in legal_actions(state, pid) if o.kind == kind and o.target == target)


def crewmate_example():
    """Player 3 in Cafeteria right after seeing Player 1 kill Player 2 at timestep 0.

    The body is cleared so the option list matches the reference example, which
    offers no report action.
    """
    state = _base_state()
    apply_action(state, 1, _option(state, 1, KILL, 2))
    state.bodies.clear()
    return state, 3


def impostor_example():
    """Player 1 in Admin at timestep 2 after a kill and a vent, with Player 5 present."""
    state = _base_state()
    apply_action(state, 1, _option(state, 1, KILL, 2))
    for pid in (3, 4, 5):
        apply_action(state, pid, _option(state, pid, MOVE, "Weapons"))
    state.timestep = 1
    apply_action(state, 1, _option(state, 1, VENT, "Admin"))
    state.players[5].location = "Admin"
    state.timestep = 2
    return state, 1


def impostor_mind():
    mind = AgentMind.create(IMPOSTOR, None, planner=True)
    mind.condensed_memory = "I killed Player 2. The rest of the crew moves to Weapons."
    mind.previous_thought = ("I just killed a player. I need to quickly move to a different "
                             "location to avoid suspicion.")
    return mind


def scripted_agent(mind, tag: str, reply: str, game_id: str = "golden") -> LLMAgent:
    client = LLMClient(ScriptedBackend({tag: reply}))
    return LLMAgent(mind, client, random.Random(0), game_id)


def run_privacy_check(seed: int) -> int:
    """Play one random game, checking every observation against emission-time locations.

    Returns the number of (observer, event) pairs inspected.
    """
    state = new_game(GameConfig(seed=seed))
    rng = random.Random(seed)
    where = []        # per event: {pid: location} of living players at emission
    snapshot = {}
    checked = 0

    def sync():
        while len(where) < len(state.events):
            where.append(snapshot)

    def decide(st, pid, options):
        nonlocal snapshot, checked
        sync()
        position = {id(e): i for i, e in enumerate(st.events)}
        for e in observe(st, pid, options).recent_events:
            idx = position[id(e)]
            if e.visibility != ALL:
                assert pid in where[idx], "observer was dead at emission"
                assert where[idx][pid] in e.visibility
            checked += 1
        snapshot = {p.id: p.location for p in st.living()}
        return rng.choice(options)

    run_game(state, decide)
    return checked
