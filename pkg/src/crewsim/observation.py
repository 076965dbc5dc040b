"""Per-player views of the game state and their prompt rendering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .engine import ALL, FAKE_TASK, Event, legal_actions
from .errors import DeadPlayer
from .world import MEETING_PHASE, GameState, shortest_path

NO_ACTIONS = "No actions have been taken yet."
NO_EVENTS = "No events have been observed yet."
NO_MEMORY = "no memory has been processed."
NO_THOUGHT = "no thought process has been made"


@dataclass
class Observation:
    player: int
    label: str
    role: str
    phase: str
    timestep: int
    timesteps_left: int
    location: str
    occupants: list
    map_connections: list
    recent_events: list
    recent_actions: list
    assigned_tasks: list          # (kind, name, room, done)
    options: list                 # ActionOption, same order as legal_actions
    labels: dict = field(default_factory=dict)
    camera_snapshot: Optional[dict] = None
    meeting_round: Optional[int] = None
    voting: bool = False
    path_hints: list = field(default_factory=list)

    @property
    def option_displays(self) -> list:
        return [o.display for o in self.options]


def event_visible_to(event: Event, location: str) -> bool:
    return event.visibility == ALL or location in event.visibility


def _tail(items: list, k: int) -> list:
    return items[-k:] if k > 0 else []


def observe(state: GameState, pid: int, options: Optional[list] = None) -> Observation:
    player = state.players[pid]
    if not player.alive:
        raise DeadPlayer(pid)
    k = state.config.recent_k
    here = player.location
    if player.is_impostor:
        tasks = [(s.kind, s.name, s.room, False) for s in player.known_tasks]
    else:
        tasks = [(t.spec.kind, t.spec.name, t.spec.room, t.complete) for t in player.tasks]
    hints = []
    for kind, name, room, done in tasks:
        if not done and room != here:
            hints.append(f"{name} ({room}): {' → '.join(shortest_path(state.graph, here, room))}")
    meeting = state.meeting
    return Observation(
        player=pid,
        label=player.label,
        role=player.role,
        phase=state.phase,
        timestep=state.timestep,
        timesteps_left=max(state.config.time_limit_steps - state.timestep, 0),
        location=here,
        occupants=[p.label for p in sorted(state.occupants(here), key=lambda p: p.id)],
        map_connections=state.graph.connections_text(),
        recent_events=[state.events[i] for i in _tail(player.seen, k)],
        recent_actions=[state.events[i] for i in _tail(player.own, k)],
        assigned_tasks=tasks,
        options=list(options) if options is not None else legal_actions(state, pid),
        labels={p.id: p.label for p in state.players.values()},
        camera_snapshot=player.camera_snapshot,
        meeting_round=meeting.round if meeting else None,
        voting=bool(meeting and meeting.voting),
        path_hints=hints,
    )


def event_line(event: Event, labels: dict) -> str:
    who = f"{labels[event.actor]} " if event.actor is not None else ""
    return f"Timestep {event.timestep}: [{event.phase}] {who}{event.text}"


def own_action_line(event: Event) -> str:
    text = event.text
    if event.kind == FAKE_TASK:
        text = text.replace("COMPLETE TASK", "COMPLETE FAKE TASK", 1)
    return f"Timestep {event.timestep}: [{event.phase} phase] {text}"


def _numbered(lines) -> list:
    return [f"{i}. {line}" for i, line in enumerate(lines, 1)]


def render_observation(obs: Observation, mind=None) -> str:
    """The per-turn prompt block. ``mind`` supplies memory/thought/planner flag."""
    memory = getattr(mind, "condensed_memory", "") or ""
    thought = getattr(mind, "previous_thought", "") or ""
    planner = getattr(mind, "planner_enabled", True)

    sections = [
        [f"Location: {obs.location}",
         f"Players in {obs.location}: {', '.join(obs.occupants)}"],
        ["Observation history:",
         *(_numbered(event_line(e, obs.labels) for e in obs.recent_events) or [NO_EVENTS])],
        ["Action history:", *(_numbered(own_action_line(e) for e in obs.recent_actions) or [NO_ACTIONS])],
        ["Your Assigned Tasks:",
         *(_numbered(f"{kind}: {name} ({room})" + (" [done]" if done else "")
                     for kind, name, room, done in obs.assigned_tasks) or ["No tasks assigned."])],
    ]
    if obs.camera_snapshot is not None:
        sections.append(["Security camera footage:",
                         *(f"{room}: {', '.join(names) or 'nobody'}"
                           for room, names in obs.camera_snapshot.items())])
    sections.append(["Available actions:", *_numbered(obs.option_displays)])
    sections.append(["Previous condensed memory:", memory or NO_MEMORY])
    if planner:
        sections.append(["Previous thought process:", thought or NO_THOUGHT])
    return "\n\n".join("\n".join(s) for s in sections)


def render_context(obs: Observation) -> str:
    """Identity, phase and map lines that precede the per-turn block."""
    if obs.phase == MEETING_PHASE:
        stage = "voting" if obs.voting else f"discussion round {obs.meeting_round} of 3"
        phase = f"Phase: meeting phase ({stage}), timestep {obs.timestep}, {obs.timesteps_left} timesteps left."
    else:
        phase = f"Phase: task phase, timestep {obs.timestep}, {obs.timesteps_left} timesteps left."
    lines = [f"You are {obs.label}. Your role: {obs.role}.", phase, "", "Map connections:",
             *obs.map_connections]
    if obs.path_hints:
        lines += ["", "Shortest paths to your unfinished tasks:", *obs.path_hints]
    return "\n".join(lines)


def render_prompt(obs: Observation, mind=None) -> str:
    return render_context(obs) + "\n\n" + render_observation(obs, mind)
