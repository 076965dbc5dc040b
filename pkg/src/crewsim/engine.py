"""Phase state machine: legal actions, action execution, meetings, termination.

``apply_action`` mutates the state in place and returns it together with the
events it emitted; callers that need snapshots must copy beforehand.
"""

from __future__ import annotations

import concurrent.futures
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .errors import AgentFailure, DeadPlayer, IllegalAction
from .world import (CREWMATE, IMPOSTOR, MEETING_PHASE, TASK_PHASE, GameState,
                    MeetingState, Player)

MOVE = "MOVE"
COMPLETE_TASK = "COMPLETE_TASK"
FAKE_TASK = "FAKE_TASK"
CALL_MEETING = "CALL_MEETING"
REPORT_BODY = "REPORT_BODY"
CHECK_CAMERA = "CHECK_CAMERA"
SPEAK = "SPEAK"
VENT = "VENT"
KILL = "KILL"
VOTE = "VOTE"

# Option list order. SPEAK precedes VENT/KILL so rendered lists match the
# published prompt examples.
ACTION_KINDS = (MOVE, COMPLETE_TASK, FAKE_TASK, CALL_MEETING, REPORT_BODY,
                CHECK_CAMERA, SPEAK, VENT, KILL, VOTE)
IMPOSTOR_ONLY = frozenset({KILL, VENT, FAKE_TASK})
CREWMATE_ONLY = frozenset({COMPLETE_TASK})
TASK_PHASE_ONLY = frozenset({MOVE, COMPLETE_TASK, FAKE_TASK, CALL_MEETING, REPORT_BODY,
                             CHECK_CAMERA, VENT, KILL})

MEETING_START = "MEETING_START"
EJECTION = "EJECTION"
NO_EJECTION = "NO_EJECTION"
GAME_END = "GAME_END"

ALL = "ALL"
SPEAK_DISPLAY = "SPEAK: '...'"

CREWMATES_ELIMINATED = "CrewmatesEliminated"
TIME_LIMIT_REACHED = "TimeLimitReached"
IMPOSTORS_ELIMINATED = "ImpostorsEliminated"
ALL_TASKS_COMPLETED = "AllTasksCompleted"
CONDITIONS = (CREWMATES_ELIMINATED, TIME_LIMIT_REACHED, IMPOSTORS_ELIMINATED, ALL_TASKS_COMPLETED)
WINNER_OF = {
    CREWMATES_ELIMINATED: "Impostors",
    TIME_LIMIT_REACHED: "Impostors",
    IMPOSTORS_ELIMINATED: "Crewmates",
    ALL_TASKS_COMPLETED: "Crewmates",
}


@dataclass(frozen=True)
class ActionOption:
    kind: str
    display: str
    target: Union[str, int, None] = None


@dataclass(frozen=True)
class Action:
    option: ActionOption
    text: Optional[str] = None  # utterance for SPEAK
    fallback: bool = False


@dataclass
class Event:
    timestep: int
    phase: str
    actor: Optional[int]
    kind: str
    text: str
    payload: dict = field(default_factory=dict)
    room: Optional[str] = None
    visibility: Union[str, tuple] = ALL
    witnesses: tuple = ()


@dataclass(frozen=True)
class Outcome:
    winner: str
    condition: str

    @classmethod
    def of(cls, condition: str) -> "Outcome":
        return cls(WINNER_OF[condition], condition)


Decide = Callable[[GameState, int, list], Union[Action, ActionOption]]


# ---------------------------------------------------------------------------
# legal actions


def _vote_options(state: GameState, player: Player) -> list:
    opts = [ActionOption(VOTE, f"VOTE {p.label}", p.id)
            for p in sorted(state.living(), key=lambda p: p.id) if p.id != player.id]
    opts.append(ActionOption(VOTE, "VOTE Skip", None))
    return opts


def legal_actions(state: GameState, pid: int) -> list:
    player = state.players[pid]
    if not player.alive:
        raise DeadPlayer(pid)
    if state.outcome is not None:
        return []
    if state.phase == MEETING_PHASE:
        if state.meeting is not None and state.meeting.voting:
            return _vote_options(state, player)
        return [ActionOption(SPEAK, SPEAK_DISPLAY)]

    graph = state.graph
    here = player.location
    opts = [ActionOption(MOVE, f"MOVE from {here} to {room}", room) for room in graph.neighbors(here)]
    if player.role == CREWMATE:
        opts += [ActionOption(COMPLETE_TASK, f"COMPLETE TASK - {t.spec.name}", t.spec.id)
                 for t in player.tasks if not t.complete and t.spec.room == here]
    else:
        opts += [ActionOption(FAKE_TASK, f"COMPLETE FAKE TASK - {s.name}", s.id)
                 for s in player.known_tasks if s.room == here]
    if here == graph.meeting_room:
        opts.append(ActionOption(CALL_MEETING, f"CALL MEETING using the emergency button at {here}"))
    for victim, room in sorted(state.bodies):
        if room == here:
            opts.append(ActionOption(REPORT_BODY, f"REPORT DEAD BODY of {state.players[victim].label}", victim))
    if here == graph.camera_room:
        opts.append(ActionOption(CHECK_CAMERA, f"CHECK SECURITY CAMERA at {here}"))
    opts.append(ActionOption(SPEAK, SPEAK_DISPLAY))
    if player.role == IMPOSTOR:
        opts += [ActionOption(VENT, f"VENT from {here} to {room}", room) for room in graph.vent_reachable(here)]
        cooldown = state.config.kill_cooldown
        if player.last_kill is None or state.timestep - player.last_kill >= cooldown:
            opts += [ActionOption(KILL, f"KILL {p.label}", p.id)
                     for p in sorted(state.occupants(here), key=lambda p: p.id)
                     if p.role == CREWMATE]
    return opts


# ---------------------------------------------------------------------------
# execution


def _emit(state: GameState, actor: Optional[int], kind: str, text: str, *, payload=None,
          room=None, visibility=ALL) -> Event:
    if visibility == ALL:
        witnesses = tuple(p.id for p in state.players.values() if p.alive)
    else:
        rooms = set(visibility)
        witnesses = tuple(p.id for p in state.players.values() if p.alive and p.location in rooms)
    tag = MEETING_PHASE if state.phase == MEETING_PHASE or kind in (MEETING_START, VOTE) else TASK_PHASE
    event = Event(state.timestep, tag, actor, kind, text, payload or {}, room, visibility, witnesses)
    idx = len(state.events)
    state.events.append(event)
    for pid in witnesses:
        if pid != actor:
            state.players[pid].seen.append(idx)
    if actor is not None:
        state.players[actor].own.append(idx)
    return event


def _start_meeting(state: GameState, caller: int) -> None:
    state.phase = MEETING_PHASE
    state.meeting = MeetingState(caller)
    for p in state.players.values():
        if p.alive:
            p.location = state.graph.meeting_room
    state.bodies.clear()
    _emit(state, None, MEETING_START, f"Meeting called by {state.players[caller].label}",
          payload={"caller": caller}, room=state.graph.meeting_room)


def _finish(state: GameState, outcome: Outcome) -> None:
    state.outcome = outcome
    _emit(state, None, GAME_END, f"Game over: {outcome.winner} win ({outcome.condition})",
          payload={"winner": outcome.winner, "condition": outcome.condition})


def _conclude_if_over(state: GameState) -> Optional[Outcome]:
    if state.outcome is None:
        outcome = check_termination(state)
        if outcome is not None:
            _finish(state, outcome)
    return state.outcome


def apply_action(state: GameState, pid: int, action: Union[Action, ActionOption]):
    """Execute one legal action; returns ``(state, emitted_events)``."""
    if isinstance(action, ActionOption):
        action = Action(action)
    opt = action.option
    if opt not in legal_actions(state, pid):
        raise IllegalAction(f"player {pid}: {opt.display!r} is not a legal option")
    player = state.players[pid]
    here = player.location
    start = len(state.events)
    player.camera_snapshot = None
    extra = {"fallback": True} if action.fallback else {}
    kind = opt.kind

    if kind in (MOVE, VENT):
        _emit(state, pid, kind, opt.display, payload={"from": here, "to": opt.target, **extra},
              room=here, visibility=(here, opt.target))
        player.location = opt.target
    elif kind == COMPLETE_TASK:
        task = next(t for t in player.tasks if t.spec.id == opt.target)
        task.remaining_steps -= 1
        _emit(state, pid, kind, opt.display, payload={"task": opt.target, **extra},
              room=here, visibility=(here,))
    elif kind == FAKE_TASK:
        spec = next(s for s in player.known_tasks if s.id == opt.target)
        # observers see the same line a real completion produces
        _emit(state, pid, kind, f"COMPLETE TASK - {spec.name}", payload={"task": opt.target, **extra},
              room=here, visibility=(here,))
    elif kind == KILL:
        victim = state.players[opt.target]
        victim.alive = False
        state.bodies.append((victim.id, here))
        player.last_kill = state.timestep
        _emit(state, pid, kind, opt.display, payload={"victim": victim.id, **extra},
              room=here, visibility=(here,))
    elif kind in (CALL_MEETING, REPORT_BODY):
        payload = {"victim": opt.target} if kind == REPORT_BODY else {}
        _emit(state, pid, kind, opt.display, payload={**payload, **extra}, room=here)
        _start_meeting(state, pid)
    elif kind == CHECK_CAMERA:
        _emit(state, pid, kind, opt.display, payload=dict(extra), room=here, visibility=(here,))
        player.camera_snapshot = {
            room: [p.label for p in sorted(state.occupants(room), key=lambda p: p.id)]
            for room in state.graph.camera_coverage
        }
    elif kind == SPEAK:
        text = (action.text or "...").strip() or "..."
        if state.phase == MEETING_PHASE:
            _emit(state, pid, kind, f'SPEAK: "{text}"', payload={"text": text, **extra}, room=here)
        else:
            _emit(state, pid, kind, f'SPEAK: "{text}"', payload={"text": text, **extra},
                  room=here, visibility=(here,))
    elif kind == VOTE:
        state.meeting.votes[pid] = opt.target
        _emit(state, pid, kind, opt.display, payload={"target": opt.target, **extra}, room=here)
    else:  # pragma: no cover - legal_actions never produces other kinds
        raise IllegalAction(kind)

    _conclude_if_over(state)
    return state, state.events[start:]


# ---------------------------------------------------------------------------
# votes and termination


def tally_votes(votes: dict):
    """Strict plurality over non-Skip targets. Returns the ejected id or None."""
    counts = Counter(votes.values())
    if not counts:
        return None
    top = max(counts.values())
    leaders = [target for target, n in counts.items() if n == top]
    if len(leaders) != 1 or leaders[0] is None:
        return None
    return leaders[0]


def resolve_votes(state: GameState) -> Optional[int]:
    ejected = tally_votes(state.meeting.votes)
    room = state.graph.meeting_room
    if ejected is None:
        _emit(state, None, NO_EJECTION, "No one was ejected", payload={"votes": _votes_payload(state)},
              room=room)
    else:
        target = state.players[ejected]
        target.alive = False
        _emit(state, None, EJECTION, f"{target.label} was ejected",
              payload={"target": ejected, "votes": _votes_payload(state)}, room=room)
    state.meeting = None
    state.phase = TASK_PHASE
    _conclude_if_over(state)
    return ejected


def _votes_payload(state: GameState) -> dict:
    return {str(k): v for k, v in sorted(state.meeting.votes.items())}


def check_termination(state: GameState) -> Optional[Outcome]:
    impostors = crewmates = 0
    tasks_done = True
    for p in state.players.values():
        if not p.alive:
            continue
        if p.role == IMPOSTOR:
            impostors += 1
        else:
            crewmates += 1
            if tasks_done and any(not t.complete for t in p.tasks):
                tasks_done = False
    if impostors == 0:
        return Outcome.of(IMPOSTORS_ELIMINATED)
    if impostors >= crewmates:
        return Outcome.of(CREWMATES_ELIMINATED)
    if tasks_done:
        return Outcome.of(ALL_TASKS_COMPLETED)
    # a meeting already called runs to its vote before the clock is checked
    if state.phase == TASK_PHASE and state.timestep >= state.config.time_limit_steps:
        return Outcome.of(TIME_LIMIT_REACHED)
    return None


def task_progress(state: GameState) -> float:
    done = total = 0
    for p in state.players.values():
        if p.alive and p.role == CREWMATE:
            for t in p.tasks:
                total += t.spec.duration_steps
                done += t.spec.duration_steps - t.remaining_steps
    return 1.0 if total == 0 else done / total


# ---------------------------------------------------------------------------
# scheduling


class _Caller:
    """Invokes decision callbacks, optionally bounded by a timeout."""

    def __init__(self, decide: Decide, timeout: Optional[float] = None):
        self.decide = decide
        self.timeout = timeout
        self._pool = concurrent.futures.ThreadPoolExecutor(max_workers=1) if timeout else None

    def __call__(self, state: GameState, pid: int, options: list) -> Action:
        try:
            if self._pool is None:
                choice = self.decide(state, pid, options)
            else:
                choice = self._pool.submit(self.decide, state, pid, options).result(self.timeout)
        except concurrent.futures.TimeoutError as exc:
            raise AgentFailure(pid, f"no decision within {self.timeout}s") from exc
        except AgentFailure:
            raise
        except Exception as exc:
            raise AgentFailure(pid, str(exc)) from exc
        return Action(choice) if isinstance(choice, ActionOption) else choice

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=False, cancel_futures=True)


def _as_caller(decide) -> _Caller:
    return decide if isinstance(decide, _Caller) else _Caller(decide)


def step_task_phase(state: GameState, decide: Decide) -> GameState:
    """One timestep: living players act in ascending id order."""
    call = _as_caller(decide)
    for pid in sorted(p.id for p in state.living()):
        if state.outcome is not None or state.phase != TASK_PHASE:
            break
        if not state.players[pid].alive:
            continue
        apply_action(state, pid, call(state, pid, legal_actions(state, pid)))
    if state.outcome is None:
        state.timestep += 1
        _conclude_if_over(state)
    return state


def run_meeting(state: GameState, decide: Decide) -> GameState:
    """Discussion rounds (everyone speaks once per round), then a vote."""
    call = _as_caller(decide)
    order = sorted(p.id for p in state.living())
    for rnd in range(1, state.config.discussion_rounds + 1):
        state.meeting.round = rnd
        for pid in order:
            apply_action(state, pid, call(state, pid, legal_actions(state, pid)))
    state.meeting.voting = True
    for pid in order:
        apply_action(state, pid, call(state, pid, legal_actions(state, pid)))
    resolve_votes(state)
    return state


def run_game(state: GameState, decide: Decide, *, decision_timeout: Optional[float] = None,
             on_meeting_end: Optional[Callable[[GameState], None]] = None) -> Outcome:
    call = _Caller(decide, decision_timeout)
    try:
        _conclude_if_over(state)
        while state.outcome is None:
            if state.phase == TASK_PHASE:
                step_task_phase(state, call)
            else:
                run_meeting(state, call)
                if on_meeting_end is not None:
                    on_meeting_end(state)
    finally:
        call.close()
    return state.outcome
