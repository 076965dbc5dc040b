"""GameRecord JSONL persistence and replay by re-simulation."""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .engine import (ALL, CALL_MEETING, CHECK_CAMERA, COMPLETE_TASK, EJECTION, FAKE_TASK, KILL,
                     MOVE, REPORT_BODY, SPEAK, VENT, VOTE, Action, Event, Outcome, run_game,
                     task_progress)
from .errors import CorruptRecord
from .world import CREWMATE, GameConfig, GameState, new_game

FORMAT_VERSION = 1
PLAYER_ACTIONS = frozenset({MOVE, COMPLETE_TASK, FAKE_TASK, CALL_MEETING, REPORT_BODY,
                            CHECK_CAMERA, SPEAK, VENT, KILL, VOTE})


@dataclass
class GameRecord:
    header: dict
    events: list                      # Event
    footer: Optional[dict] = None
    path: Optional[Path] = field(default=None, compare=False)

    @property
    def config(self) -> GameConfig:
        return GameConfig.from_dict(self.header["config"])

    @property
    def outcome(self) -> Optional[Outcome]:
        out = (self.footer or {}).get("outcome")
        return Outcome(out["winner"], out["condition"]) if out else None

    @property
    def complete(self) -> bool:
        return bool(self.footer and self.footer.get("complete"))

    @property
    def players(self) -> dict:
        return {p["id"]: p for p in self.header["players"]}


def config_hash(config: GameConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_record(state: GameState, *, game_id: str, agents: dict, error: Optional[str] = None,
                 meta: Optional[dict] = None) -> GameRecord:
    """Snapshot a (finished or aborted) game. ``agents`` maps player id -> controller."""
    cfg = state.config
    players = []
    for p in sorted(state.players.values(), key=lambda p: p.id):
        spec = cfg.agent_for(p.id, p.role)
        agent = agents.get(p.id)
        players.append({
            "id": p.id, "color": p.color, "role": p.role, "persona": p.persona,
            "agent": getattr(agent, "kind", spec.kind), "planner": spec.planner,
            "tasks": [t.spec.id for t in p.tasks], "known_tasks": [s.id for s in p.known_tasks],
        })
    header = {
        "type": "header", "format": FORMAT_VERSION, "engine_version": __version__,
        "game_id": game_id, "seed": cfg.seed, "config_hash": config_hash(cfg),
        "config": cfg.to_dict(), "players": players,
    }
    if meta:
        header["experiment"] = dict(meta)
    minds = {}
    for pid, agent in sorted(agents.items()):
        mind = getattr(agent, "mind", None)
        if mind is not None:
            minds[str(pid)] = {"memory": mind.condensed_memory, "thought": mind.previous_thought,
                               "planner": mind.planner_enabled}
    outcome = state.outcome
    footer = {
        "type": "footer", "complete": outcome is not None and error is None,
        "outcome": {"winner": outcome.winner, "condition": outcome.condition} if outcome else None,
        "task_progress": round(task_progress(state), 12), "duration": state.timestep,
        "error": error, "minds": minds,
    }
    return GameRecord(header, list(state.events), footer)


def event_to_json(e: Event) -> dict:
    return {"type": "event", "t": e.timestep, "phase": e.phase, "actor": e.actor, "kind": e.kind,
            "text": e.text, "payload": e.payload, "room": e.room,
            "visibility": e.visibility if e.visibility == ALL else list(e.visibility),
            "witnesses": list(e.witnesses)}


def event_from_json(d: dict) -> Event:
    vis = d["visibility"]
    return Event(d["t"], d["phase"], d["actor"], d["kind"], d["text"], d["payload"], d["room"],
                 vis if vis == ALL else tuple(vis), tuple(d["witnesses"]))


def dumps_record(record: GameRecord) -> str:
    lines = [json.dumps(record.header)]
    lines += [json.dumps(event_to_json(e)) for e in record.events]
    if record.footer is not None:
        lines.append(json.dumps(record.footer))
    return "\n".join(lines) + "\n"


def write_record(record: GameRecord, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_record(record), encoding="utf-8")
    return path


def loads_record(text: str, path="<string>", *, require_footer: bool = True) -> GameRecord:
    header = None
    footer = None
    events = []
    lineno = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if footer is not None:
            raise CorruptRecord(path, lineno, "content after footer")
        try:
            obj = json.loads(line)
            kind = obj["type"]
            if header is None:
                if kind != "header":
                    raise CorruptRecord(path, lineno, "first line is not a header")
                header = obj
            elif kind == "event":
                events.append(event_from_json(obj))
            elif kind == "footer":
                footer = obj
            else:
                raise CorruptRecord(path, lineno, f"unknown line type {kind!r}")
        except CorruptRecord:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptRecord(path, lineno, f"unparseable line: {exc}") from exc
    if header is None:
        raise CorruptRecord(path, max(lineno, 1), "empty record")
    if footer is None and require_footer:
        raise CorruptRecord(path, lineno, "missing footer (truncated record)")
    return GameRecord(header, events, footer)


def read_record(path, *, require_footer: bool = True) -> GameRecord:
    path = Path(path)
    record = loads_record(path.read_text(encoding="utf-8"), path, require_footer=require_footer)
    record.path = path
    return record


def read_records(directory) -> list:
    directory = Path(directory)
    files = sorted(directory.glob("*.jsonl")) if directory.is_dir() else []
    return [read_record(p) for p in files]


# ---------------------------------------------------------------------------
# replay


class ReplayExhausted(Exception):
    pass


def _target_of(event: Event):
    p = event.payload
    if event.kind in (MOVE, VENT):
        return p["to"]
    if event.kind in (COMPLETE_TASK, FAKE_TASK):
        return p["task"]
    if event.kind in (KILL, REPORT_BODY):
        return p["victim"]
    if event.kind == VOTE:
        return p["target"]
    return None


class RecordedDecider:
    """Feeds each player's recorded actions back to the engine in order."""

    def __init__(self, events):
        self.queues = defaultdict(deque)
        for e in events:
            if e.actor is not None and e.kind in PLAYER_ACTIONS:
                self.queues[e.actor].append(e)

    def __call__(self, state, pid, options):
        if not self.queues[pid]:
            raise ReplayExhausted(pid)
        e = self.queues[pid].popleft()
        target = _target_of(e)
        for opt in options:
            if opt.kind == e.kind and opt.target == target:
                return Action(opt, e.payload.get("text"), bool(e.payload.get("fallback")))
        raise CorruptRecord("<replay>", 0, f"recorded action {e.text!r} is not legal at t={e.timestep}")


def replay(record: GameRecord, map_data=None) -> GameState:
    """Re-simulate from the header config using the recorded decisions."""
    state = new_game(record.config, map_data)
    try:
        run_game(state, RecordedDecider(record.events))
    except Exception as exc:
        cause = exc.__cause__ or exc
        if not isinstance(cause, ReplayExhausted):
            if isinstance(cause, CorruptRecord):
                raise cause from None
            raise
    return state


def progress_series(record: GameRecord, catalog_durations: dict) -> list:
    """Task completion fraction after each event, recomputed from the journal alone."""
    alive = {p["id"] for p in record.header["players"]}
    crew_tasks = {p["id"]: {t: catalog_durations[t] for t in p["tasks"]}
                  for p in record.header["players"] if p["role"] == CREWMATE}
    done = {(pid, t): 0 for pid, ts in crew_tasks.items() for t in ts}
    series = []
    for e in record.events:
        if e.kind == COMPLETE_TASK:
            done[(e.actor, e.payload["task"])] += 1
        elif e.kind == KILL:
            alive.discard(e.payload["victim"])
        elif e.kind == EJECTION:
            alive.discard(e.payload["target"])
        total = sum(d for pid, ts in crew_tasks.items() if pid in alive for d in ts.values())
        got = sum(done[(pid, t)] for pid, ts in crew_tasks.items() if pid in alive for t in ts)
        series.append(1.0 if total == 0 else got / total)
    return series
