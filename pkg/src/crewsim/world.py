"""Static game definitions and construction of the initial game state."""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

from . import personas
from .errors import ConfigInvalid, InsufficientCatalog

CREWMATE = personas.CREWMATE
IMPOSTOR = personas.IMPOSTOR

TASK_KINDS = ("common", "short", "long")
COLORS = ("red", "blue", "green", "pink", "orange", "yellow",
          "black", "white", "purple", "brown", "cyan", "lime")

TASK_PHASE = "task"
MEETING_PHASE = "meeting"


@dataclass(frozen=True)
class TaskSpec:
    id: str
    name: str
    room: str
    kind: str

    @property
    def duration_steps(self) -> int:
        return 2 if self.kind == "long" else 1

    def label(self) -> str:
        return f"{self.kind}: {self.name} ({self.room})"


@dataclass
class TaskInstance:
    spec: TaskSpec
    owner: int
    remaining_steps: int

    @property
    def complete(self) -> bool:
        return self.remaining_steps == 0


class RoomGraph:
    """Room adjacency plus vent groups. Neighbor order follows the map file."""

    def __init__(self, adjacency: dict[str, list[str]], vent_groups: list[list[str]],
                 meeting_room: str, camera_room: str,
                 camera_coverage: Optional[list[str]] = None):
        self.adjacency = {room: tuple(nbrs) for room, nbrs in adjacency.items()}
        self.rooms = tuple(self.adjacency)
        self.vent_groups = tuple(tuple(g) for g in vent_groups)
        self.meeting_room = meeting_room
        self.camera_room = camera_room
        if camera_coverage is None:
            camera_coverage = [r for r in self.rooms if r != camera_room]
        self.camera_coverage = tuple(camera_coverage)
        self._vents = {}
        for group in self.vent_groups:
            for room in group:
                self._vents.setdefault(room, [])
                self._vents[room].extend(r for r in group if r != room and r not in self._vents[room])
        self._dist_cache: dict[str, dict[str, int]] = {}
        self._validate()
        self._connections = [f"{room} → {', '.join(nbrs)}" for room, nbrs in self.adjacency.items()]

    def _validate(self) -> None:
        for room, nbrs in self.adjacency.items():
            if room in nbrs:
                raise ConfigInvalid(f"map: {room} is adjacent to itself")
            for n in nbrs:
                if n not in self.adjacency:
                    raise ConfigInvalid(f"map: {room} links to unknown room {n}")
                if room not in self.adjacency[n]:
                    raise ConfigInvalid(f"map: adjacency {room}-{n} is not symmetric")
        for group in self.vent_groups:
            if len(group) < 2 or any(r not in self.adjacency for r in group):
                raise ConfigInvalid(f"map: bad vent group {group}")
        for r in (self.meeting_room, self.camera_room, *self.camera_coverage):
            if r not in self.adjacency:
                raise ConfigInvalid(f"map: unknown room {r}")
        if self.meeting_room == self.camera_room:
            raise ConfigInvalid("map: meeting room and camera room coincide")
        if len(self.distances_from(self.rooms[0])) != len(self.rooms):
            raise ConfigInvalid("map: graph is not connected")

    def neighbors(self, room: str) -> tuple[str, ...]:
        return self.adjacency[room]

    def vent_reachable(self, room: str) -> tuple[str, ...]:
        return tuple(self._vents.get(room, ()))

    def distances_from(self, source: str) -> dict[str, int]:
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        dist = {source: 0}
        queue = deque([source])
        while queue:
            room = queue.popleft()
            for n in self.adjacency[room]:
                if n not in dist:
                    dist[n] = dist[room] + 1
                    queue.append(n)
        self._dist_cache[source] = dist
        return dist

    def connections_text(self) -> list[str]:
        return list(self._connections)


@dataclass(frozen=True)
class MapData:
    graph: RoomGraph
    catalog: tuple[TaskSpec, ...]


def _slug(text: str) -> str:
    return text.lower().replace(" ", "-")


def load_map(path: Optional[Path] = None) -> MapData:
    """Read a map + task catalog file (JSON). Defaults to the bundled layout."""
    if path is None:
        raw = json.loads(resources.files("crewsim.data").joinpath("skeld.json").read_text("utf-8"))
    else:
        raw = json.loads(Path(path).read_text("utf-8"))
    graph = RoomGraph(raw["adjacency"], raw["vent_groups"], raw["meeting_room"],
                      raw["camera_room"], raw.get("camera_coverage"))
    specs = []
    for t in raw["tasks"]:
        if t["kind"] not in TASK_KINDS:
            raise ConfigInvalid(f"map: unknown task kind {t['kind']!r}")
        if t["room"] not in graph.adjacency:
            raise ConfigInvalid(f"map: task {t['name']} in unknown room {t['room']}")
        specs.append(TaskSpec(f"{_slug(t['room'])}/{_slug(t['name'])}", t["name"], t["room"], t["kind"]))
    return MapData(graph, tuple(specs))


@lru_cache(maxsize=None)
def default_map_data() -> MapData:
    return load_map()


def default_map() -> RoomGraph:
    return default_map_data().graph


def shortest_path(graph: RoomGraph, start: str, goal: str) -> list[str]:
    """Minimum-hop path, inclusive of both ends; lexicographically smallest among ties."""
    if start not in graph.adjacency or goal not in graph.adjacency:
        raise KeyError(f"unknown room in ({start!r}, {goal!r})")
    to_goal = graph.distances_from(goal)
    path = [start]
    while path[-1] != goal:
        here = path[-1]
        path.append(min(n for n in graph.neighbors(here) if to_goal[n] == to_goal[here] - 1))
    return path


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class AgentSpec:
    kind: str = "random"            # random | llm | human
    persona: Optional[str] = "auto"  # persona name, "auto" (drawn per role) or None
    planner: bool = True


@dataclass(frozen=True)
class GameConfig:
    n_crewmates: int = 4
    n_impostors: int = 1
    tasks_per_crewmate: dict = field(default_factory=lambda: {"common": 1, "short": 1, "long": 1})
    time_limit_steps: int = 50
    discussion_rounds: int = 3
    recent_k: int = 10
    kill_cooldown: int = 0
    seed: int = 0
    crewmate_agent: AgentSpec = AgentSpec()
    impostor_agent: AgentSpec = AgentSpec()
    player_agents: dict = field(default_factory=dict)  # player id -> AgentSpec override

    @property
    def n_players(self) -> int:
        return self.n_crewmates + self.n_impostors

    def validate(self) -> None:
        if self.n_impostors < 1:
            raise ConfigInvalid("n_impostors must be >= 1")
        if self.n_crewmates <= self.n_impostors:
            raise ConfigInvalid("n_crewmates must exceed n_impostors (impostors are a strict minority)")
        if self.n_players > len(COLORS):
            raise ConfigInvalid(f"at most {len(COLORS)} players are supported")
        if self.time_limit_steps < 1:
            raise ConfigInvalid("time_limit_steps must be >= 1")
        if self.discussion_rounds != 3:
            raise ConfigInvalid("discussion_rounds is fixed at 3")
        if self.recent_k < 0 or self.kill_cooldown < 0:
            raise ConfigInvalid("recent_k and kill_cooldown must be non-negative")
        if set(self.tasks_per_crewmate) - set(TASK_KINDS):
            raise ConfigInvalid(f"tasks_per_crewmate keys must be among {TASK_KINDS}")
        if self.tasks_per_crewmate.get("common", 0) > 1:
            raise ConfigInvalid("at most one common task per crewmate")
        if any(v < 0 for v in self.tasks_per_crewmate.values()):
            raise ConfigInvalid("task counts must be non-negative")
        for pid in self.player_agents:
            if not 1 <= int(pid) <= self.n_players:
                raise ConfigInvalid(f"player_agents refers to unknown player {pid}")

    def agent_for(self, player: int, role: str) -> AgentSpec:
        spec = self.player_agents.get(player) or self.player_agents.get(str(player))
        if spec is not None:
            return spec
        return self.impostor_agent if role == IMPOSTOR else self.crewmate_agent

    def to_dict(self) -> dict:
        d = asdict(self)
        d["player_agents"] = {str(k): asdict(v) for k, v in self.player_agents.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        d = dict(d)
        for key in ("crewmate_agent", "impostor_agent"):
            if key in d and isinstance(d[key], dict):
                d[key] = AgentSpec(**d[key])
        if "player_agents" in d:
            d["player_agents"] = {int(k): v if isinstance(v, AgentSpec) else AgentSpec(**v)
                                  for k, v in d["player_agents"].items()}
        return cls(**d)


# ---------------------------------------------------------------------------
# state


@dataclass
class Player:
    id: int
    color: str
    role: str
    location: str
    alive: bool = True
    tasks: list = field(default_factory=list)        # TaskInstance, crewmates only
    known_tasks: list = field(default_factory=list)  # TaskSpec the impostor may fake
    persona: Optional[str] = None
    persona_plan: Optional[str] = None
    seen: list = field(default_factory=list)          # indices of events witnessed
    own: list = field(default_factory=list)           # indices of events this player caused
    camera_snapshot: Optional[dict] = None
    last_kill: Optional[int] = None

    @property
    def label(self) -> str:
        return f"Player {self.id}: {self.color}"

    @property
    def is_impostor(self) -> bool:
        return self.role == IMPOSTOR


@dataclass
class MeetingState:
    caller: int
    round: int = 1
    voting: bool = False
    votes: dict = field(default_factory=dict)  # voter -> target id or None (Skip)


@dataclass
class GameState:
    config: GameConfig
    graph: RoomGraph
    catalog: tuple
    players: dict
    timestep: int = 0
    phase: str = TASK_PHASE
    meeting: Optional[MeetingState] = None
    bodies: list = field(default_factory=list)  # (victim id, room)
    events: list = field(default_factory=list)
    rng: random.Random = field(default_factory=random.Random)
    outcome: object = None
    common_task: Optional[TaskSpec] = None

    def living(self) -> list:
        return [p for p in self.players.values() if p.alive]

    def occupants(self, room: str) -> list:
        return [p for p in self.players.values() if p.alive and p.location == room]

    @property
    def tasks(self) -> dict:
        return {f"{t.owner}:{t.spec.id}": t for p in self.players.values() for t in p.tasks}


def assign_tasks(config: GameConfig, catalog, roles: dict, rng: random.Random):
    """Deal task lists. Returns (per-player instances, shared common spec or None)."""
    counts = {k: config.tasks_per_crewmate.get(k, 0) for k in TASK_KINDS}
    by_kind = {k: [s for s in catalog if s.kind == k] for k in TASK_KINDS}
    for kind, n in counts.items():
        if n > len(by_kind[kind]):
            raise InsufficientCatalog(f"need {n} distinct {kind} tasks, catalog has {len(by_kind[kind])}")
    common = rng.choice(by_kind["common"]) if counts["common"] else None
    assigned = {}
    for pid in sorted(roles):
        if roles[pid] == IMPOSTOR:
            assigned[pid] = []
            continue
        specs = [common] if common else []
        specs += rng.sample(by_kind["short"], counts["short"])
        specs += rng.sample(by_kind["long"], counts["long"])
        assigned[pid] = [TaskInstance(s, pid, s.duration_steps) for s in specs]
    return assigned, common


def _pick_persona(spec: AgentSpec, role: str, rng: random.Random) -> Optional[str]:
    if spec.persona is None or spec.kind != "llm":
        return spec.persona if spec.persona not in (None, "auto") else None
    if spec.persona == "auto":
        return rng.choice(personas.for_role(role)).name
    return spec.persona


def new_game(config: GameConfig, map_data: Optional[MapData] = None) -> GameState:
    config.validate()
    map_data = map_data or default_map_data()
    graph = map_data.graph
    rng = random.Random(config.seed)
    ids = list(range(1, config.n_players + 1))
    colors = rng.sample(COLORS, config.n_players)
    impostors = set(rng.sample(ids, config.n_impostors))
    roles = {pid: IMPOSTOR if pid in impostors else CREWMATE for pid in ids}
    tasks, common = assign_tasks(config, map_data.catalog, roles, rng)
    players = {}
    for pid, color in zip(ids, colors):
        p = Player(pid, color, roles[pid], graph.meeting_room, tasks=tasks[pid])
        if roles[pid] == IMPOSTOR and common is not None:
            p.known_tasks = [common]
        spec = config.agent_for(pid, roles[pid])
        p.persona = _pick_persona(spec, roles[pid], rng)
        if p.persona == personas.RANDOM_PERSONA:
            p.persona_plan = rng.choice(personas.random_plans(roles[pid]))
        players[pid] = p
    return GameState(config=config, graph=graph, catalog=map_data.catalog, players=players,
                     rng=rng, common_task=common)
