"""Run configuration file (TOML) and backend construction."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigInvalid
from .llm_client import (DEFAULT_MAX_TOKENS, DEFAULT_MODEL, DEFAULT_TEMPERATURE, LLMClient,
                         RemoteBackend, ScriptedBackend, UniformOptionBackend)
from .world import AgentSpec, GameConfig, MapData, load_map

SCHEMA_VERSION = 1
BACKENDS = ("uniform", "scripted", "remote")


@dataclass
class ClientConfig:
    backend: str = "uniform"
    endpoint: str = "https://api.openai.com/v1"
    model: str = DEFAULT_MODEL
    credential_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    retries: int = 3
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    max_in_flight: Optional[int] = None
    script: Optional[str] = None
    decision_timeout: Optional[float] = None


@dataclass
class ExperimentConfig:
    setup: str = "AllRandom"
    planner: str = "enabled"
    games: int = 20
    seeds: Optional[list] = None
    base_seed: Optional[int] = None
    workers: int = 1
    interview: bool = False
    judge: str = "mock"
    out: str = "runs"


@dataclass
class RunConfig:
    game: GameConfig = field(default_factory=GameConfig)
    map_path: Optional[str] = None
    client: ClientConfig = field(default_factory=ClientConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    source: Optional[Path] = None

    def map_data(self) -> Optional[MapData]:
        return load_map(Path(self.map_path)) if self.map_path else None


_GAME_KEYS = {"n_crewmates", "n_impostors", "time_limit_steps", "discussion_rounds", "recent_k",
              "kill_cooldown", "seed", "map", "tasks"}
_AGENT_KEYS = {"kind", "persona", "planner"}


def _line_of(text: str, key: str) -> int:
    leaf = key.split(".")[-1]
    pattern = re.compile(rf"^\s*(\[+[^\]]*\b{re.escape(leaf)}\b[^\]]*\]+|\"?{re.escape(leaf)}\"?\s*=)")
    for i, line in enumerate(text.splitlines(), 1):
        if pattern.search(line):
            return i
    inline = re.compile(rf"[{{,]\s*\"?{re.escape(leaf)}\"?\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        if inline.search(line):
            return i
    return 0


def _reject_unknown(section: dict, allowed, prefix: str, text: str) -> None:
    for key in section:
        if key not in allowed:
            path = f"{prefix}.{key}" if prefix else key
            raise ConfigInvalid(f"unknown key '{path}' (line {_line_of(text, path)})")


def _agent(d: dict, prefix: str, text: str) -> AgentSpec:
    if not isinstance(d, dict):
        raise ConfigInvalid(f"'{prefix}' must be a table (line {_line_of(text, prefix)})")
    _reject_unknown(d, _AGENT_KEYS, prefix, text)
    persona = d.get("persona", "auto")
    return AgentSpec(kind=d.get("kind", "random"), persona=persona or None, planner=bool(d.get("planner", True)))


def _typed(cls, d: dict, prefix: str, text: str):
    names = {f.name for f in fields(cls)}
    _reject_unknown(d, names, prefix, text)
    return cls(**d)


def parse_config(text: str, source=None) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{source or 'config'}: {exc}") from exc
    _reject_unknown(raw, {"schema", "game", "agents", "client", "experiment"}, "", text)
    schema = raw.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigInvalid(f"unsupported schema {schema} (line {_line_of(text, 'schema')}); "
                            f"expected {SCHEMA_VERSION}")

    g = dict(raw.get("game", {}))
    _reject_unknown(g, _GAME_KEYS, "game", text)
    map_path = g.pop("map", None)
    tasks = g.pop("tasks", None)
    if tasks is not None:
        _reject_unknown(tasks, {"common", "short", "long"}, "game.tasks", text)
        g["tasks_per_crewmate"] = {k: int(tasks.get(k, 0)) for k in ("common", "short", "long")}

    a = raw.get("agents", {})
    _reject_unknown(a, {"crewmate", "impostor", "players"}, "agents", text)
    if "crewmate" in a:
        g["crewmate_agent"] = _agent(a["crewmate"], "agents.crewmate", text)
    if "impostor" in a:
        g["impostor_agent"] = _agent(a["impostor"], "agents.impostor", text)
    players = {}
    for pid, spec in a.get("players", {}).items():
        if not str(pid).isdigit():
            raise ConfigInvalid(f"agents.players keys must be player numbers, got {pid!r}")
        players[int(pid)] = _agent(spec, f"agents.players.{pid}", text)
    if players:
        g["player_agents"] = players
    try:
        game = GameConfig(**g)
        game.validate()
    except TypeError as exc:
        raise ConfigInvalid(f"game: {exc}") from exc

    client = _typed(ClientConfig, raw.get("client", {}), "client", text)
    if client.backend not in BACKENDS:
        raise ConfigInvalid(f"client.backend must be one of {BACKENDS} (line {_line_of(text, 'backend')})")
    experiment = _typed(ExperimentConfig, raw.get("experiment", {}), "experiment", text)
    if experiment.judge not in ("mock", "llm"):
        raise ConfigInvalid(f"experiment.judge must be 'mock' or 'llm' (line {_line_of(text, 'judge')})")
    return RunConfig(game, map_path, client, experiment, Path(source) if source else None)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, path)
    if cfg.map_path and not Path(cfg.map_path).is_absolute():
        cfg.map_path = str((path.parent / cfg.map_path).resolve())
    if cfg.client.script and not Path(cfg.client.script).is_absolute():
        cfg.client.script = str((path.parent / cfg.client.script).resolve())
    return cfg


def with_overrides(cfg: RunConfig, *, seed=None, games=None, backend=None, workers=None) -> RunConfig:
    if seed is not None:
        cfg.game = replace(cfg.game, seed=seed)
        cfg.experiment.base_seed = seed
        cfg.experiment.seeds = None
    if games is not None:
        cfg.experiment.games = games
    if backend is not None:
        if backend not in BACKENDS:
            raise ConfigInvalid(f"--backend must be one of {BACKENDS}")
        cfg.client.backend = backend
    if workers is not None:
        cfg.experiment.workers = workers
    return cfg


def _load_scripts(script) -> ScriptedBackend:
    if not script:
        raise ConfigInvalid("client.script is required for the scripted backend")
    path = Path(script)
    files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
    replies = {}
    for f in files:
        replies.update(ScriptedBackend.from_transcript(f).replies)
    return ScriptedBackend(replies)


def client_factory(cc: ClientConfig):
    """Build a per-game client factory. Remote credentials are checked immediately."""
    from .runner import derive_seed

    def client(backend):
        return LLMClient(backend, cc.model, cc.temperature, cc.max_tokens)

    if cc.backend == "remote":
        shared = RemoteBackend(cc.endpoint, credential_env=cc.credential_env, timeout=cc.timeout,
                               retries=cc.retries, max_in_flight=cc.max_in_flight)
        return lambda seed: client(shared)
    if cc.backend == "scripted":
        scripted = _load_scripts(cc.script)
        return lambda seed: client(scripted)
    return lambda seed: client(UniformOptionBackend(derive_seed(seed, "uniform-option")))
