"""Terminal activity log and task-progress bar for recorded games."""

from __future__ import annotations

import time
from typing import Optional

from . import __version__
from .engine import GAME_END
from .errors import CorruptRecord
from .records import GameRecord, progress_series, replay
from .world import MapData, default_map_data

RESET = "\033[0m"
ANSI = {
    "red": "31", "blue": "34", "green": "32", "pink": "95", "orange": "38;5;208",
    "yellow": "33", "black": "90", "white": "97", "purple": "35", "brown": "38;5;94",
    "cyan": "36", "lime": "92",
}
BAR_WIDTH = 30


def progress_bar(fraction: float, width: int = BAR_WIDTH) -> str:
    fraction = min(max(fraction, 0.0), 1.0)
    filled = int(round(fraction * width))
    return f"Tasks [{'#' * filled}{'-' * (width - filled)}] {fraction * 100:5.1f}%"


def _paint(text: str, color: Optional[str], enabled: bool) -> str:
    if not enabled or color not in ANSI:
        return text
    return f"\033[{ANSI[color]}m{text}{RESET}"


def verify(record: GameRecord, map_data: Optional[MapData] = None) -> None:
    """Check engine version and that re-simulation reproduces the journal and outcome."""
    where = record.path or "<record>"
    version = record.header.get("engine_version")
    if version != __version__:
        raise CorruptRecord(where, 1, f"engine version {version!r} does not match {__version__!r}")
    state = replay(record, map_data)
    for i, (got, want) in enumerate(zip(state.events, record.events)):
        if got != want:
            raise CorruptRecord(where, i + 2, f"event diverges on re-simulation: {want.text!r}")
    if len(state.events) != len(record.events):
        raise CorruptRecord(where, min(len(state.events), len(record.events)) + 2,
                            "event count differs on re-simulation")
    if record.outcome is not None and state.outcome != record.outcome:
        raise CorruptRecord(where, len(record.events) + 2, "footer outcome differs from re-simulation")


def render_lines(record: GameRecord, *, color: bool = False, map_data: Optional[MapData] = None):
    """Yield (log line, task-progress fraction) per event."""
    catalog = (map_data or default_map_data()).catalog
    durations = {t.id: t.duration_steps for t in catalog}
    series = progress_series(record, durations)
    players = record.players
    for e, frac in zip(record.events, series):
        who = players.get(e.actor)
        label = f"Player {e.actor}: {who['color']}" if who else "System"
        line = f"t{e.timestep:>3} [{e.phase:<7}] {label:<18} {e.text}"
        if e.kind == GAME_END:
            line = f"t{e.timestep:>3} [{e.phase:<7}] {e.text}"
        yield _paint(line, who["color"] if who else None, color), frac


def play(record: GameRecord, out, *, speed: float = 0.0, color: bool = False,
         map_data: Optional[MapData] = None, sleep=time.sleep) -> float:
    """Write the log to ``out`` and return the final progress fraction."""
    last = 0.0
    for line, frac in render_lines(record, color=color, map_data=map_data):
        out.write(line + "\n")
        out.write("    " + progress_bar(frac) + "\n")
        last = frac
        if speed > 0:
            sleep(1.0 / speed)
    outcome = record.outcome
    if outcome is not None:
        out.write(f"Outcome: {outcome.winner} win ({outcome.condition}) after "
                  f"{record.footer.get('duration')} timesteps\n")
    elif record.footer is not None:
        out.write(f"Incomplete game: {record.footer.get('error') or 'aborted'}\n")
    out.flush()
    return last
