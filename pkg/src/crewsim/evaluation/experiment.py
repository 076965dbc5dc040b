"""Batch experiments and per-setup outcome tables."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from ..engine import CONDITIONS
from ..llm_client import write_transcript
from ..records import write_record
from ..runner import GameResult, offline_client_factory, play_game
from ..world import AgentSpec, GameConfig

log = logging.getLogger(__name__)

ALL_RANDOM = "AllRandom"
ALL_LLMS = "AllLLMs"
LLM_CREW_RANDOM_IMPOSTOR = "LlmCrewmatesRandomImpostor"
RANDOM_CREW_LLM_IMPOSTOR = "RandomCrewmatesLlmImpostor"

# label -> (crewmate agent kind, impostor agent kind)
SETUPS = {
    ALL_RANDOM: ("random", "random"),
    ALL_LLMS: ("llm", "llm"),
    LLM_CREW_RANDOM_IMPOSTOR: ("llm", "random"),
    RANDOM_CREW_LLM_IMPOSTOR: ("random", "llm"),
}
DISPLAY_NAMES = {
    ALL_RANDOM: "All Random",
    ALL_LLMS: "All LLMs",
    LLM_CREW_RANDOM_IMPOSTOR: "LLM Crewmates + Random Impostor",
    RANDOM_CREW_LLM_IMPOSTOR: "Random Crewmates + LLM Impostor",
}
CONDITION_HEADINGS = {
    "CrewmatesEliminated": "Crewmates eliminated",
    "TimeLimitReached": "Time limit reached",
    "ImpostorsEliminated": "Impostors eliminated",
    "AllTasksCompleted": "All tasks completed",
}


@dataclass
class ExperimentSetup:
    label: str
    planner: str = "enabled"           # enabled | disabled | n/a
    games: int = 20
    base: GameConfig = field(default_factory=GameConfig)
    seeds: Optional[list] = None

    def __post_init__(self):
        if self.label not in SETUPS:
            raise ValueError(f"unknown setup label {self.label!r}; expected one of {sorted(SETUPS)}")
        if self.label == ALL_RANDOM:
            self.planner = "n/a"
        elif self.planner not in ("enabled", "disabled"):
            raise ValueError("planner must be 'enabled' or 'disabled'")

    def seed_list(self) -> list:
        if self.seeds is not None:
            if len(self.seeds) < self.games:
                raise ValueError(f"need {self.games} seeds, got {len(self.seeds)}")
            seeds = list(self.seeds[: self.games])
        else:
            seeds = [self.base.seed + i for i in range(self.games)]
        if len(set(seeds)) != len(seeds):
            raise ValueError("experiment seeds must be distinct")
        return seeds

    def game_config(self, seed: int) -> GameConfig:
        crew_kind, imp_kind = SETUPS[self.label]
        planner = self.planner != "disabled"

        def spec(kind, current: AgentSpec) -> AgentSpec:
            return AgentSpec(kind=kind, persona=current.persona if kind == "llm" else None, planner=planner)

        return replace(self.base, seed=seed,
                       crewmate_agent=spec(crew_kind, self.base.crewmate_agent),
                       impostor_agent=spec(imp_kind, self.base.impostor_agent))


@dataclass
class OutcomeRow:
    label: str
    planner: str
    counts: dict
    failed: int = 0

    @property
    def games(self) -> int:
        return sum(self.counts.values())

    def percentages(self) -> dict:
        n = self.games
        return {c: (100.0 * k / n if n else 0.0) for c, k in self.counts.items()}


def tally_outcomes(records, label: str = "", planner: str = "") -> OutcomeRow:
    counts = {c: 0 for c in CONDITIONS}
    failed = 0
    for rec in records:
        outcome = rec.outcome if rec.complete else None
        if outcome is None:
            failed += 1
            continue
        counts[outcome.condition] += 1
    return OutcomeRow(label, planner, counts, failed)


def format_table(rows) -> str:
    """Aligned text table: four outcome cells as percent (count)."""
    head = ["Agent Setup", "Planner", *CONDITION_HEADINGS.values(), "Games"]
    body = []
    for row in rows:
        pct = row.percentages()
        body.append([DISPLAY_NAMES.get(row.label, row.label or "-"), row.planner or "-",
                     *(f"{pct[c]:.0f} ({row.counts[c]})" for c in CONDITIONS), str(row.games)])
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
    fmt = lambda r: "  ".join(cell.ljust(w) if i < 2 else cell.rjust(w)
                              for i, (cell, w) in enumerate(zip(r, widths)))
    rule = "-" * len(fmt(head))
    return "\n".join([fmt(head), rule, *map(fmt, body)]) + "\n"


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["setup", "planner", *(f"{c}_count" for c in CONDITIONS),
                *(f"{c}_pct" for c in CONDITIONS), "games", "failed"])
    for row in rows:
        pct = row.percentages()
        w.writerow([row.label, row.planner, *(row.counts[c] for c in CONDITIONS),
                    *(f"{pct[c]:.2f}" for c in CONDITIONS), row.games, row.failed])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    setup: ExperimentSetup
    results: list
    row: OutcomeRow

    @property
    def records(self) -> list:
        return [r.record for r in self.results]

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.ok]


def run_experiment(setup: ExperimentSetup, *,
                   client_factory: Callable = offline_client_factory,
                   workers: int = 1, out_dir=None, interviewer=None,
                   decision_timeout: Optional[float] = None, map_data=None) -> ExperimentResult:
    seeds = setup.seed_list()

    def one(i_seed):
        i, seed = i_seed
        return play_game(setup.game_config(seed), game_id=f"{setup.label}-{i:04d}",
                         client_factory=client_factory, interviewer=interviewer,
                         decision_timeout=decision_timeout, map_data=map_data,
                         meta={"setup": setup.label, "planner": setup.planner})

    jobs = list(enumerate(seeds))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results: list = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]

    for r in results:
        if not r.ok:
            log.warning("game %s failed and is excluded from the tally: %s",
                        r.record.header["game_id"], r.record.footer.get("error"))
    row = tally_outcomes([r.record for r in results], setup.label, setup.planner)
    result = ExperimentResult(setup, results, row)
    if out_dir is not None:
        persist(result, out_dir)
    return result


def persist(result: ExperimentResult, out_dir) -> Path:
    out = Path(out_dir)
    for r in result.results:
        gid = r.record.header["game_id"]
        write_record(r.record, out / "records" / f"{gid}.jsonl")
        if r.transcript:
            write_transcript(r.transcript, out / "transcripts" / f"{gid}.jsonl")
    interviews = [iv for r in result.results for iv in r.interviews]
    if interviews:
        from .interview import write_interviews
        write_interviews(interviews, out / "interviews.jsonl")
    (out / "outcomes.csv").write_text(table_csv([result.row]), encoding="utf-8")
    (out / "outcomes.txt").write_text(format_table([result.row]), encoding="utf-8")
    return out
