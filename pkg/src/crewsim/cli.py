"""crewsim command line: simulate, play, replay, evaluate.

Exit codes: 0 success, 1 usage or input error, 2 partial failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from .agents import StdTerminal
from .config import RunConfig, client_factory, load_config, with_overrides
from .engine import ACTION_KINDS, CONDITIONS
from .errors import ConfigInvalid, CrewsimError, SessionClosed
from .llm_client import write_transcript
from .records import read_record, write_record
from .world import AgentSpec

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2
EVALUATIONS = ("outcomes", "speech", "interview", "personas", "rank")

log = logging.getLogger("crewsim")


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return with_overrides(cfg, seed=getattr(args, "seed", None), games=getattr(args, "games", None),
                          backend=getattr(args, "backend", None), workers=getattr(args, "workers", None))


def _run_dir(base, label: str) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    out = Path(base) / f"{label}-{stamp}"
    n = 1
    while out.exists():
        n += 1
        out = Path(base) / f"{label}-{stamp}-{n}"
    return out


def _interviewer(cfg: RunConfig, factory):
    from .evaluation.interview import ConstantJudge, Interviewer, LLMJudge
    if not cfg.experiment.interview:
        return None
    judge = ConstantJudge() if cfg.experiment.judge == "mock" else LLMJudge(factory(cfg.game.seed))
    return Interviewer(judge)


def cmd_simulate(args) -> int:
    from .evaluation.experiment import ExperimentSetup, run_experiment
    cfg = _load(args)
    exp = cfg.experiment
    setup = ExperimentSetup(exp.setup, exp.planner, exp.games,
                            replace(cfg.game, seed=exp.base_seed if exp.base_seed is not None else cfg.game.seed),
                            exp.seeds)
    factory = client_factory(cfg.client)    # fails fast on a missing credential
    out = _run_dir(args.out or exp.out, setup.label)
    result = run_experiment(setup, client_factory=factory, workers=exp.workers, out_dir=out,
                            interviewer=_interviewer(cfg, factory), map_data=cfg.map_data(),
                            decision_timeout=cfg.client.decision_timeout)
    if cfg.source is not None:
        (out / "config.toml").write_text(cfg.source.read_text(encoding="utf-8"), encoding="utf-8")
    print((out / "outcomes.txt").read_text(encoding="utf-8"), end="")
    print(f"run directory: {out}")
    if result.failures:
        print(f"{len(result.failures)} of {len(result.results)} games failed; see records for details",
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_play(args, terminal=None) -> int:
    from .runner import play_game
    cfg = _load(args)
    game = cfg.game
    if not 1 <= args.as_player <= game.n_players:
        raise ConfigInvalid(f"--as-player must be between 1 and {game.n_players}")
    agents = dict(game.player_agents)
    agents[args.as_player] = AgentSpec(kind="human", persona=None, planner=False)
    game = replace(game, player_agents=agents)
    game.validate()
    factory = client_factory(cfg.client)
    out = Path(args.out or cfg.experiment.out)
    game_id = f"play-{game.seed}"
    result = play_game(game, game_id=game_id, client_factory=factory,
                       terminal=terminal or StdTerminal(), map_data=cfg.map_data())
    path = write_record(result.record, out / f"{game_id}.jsonl")
    if result.transcript:
        write_transcript(result.transcript, out / f"{game_id}.transcript.jsonl")
    cause = result.error.__cause__ if result.error is not None else None
    if isinstance(cause, SessionClosed):
        print(f"\nsession closed; partial record saved to {path}")
        return EXIT_PARTIAL
    if result.error is not None:
        print(f"game aborted: {result.error}; record saved to {path}", file=sys.stderr)
        return EXIT_PARTIAL
    outcome = result.record.outcome
    print(f"\n{outcome.winner} win ({outcome.condition}). Record saved to {path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    from . import render
    cfg = load_config(args.config) if args.config else RunConfig()
    map_data = cfg.map_data()
    record = read_record(args.record, require_footer=True)
    render.verify(record, map_data)
    render.play(record, sys.stdout, speed=args.speed, color=sys.stdout.isatty(), map_data=map_data)
    return EXIT_OK


def _records_in(path: Path) -> list:
    base = path / "records" if (path / "records").is_dir() else path
    files = sorted(base.glob("*.jsonl")) if base.is_dir() else []
    return [read_record(f, require_footer=False) for f in files]


def _annotator(args, cfg: RunConfig):
    from .evaluation.speech import KeywordAnnotator, LLMAnnotator
    if args.annotator == "mock":
        return KeywordAnnotator()
    backend_cfg = replace(cfg.client, backend="remote") if cfg.client.backend == "uniform" else cfg.client
    return LLMAnnotator(client_factory(backend_cfg)(0))


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def cmd_evaluate(args) -> int:
    from .evaluation import analytics, experiment, ranking, speech
    from .evaluation.interview import SCALE, InterviewRecord, category_averages
    src = Path(args.records)
    records = _records_in(src)
    if not records:
        print(f"no records found in {src}", file=sys.stderr)
        return EXIT_USAGE
    cfg = load_config(args.config) if args.config else RunConfig()
    out = Path(args.out) if args.out else (src if (src / "records").is_dir() else src.parent) / "reports"

    if args.what == "outcomes":
        groups = defaultdict(list)
        for rec in records:
            meta = rec.header.get("experiment", {})
            groups[(meta.get("setup", ""), meta.get("planner", ""))].append(rec)
        rows = [experiment.tally_outcomes(recs, *key) for key, recs in sorted(groups.items())]
        _write(out, "outcomes.csv", experiment.table_csv(rows))
        table = experiment.format_table(rows)
        _write(out, "outcomes.txt", table)
        print(table, end="")
        failed = sum(r.failed for r in rows)
        if failed:
            print(f"{failed} incomplete games excluded", file=sys.stderr)

    elif args.what == "speech":
        annotator = _annotator(args, cfg)
        annotations = []
        for rec in records:
            annotations += speech.annotate_speech(rec, annotator)[0]
        speech.write_annotations(annotations, out / "speech_annotations.jsonl")
        props = speech.category_proportions(annotations)
        lines = ["role,category,proportion"]
        lines += [f"{role},{cat},{props[role][cat]:.6f}" for role in sorted(props) for cat in speech.CATEGORIES]
        _write(out, "speech_proportions.csv", "\n".join(lines) + "\n")
        print(f"{len(annotations)} speeches annotated by {annotator.name}")
        for role in sorted(props):
            cells = "  ".join(f"{cat} {props[role][cat]:.2f}" for cat in speech.CATEGORIES)
            print(f"{role:<9} {cells}")

    elif args.what == "interview":
        path = src / "interviews.jsonl"
        if not path.is_file():
            print(f"no interviews.jsonl in {src}; run simulate with experiment.interview = true",
                  file=sys.stderr)
            return EXIT_USAGE
        rows = [InterviewRecord(**json.loads(line))
                for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        avgs = category_averages(rows)
        lines = ["category,role,mean_score"] + [f"{c},{r},{v:.4f}" for (c, r), v in avgs.items()]
        lines.append(f"# judge scale 1-5, unnormalized; rubric: {SCALE}")
        _write(out, "interview_scores.csv", "\n".join(lines) + "\n")
        for (c, r), v in avgs.items():
            print(f"{c:<14} {r:<9} {v:.2f}")
        flagged = sum(1 for r in rows if r.flagged)
        print(f"{len(rows)} answers, {flagged} flagged")

    elif args.what == "personas":
        pa = analytics.persona_analytics(records)
        _write(out, "persona_actions.csv", analytics.matrix_csv(pa.actions, ACTION_KINDS))
        outcomes = analytics.matrix_csv(pa.outcomes, CONDITIONS)
        _write(out, "persona_outcomes.csv", outcomes)
        _write(out, "persona_combinations.csv", analytics.matrix_csv(pa.combinations, CONDITIONS))
        print(outcomes, end="")

    elif args.what == "rank":
        ranked = ranking.rank_winning_trajectories(records, alpha=args.alpha, annotator=_annotator(args, cfg))
        lines = ["rank,game_id,player,role,posterior"]
        lines += [f"{i},{f.game_id},{f.player},{f.role},{f.posterior:.12f}" for i, f in enumerate(ranked, 1)]
        _write(out, "ranking.csv", "\n".join(lines) + "\n")
        _write(out, "summarization_bundle.md", ranking.summarization_bundle(ranked, args.top))
        for f in ranked[: args.top]:
            print(f"{f.posterior:.4f}  {f.game_id}  player {f.player} ({f.role})")
    print(f"reports written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crewsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--backend", choices=("uniform", "scripted", "remote"))
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("simulate", help="run a batch of games")
    common(p)
    p.add_argument("--games", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("play", help="play interactively as one player")
    common(p)
    p.add_argument("--as-player", type=int, required=True, dest="as_player")

    p = sub.add_parser("replay", help="verify and play back a game record")
    p.add_argument("record")
    p.add_argument("--config", help="run configuration (for a custom map)")
    p.add_argument("--speed", type=float, default=0.0, help="events per second (0 = no delay)")

    p = sub.add_parser("evaluate", help="analyse recorded games")
    p.add_argument("what", choices=EVALUATIONS)
    p.add_argument("records", help="records directory or run directory")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--annotator", choices=("mock", "remote"), default="mock")
    p.add_argument("--alpha", type=float, default=1.0, help="posterior smoothing strength")
    p.add_argument("--top", type=int, default=5)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"simulate": cmd_simulate, "play": cmd_play, "replay": cmd_replay, "evaluate": cmd_evaluate}
    try:
        return handlers[args.command](args)
    except (CrewsimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
