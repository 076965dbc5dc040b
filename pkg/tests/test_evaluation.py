import logging
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from crewsim.agents import AgentMind
from crewsim.engine import (ALL_TASKS_COMPLETED, CONDITIONS, CREWMATES_ELIMINATED,
                            IMPOSTORS_ELIMINATED, SPEAK, TIME_LIMIT_REACHED)
from crewsim.errors import ClientFailure, DegenerateCorpus
from crewsim.evaluation import (ALL_LLMS, ALL_RANDOM, ConstantJudge, ExperimentSetup,
                                FixedAnnotator, Interviewer, KeywordAnnotator, LLMAnnotator,
                                TrajectoryFeature, annotate_speech, category_averages,
                                category_proportions, format_table, interview, load_question_bank,
                                persona_analytics, posterior_table, rank_winning_trajectories,
                                run_experiment, table_csv, tally_outcomes)
from crewsim.evaluation.interview import IN_GAME, POST_GAME
from crewsim.evaluation.speech import DECEPTION, OTHER, SUSPICION, TRUTH_TELLING
from crewsim.llm_client import LLMClient, ScriptedBackend
from crewsim.records import GameRecord, dumps_record
from crewsim.runner import play_game
from crewsim.world import CREWMATE, IMPOSTOR, AgentSpec, GameConfig

WINNER = {CREWMATES_ELIMINATED: "Impostors", TIME_LIMIT_REACHED: "Impostors",
          IMPOSTORS_ELIMINATED: "Crewmates", ALL_TASKS_COMPLETED: "Crewmates"}


def fake_record(condition=None, players=(), events=(), game_id="g"):
    footer = {"complete": condition is not None,
              "outcome": {"winner": WINNER[condition], "condition": condition} if condition else None}
    return GameRecord({"game_id": game_id, "players": list(players)}, list(events), footer)


class AnyTag:
    def __init__(self, reply):
        self.reply_text = reply

    def reply(self, request):
        return self.reply_text


class Broken:
    def reply(self, request):
        raise ClientFailure("boom")


# -- outcome tallies ---------------------------------------------------------------

def test_tally_all_one_condition():
    row = tally_outcomes([fake_record(CREWMATES_ELIMINATED) for _ in range(20)], ALL_RANDOM, "n/a")
    pct = row.percentages()
    assert pct[CREWMATES_ELIMINATED] == 100.0
    assert pct[TIME_LIMIT_REACHED] == pct[IMPOSTORS_ELIMINATED] == pct[ALL_TASKS_COMPLETED] == 0.0


def test_tally_mixed_hand_count():
    conds = [CREWMATES_ELIMINATED] * 4 + [TIME_LIMIT_REACHED] * 3 + [IMPOSTORS_ELIMINATED] * 2 \
        + [ALL_TASKS_COMPLETED]
    recs = [fake_record(c) for c in conds] + [fake_record(None)]
    row = tally_outcomes(recs)
    assert row.counts == {CREWMATES_ELIMINATED: 4, TIME_LIMIT_REACHED: 3,
                          IMPOSTORS_ELIMINATED: 2, ALL_TASKS_COMPLETED: 1}
    assert row.failed == 1 and row.games == 10
    assert row.percentages()[CREWMATES_ELIMINATED] == 40.0
    assert sum(row.percentages().values()) == pytest.approx(100.0)


def test_tally_empty():
    row = tally_outcomes([])
    assert row.games == 0 and set(row.percentages().values()) == {0.0}


def test_format_table_and_csv():
    row = tally_outcomes([fake_record(CREWMATES_ELIMINATED)] * 3 + [fake_record(TIME_LIMIT_REACHED)],
                         ALL_RANDOM, "n/a")
    lines = format_table([row]).splitlines()
    assert lines[0].startswith("Agent Setup") and "Crewmates eliminated" in lines[0]
    assert lines[2].startswith("All Random") and "75 (3)" in lines[2] and "25 (1)" in lines[2]
    csv_lines = table_csv([row]).splitlines()
    assert csv_lines[1].split(",")[:6] == ["AllRandom", "n/a", "3", "1", "0", "0"]


# -- experiments -------------------------------------------------------------------

def test_zero_games():
    result = run_experiment(ExperimentSetup(ALL_RANDOM, games=0))
    assert result.results == [] and result.row.games == 0


def test_experiment_deterministic(tmp_path):
    setup = ExperimentSetup(ALL_LLMS, games=4, base=GameConfig(seed=10))
    a = run_experiment(setup, out_dir=tmp_path / "a")
    b = run_experiment(setup, out_dir=tmp_path / "b", workers=3)
    assert (tmp_path / "a" / "outcomes.csv").read_text() == (tmp_path / "b" / "outcomes.csv").read_text()
    assert [dumps_record(r) for r in a.records] == [dumps_record(r) for r in b.records]
    assert sorted(p.name for p in (tmp_path / "a" / "records").iterdir()) == \
        [f"AllLLMs-{i:04d}.jsonl" for i in range(4)]
    assert a.records[0].header["experiment"] == {"setup": ALL_LLMS, "planner": "enabled"}


def test_seed_list_validation():
    with pytest.raises(ValueError):
        ExperimentSetup(ALL_RANDOM, games=2, seeds=[1, 1]).seed_list()
    with pytest.raises(ValueError):
        ExperimentSetup("Nope")
    assert ExperimentSetup(ALL_RANDOM, planner="disabled").planner == "n/a"


def test_failed_games_excluded_with_warning(caplog):
    setup = ExperimentSetup(ALL_LLMS, games=3)
    with caplog.at_level(logging.WARNING):
        result = run_experiment(setup, client_factory=lambda seed: LLMClient(Broken()))
    assert len(result.failures) == 3 and result.row.games == 0 and result.row.failed == 3
    assert caplog.text.count("excluded from the tally") == 3


# -- speech --------------------------------------------------------------------------

SPEECH_RECORDS = [play_game(GameConfig(seed=s, crewmate_agent=AgentSpec("llm"),
                                       impostor_agent=AgentSpec("llm")), game_id=f"s{s}").record
                  for s in range(6)]


def test_speech_conservation():
    for rec in SPEECH_RECORDS:
        anns, _ = annotate_speech(rec, KeywordAnnotator())
        speaks = [i for i, e in enumerate(rec.events) if e.kind == SPEAK]
        assert [a.event_index for a in anns] == speaks
        assert all(a.labels for a in anns)


def test_fixed_annotator_counting_oracle():
    rec = SPEECH_RECORDS[0]
    speeches = [e for e in rec.events if e.kind == SPEAK]
    assert speeches
    first = speeches[0].payload["text"]
    ann = FixedAnnotator([TRUTH_TELLING, SUSPICION], overrides={first: [DECEPTION]})
    anns, props = annotate_speech(rec, ann)
    roles = {p["id"]: p["role"] for p in rec.header["players"]}
    for role, shares in props.items():
        mine = [e for e in speeches if roles[e.actor] == role]
        hit = sum(1 for e in mine if e.payload["text"] == first)
        assert shares[DECEPTION] == pytest.approx(hit / len(mine))
        assert shares[TRUTH_TELLING] == pytest.approx((len(mine) - hit) / len(mine))
        if hit < len(mine):
            assert sum(shares.values()) > 1


def test_parse_failure_becomes_flagged_other():
    rec = SPEECH_RECORDS[1]
    anns, _ = annotate_speech(rec, LLMAnnotator(LLMClient(AnyTag("no idea"))))
    assert anns and all(a.labels == [OTHER] and a.flagged for a in anns)


def test_llm_annotator_parses_multi_label():
    client = LLMClient(AnyTag("Categories: Deception, Suspicion & Defense"))
    labels = LLMAnnotator(client).annotate("Player 3 vented, I saw it myself.", "t")
    assert labels == [DECEPTION, SUSPICION]
    assert "Feigning Innocence" in client.transcript[0]["messages"][0]["content"]


def test_impostor_framing_is_deception():
    assert DECEPTION in KeywordAnnotator().annotate(
        "It was not me, trust me. I was in Admin the whole time and Player 3 looked suspicious.", "t")


def test_proportions_of_nothing():
    assert category_proportions([]) == {}


# -- interviews --------------------------------------------------------------------

BANK = load_question_bank()


def test_question_bank_shape():
    cats = Counter(q.category for q in BANK)
    assert set(cats) == {"SelfAwareness", "Memory", "Planning", "Reasoning", "Reflection"}
    assert any(q.only == IMPOSTOR for q in BANK)


def test_role_and_stage_filtering():
    client = LLMClient(AnyTag("I am fine."))
    imp = AgentMind.create(IMPOSTOR, None)
    crew = AgentMind.create(CREWMATE, None)
    imp_in = interview(imp, IN_GAME, BANK, ConstantJudge(), client)
    crew_post = interview(crew, POST_GAME, BANK, ConstantJudge(), client)
    impostor_only = {q.text for q in BANK if q.only == IMPOSTOR}
    assert impostor_only <= {r.question for r in imp_in}
    assert not impostor_only & {r.question for r in crew_post}
    assert not any(r.category == "Reflection" for r in imp_in)
    assert any(r.category == "Reflection" for r in crew_post)


def test_constant_judge_averages():
    cfg = GameConfig(seed=2, crewmate_agent=AgentSpec("llm"), impostor_agent=AgentSpec("llm"))
    result = play_game(cfg, interviewer=Interviewer(ConstantJudge(3)))
    assert result.interviews
    avgs = category_averages(result.interviews)
    assert avgs and all(v == 3.0 for v in avgs.values())
    assert {r.stage for r in result.interviews} >= {POST_GAME}


def test_judge_failure_is_flagged():
    class BadJudge:
        def score(self, *a):
            return 9

    recs = interview(AgentMind.create(CREWMATE, None), IN_GAME, BANK, BadJudge(), LLMClient(AnyTag("x")))
    assert recs and all(r.flagged and r.score is None for r in recs)
    assert category_averages(recs) == {}
    dead = interview(AgentMind.create(CREWMATE, None), IN_GAME, BANK, ConstantJudge(), LLMClient(Broken()))
    assert all(r.flagged for r in dead)


# -- persona analytics ---------------------------------------------------------------

def _ev(actor, kind):
    from crewsim.engine import Event
    return Event(0, "task", actor, kind, "", {}, "Cafeteria", ("Cafeteria",), ())


def test_persona_analytics_hand_count():
    players = [{"id": 1, "role": IMPOSTOR, "persona": "The Manipulator"},
               {"id": 2, "role": CREWMATE, "persona": "The Leader"},
               {"id": 3, "role": CREWMATE, "persona": "The Skeptic"},
               {"id": 4, "role": CREWMATE, "persona": None}]
    events = [_ev(1, "KILL"), _ev(1, "MOVE"), _ev(2, "MOVE"), _ev(2, "MOVE"), _ev(3, SPEAK),
              _ev(4, "MOVE"), _ev(None, "MEETING_START")]
    recs = [fake_record(CREWMATES_ELIMINATED, players, events),
            fake_record(IMPOSTORS_ELIMINATED, players, events[:1])]
    pa = persona_analytics(recs)
    assert pa.actions[(IMPOSTOR, "The Manipulator")]["KILL"] == 2
    assert pa.actions[(IMPOSTOR, "The Manipulator")]["MOVE"] == 1
    assert pa.actions[(CREWMATE, "The Leader")]["MOVE"] == 2
    assert pa.outcomes[(CREWMATE, "The Skeptic")][CREWMATES_ELIMINATED] == 1
    assert pa.outcomes[(CREWMATE, "The Skeptic")][IMPOSTORS_ELIMINATED] == 1
    assert sum(sum(c.values()) for c in pa.combinations.values()) == 2


def test_persona_analytics_empty():
    pa = persona_analytics([])
    assert pa.combinations == {}
    assert all(sum(c.values()) == 0 for c in pa.actions.values())
    assert all(set(c) == set(CONDITIONS) for c in pa.outcomes.values())


# -- ranking ------------------------------------------------------------------------

def _feature(key_bit, won, i=0):
    hist = (1.0, 0.0) if key_bit else (0.0, 1.0)
    return TrajectoryFeature(f"g{i}", 1, CREWMATE, won, hist, (0.0,))


def exact_posterior(keys, wins, alpha):
    """p(win|x) from the product of smoothed factors, in exact arithmetic."""
    alpha = Fraction(alpha)
    n, w = len(keys), sum(wins)
    p_hat = Fraction(w, n)
    cells = len(set(keys))
    out = {}
    for x in set(keys):
        c = sum(1 for k in keys if k == x)
        cw = sum(1 for k, won in zip(keys, wins) if k == x and won)
        likelihood = (cw + alpha * p_hat) / (w + alpha * cells * p_hat)
        prior = (w + alpha * cells * p_hat) / (n + alpha * cells)
        evidence = (c + alpha) / (n + alpha * cells)
        out[x] = likelihood * prior / evidence
    return out


def test_posterior_fraction_oracle():
    keys = ["a"] * 4 + ["b"] * 4
    wins = [True, True, True, False, True, False, False, False]
    for alpha in (0, 0.5, 1, 3):
        table = posterior_table(keys, wins, alpha)
        oracle = exact_posterior(keys, wins, alpha)
        for x in ("a", "b"):
            assert abs(table[x][3] - float(oracle[x])) < 1e-12
    table = posterior_table(keys, wins, 1)
    assert table["a"][3] > table["b"][3]


def test_win_only_bin_is_maximal():
    feats = [_feature(1, True, i) for i in range(3)] + \
        [_feature(0, i % 2 == 0, 10 + i) for i in range(6)]
    ranked = rank_winning_trajectories([], features=feats)
    assert ranked[0].key == feats[0].key
    assert ranked[0].posterior == max(f.posterior for f in feats)


def test_large_alpha_tends_to_base_rate():
    keys = ["a", "a", "b", "c", "c", "c"]
    wins = [True, False, True, False, False, True]
    table = posterior_table(keys, wins, 1e12)
    for row in table.values():
        assert abs(row[3] - 0.5) < 1e-6


def test_degenerate_corpus():
    with pytest.raises(DegenerateCorpus):
        posterior_table(["a", "b"], [False, False])
    with pytest.raises(DegenerateCorpus):
        rank_winning_trajectories([], features=[])
    with pytest.raises(ValueError):
        posterior_table(["a"], [True], -1)


@settings(max_examples=200, deadline=None)
@given(data=st.lists(st.tuples(st.integers(0, 4), st.booleans()), min_size=1, max_size=40)
       .filter(lambda d: any(w for _, w in d)),
       alpha=st.floats(0, 100))
def test_posterior_bounds(data, alpha):
    keys, wins = zip(*data)
    table = posterior_table(list(keys), list(wins), alpha)
    oracle = exact_posterior(list(keys), list(wins), alpha)
    for x, row in table.items():
        assert 0.0 <= row[3] <= 1.0
        assert row[3] == pytest.approx(float(oracle[x]), abs=1e-9)


def test_rank_real_records():
    ranked = rank_winning_trajectories(SPEECH_RECORDS)
    assert ranked and all(f.won for f in ranked)
    assert [f.posterior for f in ranked] == sorted((f.posterior for f in ranked), reverse=True)
