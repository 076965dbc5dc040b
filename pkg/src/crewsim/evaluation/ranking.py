"""Rank winning trajectories by the posterior probability of winning.

Each trajectory is one player's game: a normalized histogram of their action
kinds and one of their speech categories, each quantized to deciles. The
quantized pair is treated as a single categorical feature x and

    p(win | x) = p(x | win) p(win) / p(x)

is estimated from smoothed counts. Pseudo-counts are alpha * p_hat for a win
and alpha * (1 - p_hat) for a loss in every observed cell, where p_hat is the
corpus win rate, so the posterior stays in [0, 1] and tends to p_hat as alpha
grows.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..engine import ACTION_KINDS, SPEAK
from ..errors import DegenerateCorpus
from ..world import CREWMATE, IMPOSTOR
from .speech import CATEGORIES, KeywordAnnotator

BINS = 10


def quantize(hist) -> tuple:
    return tuple(min(int(v * BINS), BINS - 1) for v in hist)


def _normalize(counts, keys) -> tuple:
    total = sum(counts.get(k, 0) for k in keys)
    return tuple((counts.get(k, 0) / total) if total else 0.0 for k in keys)


@dataclass
class TrajectoryFeature:
    game_id: str
    player: int
    role: str
    won: bool
    actions: tuple          # normalized histogram over ACTION_KINDS
    dialogue: tuple         # normalized histogram over speech CATEGORIES
    posterior: float = 0.0
    speeches: list = field(default_factory=list, repr=False)
    lines: list = field(default_factory=list, repr=False)

    @property
    def key(self) -> tuple:
        return quantize(self.actions) + quantize(self.dialogue)


def extract_features(records, annotator=None) -> list:
    annotator = annotator or KeywordAnnotator()
    feats = []
    for rec in records:
        outcome = rec.outcome
        if outcome is None:
            continue
        winner_role = CREWMATE if outcome.winner == "Crewmates" else IMPOSTOR
        gid = rec.header.get("game_id", "")
        for pid, p in sorted(rec.players.items()):
            kinds, labels, speeches, lines = Counter(), Counter(), [], []
            for idx, e in enumerate(rec.events):
                if e.actor != pid or e.kind not in ACTION_KINDS:
                    continue
                kinds[e.kind] += 1
                lines.append(f"t{e.timestep} [{e.phase}] {e.text}")
                if e.kind == SPEAK:
                    text = e.payload.get("text", "")
                    speeches.append(text)
                    labels.update(set(annotator.annotate(text, f"{gid}:speech:{idx}")))
            feats.append(TrajectoryFeature(gid, pid, p["role"], p["role"] == winner_role,
                                           _normalize(kinds, ACTION_KINDS),
                                           _normalize(labels, CATEGORIES), 0.0, speeches, lines))
    return feats


def posterior_table(keys, wins, alpha: float = 1.0) -> dict:
    """key -> (p(x|win), p(win), p(x), p(win|x)) from smoothed counts."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    n = len(keys)
    w = sum(1 for won in wins if won)
    if w == 0:
        raise DegenerateCorpus("corpus contains no winning trajectories")
    p_hat = w / n
    count = Counter(keys)
    count_win = Counter(k for k, won in zip(keys, wins) if won)
    cells = len(count)
    p_win = (w + alpha * cells * p_hat) / (n + alpha * cells)
    table = {}
    for x, c in count.items():
        p_x_win = (count_win[x] + alpha * p_hat) / (w + alpha * cells * p_hat)
        p_x = (c + alpha) / (n + alpha * cells)
        post = p_x_win * p_win / p_x
        table[x] = (p_x_win, p_win, p_x, min(max(post, 0.0), 1.0))
    return table


def rank_winning_trajectories(records, alpha: float = 1.0, annotator=None, features=None) -> list:
    feats = features if features is not None else extract_features(records, annotator)
    if not feats:
        raise DegenerateCorpus("no finished games to rank")
    table = posterior_table([f.key for f in feats], [f.won for f in feats], alpha)
    for f in feats:
        f.posterior = table[f.key][3]
    winners = [f for f in feats if f.won]
    winners.sort(key=lambda f: (-f.posterior, f.game_id, f.player))
    return winners


def summarization_bundle(ranked, top: int = 5) -> str:
    """Prompt plus top trajectories, ready for an external summarization call."""
    parts = [
        "Summarize the behaviour of each player below, who won their game, and describe the "
        "personality it suggests in two or three sentences addressed to the player as 'you'.",
    ]
    for i, f in enumerate(ranked[:top], 1):
        parts.append(f"\n## Trajectory {i}: game {f.game_id}, player {f.player} ({f.role}), "
                     f"p(win | a, d) = {f.posterior:.4f}")
        parts += [f"- {line}" for line in f.lines]
    return "\n".join(parts) + "\n"
