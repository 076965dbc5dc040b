"""Persona x action and persona x outcome count matrices."""

from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .. import personas
from ..engine import ACTION_KINDS, CONDITIONS
from ..world import CREWMATE, IMPOSTOR


@dataclass
class PersonaAnalytics:
    actions: dict = field(default_factory=dict)       # (role, persona) -> Counter(kind)
    outcomes: dict = field(default_factory=dict)      # (role, persona) -> Counter(condition)
    combinations: dict = field(default_factory=dict)  # crew combination key -> Counter(condition)


def persona_analytics(records) -> PersonaAnalytics:
    rows = [(role, p.name) for role in (CREWMATE, IMPOSTOR) for p in personas.for_role(role)]
    actions = {r: Counter({k: 0 for k in ACTION_KINDS}) for r in rows}
    outcomes = {r: Counter({c: 0 for c in CONDITIONS}) for r in rows}
    combos = defaultdict(lambda: Counter({c: 0 for c in CONDITIONS}))
    for rec in records:
        players = rec.players
        outcome = rec.outcome
        for e in rec.events:
            if e.actor is None or e.kind not in ACTION_KINDS:
                continue
            p = players[e.actor]
            if p.get("persona"):
                actions.setdefault((p["role"], p["persona"]), Counter())[e.kind] += 1
        if outcome is None:
            continue
        crew = []
        for p in players.values():
            if p.get("persona"):
                outcomes.setdefault((p["role"], p["persona"]), Counter())[outcome.condition] += 1
                if p["role"] == CREWMATE:
                    crew.append(p["persona"])
        if crew:
            combos[personas.combination_key(crew)][outcome.condition] += 1
    return PersonaAnalytics(actions, outcomes, dict(combos))


def matrix_csv(matrix: dict, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keyed = any(isinstance(k, tuple) for k in matrix)
    w.writerow((["role", "persona"] if keyed else ["combination"]) + list(columns))
    for key in sorted(matrix):
        prefix = list(key) if isinstance(key, tuple) else [key]
        w.writerow(prefix + [matrix[key].get(c, 0) for c in columns])
    return buf.getvalue()
