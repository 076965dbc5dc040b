"""Persona catalog: personality texts appended to an agent's base prompt."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

CREWMATE = "Crewmate"
IMPOSTOR = "Impostor"
BOTH = "Both"

RANDOM_PERSONA = "The Random"

# Single-letter keys used when grouping crewmate persona combinations.
CREW_LETTERS = {
    "The Loyal Companion": "A",
    "The Skeptic": "B",
    "The Tech Expert": "C",
    "The Observer": "D",
    "The Leader": "E",
    "The Random": "F",
}


@dataclass(frozen=True)
class PersonaProfile:
    name: str
    applicable_role: str
    description: str

    def applies_to(self, role: str) -> bool:
        return self.applicable_role in (role, BOTH)


@lru_cache(maxsize=None)
def catalog() -> tuple[PersonaProfile, ...]:
    raw = json.loads(resources.files("crewsim.data").joinpath("personas.json").read_text("utf-8"))
    return tuple(PersonaProfile(p["name"], p["role"], p["description"]) for p in raw)


def get(name: str) -> PersonaProfile:
    for p in catalog():
        if p.name == name:
            return p
    raise KeyError(f"unknown persona {name!r}")


def for_role(role: str) -> list[PersonaProfile]:
    return [p for p in catalog() if p.applies_to(role)]


def random_plans(role: str) -> list[str]:
    """Candidate fixed plans for The Random: the other personas of the same role."""
    return [p.description for p in catalog() if p.applicable_role == role]


def combination_key(names) -> str:
    """Order-insensitive key for a multiset of crewmate personas, e.g. 'BBE'."""
    return "".join(sorted(CREW_LETTERS.get(n, "?") for n in names))
