from __future__ import annotations

import random
from pathlib import Path

import pytest

from premisegen.corpus import AbductivePair, Enthymeme

FIXTURES = Path(__file__).parent / "fixtures"

# Word pools for building well-formed random sentences (aux verb keeps the
# well-formedness filter happy).
_SUBJECTS = ["the committee", "a reviewer", "the mayor", "our neighbor", "the student",
             "a journalist", "the council", "her colleague", "the director", "one voter"]
_VERBS = ["was backing", "had questioned", "is reviewing", "was drafting", "has rejected",
          "is funding", "had promised", "was debating", "has endorsed", "is blocking"]
_OBJECTS = ["the proposal", "a new policy", "the budget plan", "the school reform",
            "an old statute", "the local ordinance", "a public petition", "the tax change",
            "the zoning rule", "a safety measure"]


def make_sentence(rng: random.Random, terminal: str = ".") -> str:
    text = f"{rng.choice(_SUBJECTS)} {rng.choice(_VERBS)} {rng.choice(_OBJECTS)}"
    return text[0].upper() + text[1:] + terminal


@pytest.fixture
def rng() -> random.Random:
    return random.Random(13)


@pytest.fixture
def toy_pairs() -> list[AbductivePair]:
    rng = random.Random(7)
    pairs = []
    for i in range(16):
        pairs.append(
            AbductivePair(
                id=f"pair-{i:02d}",
                obs1=make_sentence(rng),
                obs2=make_sentence(rng),
                hypothesis=make_sentence(rng, terminal=""),
                split="train",
            )
        )
    return pairs


@pytest.fixture
def toy_enthymemes() -> list[Enthymeme]:
    rng = random.Random(21)
    records = []
    for i in range(6):
        records.append(
            Enthymeme(
                id=f"enth-{i:02d}",
                stated_premise=make_sentence(rng, terminal=""),
                stated_claim=make_sentence(rng, terminal=""),
                gold_premises=(make_sentence(rng), make_sentence(rng)),
                source="D1",
            )
        )
    return records


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            if "test_acceptance.py" not in str(getattr(report, "nodeid", "")):
                continue
            name = report.nodeid.split("::")[-1]
            lines.append((name, status.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status:<8} {name}")
