"""
Shared fixtures and helpers for the MAIL toolkit tests.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Optional, Sequence

import pytest

from src.cfg import ACFG, BasicBlock
from src.detector import SampleGraphs
from src.mail import PatternTag

FIXTURES_DIR = Path(__file__).parent / "fixtures"

_BLOCK_COMMENT_RE = re.compile(r"^\s*([0-9a-fA-F]+)\s.*;\s*block\s+(\d+)\s*$")

# Consistent renaming used by the metamorphic-variant tests
RENAMING = {
    "EBX": "ESI", "ESI": "EBX", "RBX": "RSI", "RSI": "RBX",
    "ECX": "EDI", "EDI": "ECX", "RCX": "RDI", "RDI": "RCX",
}


def read_fixture(name: str) -> str:
    return (FIXTURES_DIR / name).read_text()


def expected_blocks(text: str) -> dict[int, int]:
    """Address -> block label, from the '; block N' comments of a fixture."""
    labels = {}
    for line in text.splitlines():
        m = _BLOCK_COMMENT_RE.match(line)
        if m:
            labels[int(m.group(1), 16)] = int(m.group(2))
    return labels


def function_sources(text: str) -> dict[str, str]:
    """Split a listing at its FUNC lines: function name -> listing of that function alone."""
    sources: dict[str, list[str]] = {}
    current: Optional[str] = None
    for line in text.splitlines():
        if line.startswith("FUNC "):
            current = line.split()[1]
            sources[current] = []
        if current is not None:
            sources[current].append(line)
    return {name: "\n".join(lines) + "\n" for name, lines in sources.items()}


def rename_registers(text: str, mapping: dict[str, str] = RENAMING) -> str:
    """Apply a register renaming simultaneously to every instruction line."""
    pattern = re.compile(r"\b(" + "|".join(sorted(mapping, key=len, reverse=True)) + r")\b")
    return pattern.sub(lambda m: mapping[m.group(1)], text)


def insert_dead_code(text: str) -> str:
    """Replace each alignment NOP with an add of zero, which lifts to 'ECX = ECX'."""
    return re.sub(r"\bNOP\b", "ADD ECX, 0x0", text)


def make_acfg(
    name: str,
    seqs: Sequence[Sequence[PatternTag]],
    edges: Sequence[tuple[int, int]] = (),
) -> ACFG:
    """A statement-less ACFG with the given per-block pattern sequences."""
    blocks = tuple(BasicBlock(id=i, pattern_seq=tuple(seq)) for i, seq in enumerate(seqs))
    return ACFG(name=name, blocks=blocks, edges=tuple(sorted(set(edges))))


def chain(name: str, seqs: Sequence[Sequence[PatternTag]]) -> ACFG:
    """Blocks 0 -> 1 -> ... -> n-1."""
    return make_acfg(name, seqs, [(i, i + 1) for i in range(len(seqs) - 1)])


def sample_of(name: str, *functions: ACFG, program: Optional[ACFG] = None) -> SampleGraphs:
    """SampleGraphs from ready-made function graphs."""
    return SampleGraphs(name=name, functions=tuple(functions), program=program or ACFG("program"))


@pytest.fixture
def merge_sort_text() -> str:
    return read_fixture("merge_sort.asm")


@pytest.fixture
def merge_sort_arm_text() -> str:
    return read_fixture("merge_sort_arm.asm")


@pytest.fixture
def mutation_text() -> str:
    return read_fixture("mutation_functions.asm")


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch):
    """Keep store/threshold/worker settings of the developer's shell out of the tests."""
    for var in ("MAIL_TEMPLATE_STORE", "MAIL_WORKERS", "MAIL_THRESHOLD", "MAIL_MATCH_BUDGET", "MAIL_TABLES_DIR"):
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def restore_logging():
    """Undo configure_logging calls made by the test."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    src_level = logging.getLogger("src").level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
    logging.getLogger("src").setLevel(src_level)
