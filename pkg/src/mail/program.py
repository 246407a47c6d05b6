"""
MAIL programs: an ordered list of (address, statement) pairs plus the
function spans delimited by start_function_N / end_function_N markers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .nodes import FunctionMarker, MailStatement


@dataclass(frozen=True)
class FunctionInfo:
    """A function span. ``boundaries`` holds the source instruction addresses."""
    index: int
    name: str
    start: int
    end: int
    boundaries: frozenset[int] = field(default=frozenset(), compare=False, repr=False)


@dataclass(frozen=True)
class MailProgram:
    statements: tuple[tuple[int, MailStatement], ...] = ()
    functions: tuple[FunctionInfo, ...] = ()

    def __len__(self) -> int:
        return len(self.statements)

    def __iter__(self) -> Iterator[tuple[int, MailStatement]]:
        return iter(self.statements)

    def function(self, index: int) -> FunctionInfo:
        for info in self.functions:
            if info.index == index:
                return info
        raise KeyError(f"No function with index {index}")

    def body(self, index: int) -> list[tuple[int, MailStatement]]:
        """Statements strictly between the markers of function ``index``."""
        inside = False
        out: list[tuple[int, MailStatement]] = []
        for addr, stmt in self.statements:
            if isinstance(stmt, FunctionMarker) and stmt.index == index:
                if stmt.start:
                    inside = True
                    continue
                break
            if inside:
                out.append((addr, stmt))
        return out

    def without_markers(self) -> list[tuple[int, MailStatement]]:
        return [(a, s) for a, s in self.statements if not isinstance(s, FunctionMarker)]
