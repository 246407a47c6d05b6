"""
MAIL statement patterns.

Every statement carries exactly one pattern tag. The tags are what the
matcher compares block by block, so two blocks with the same tag sequence
are interchangeable for detection purposes.
"""

from __future__ import annotations

from enum import Enum


class PatternTag(str, Enum):
    """The 21 statement patterns."""
    ASSIGN = "ASSIGN"
    ASSIGN_CONSTANT = "ASSIGN_CONSTANT"
    CONTROL = "CONTROL"
    CONTROL_CONSTANT = "CONTROL_CONSTANT"
    CALL = "CALL"
    CALL_CONSTANT = "CALL_CONSTANT"
    FLAG = "FLAG"
    FLAG_STACK = "FLAG_STACK"
    HALT = "HALT"
    JUMP = "JUMP"
    JUMP_CONSTANT = "JUMP_CONSTANT"
    JUMP_STACK = "JUMP_STACK"
    LIBCALL = "LIBCALL"
    LIBCALL_CONSTANT = "LIBCALL_CONSTANT"
    LOCK = "LOCK"
    STACK = "STACK"
    STACK_CONSTANT = "STACK_CONSTANT"
    TEST = "TEST"
    TEST_CONSTANT = "TEST_CONSTANT"
    UNKNOWN = "UNKNOWN"
    NOTDEFINED = "NOTDEFINED"

    def __str__(self) -> str:
        return self.value


def parse_tag(text: str) -> PatternTag:
    """Look up a tag by name. Raises ValueError for unknown names."""
    try:
        return PatternTag[text.strip().upper()]
    except KeyError:
        raise ValueError(f"Unknown pattern tag: {text!r}") from None
