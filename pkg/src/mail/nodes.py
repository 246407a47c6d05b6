"""
MAIL abstract syntax.

Operands, expressions and statements are frozen dataclasses. Statements carry
a ``pattern`` field that defaults to NOTDEFINED and is excluded from equality,
so two programs compare equal when their structure is equal regardless of
whether they have been classified yet.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import ClassVar, Optional, Union

from .patterns import PatternTag

# DF is included because CLD/STD lift to direction-flag writes.
FLAG_REGISTERS = frozenset({"ZF", "CF", "PF", "SF", "OF", "DF"})
FLAGS_WORD = "EFLAGS"

ARITH_OPERATORS = ("+", "-", "*", "/", "%")
LOGIC_OPERATORS = ("and", "or", "xor", "<<", ">>")
MATH_OPERATORS = ARITH_OPERATORS + LOGIC_OPERATORS
UNARY_OPERATORS = ("-", "not")
REL_OPERATORS = ("==", "!=", "<=", ">=", "<", ">")
CONNECTIVES = ("and", "or")

_SYNTHETIC_RE = re.compile(r"^(gr|fr)_(\d+)$")


# =============================================================================
# Operands
# =============================================================================

@dataclass(frozen=True)
class Register:
    """A machine, flag, special or synthetic register."""
    name: str

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("Register name must not be empty")

    @property
    def is_flag(self) -> bool:
        """True for single flags and for the whole flags word."""
        upper = self.name.upper()
        return upper in FLAG_REGISTERS or upper == FLAGS_WORD

    @property
    def synthetic_index(self) -> Optional[int]:
        """Index n of a gr_n/fr_n register, None for real registers."""
        m = _SYNTHETIC_RE.match(self.name)
        return int(m.group(2)) if m else None


@dataclass(frozen=True)
class Constant:
    """
    An integer literal.

    ``hex`` and ``width`` (minimum number of hex digits, as in "0x01") only
    record how the literal is written.
    """
    value: int
    hex: bool = True
    width: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MemRef:
    """A memory address: ``[RBP-0x44]``, ``[RDX+RAX]`` or ``[0x4010]``."""
    terms: tuple[Union[Register, Constant], ...]
    ops: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("Memory reference needs at least one term")
        if len(self.ops) != len(self.terms) - 1:
            raise ValueError("Memory reference needs one operator between each pair of terms")
        for op in self.ops:
            if op not in ARITH_OPERATORS:
                raise ValueError(f"Invalid address operator: {op!r}")

    @property
    def registers(self) -> tuple[Register, ...]:
        return tuple(t for t in self.terms if isinstance(t, Register))


@dataclass(frozen=True)
class StackRef:
    """The stack expression ``[SP=SP+k]`` / ``[SP=SP-k]``."""
    op: str
    offset: int

    def __post_init__(self) -> None:
        if self.op not in ("+", "-"):
            raise ValueError(f"Stack operator must be '+' or '-', got {self.op!r}")
        if self.offset <= 0:
            raise ValueError("Stack offset must be a positive integer")


@dataclass(frozen=True)
class Unknown:
    """An address that static analysis cannot compute."""


UNKNOWN = Unknown()

Operand = Union[Register, Constant, MemRef, StackRef, Unknown]
Location = Union[Register, MemRef, StackRef, Unknown]


# =============================================================================
# Expressions
# =============================================================================

@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: Operand

    def __post_init__(self) -> None:
        if self.op not in UNARY_OPERATORS:
            raise ValueError(f"Invalid unary operator: {self.op!r}")


@dataclass(frozen=True)
class BinaryOp:
    left: Operand
    op: str
    right: Operand

    def __post_init__(self) -> None:
        if self.op not in MATH_OPERATORS:
            raise ValueError(f"Invalid binary operator: {self.op!r}")


@dataclass(frozen=True)
class LibCall:
    """A library function call, usable as a statement or as an assigned value."""
    name: str
    args: tuple[Operand, ...] = ()
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "lib_call"


Value = Union[Register, Constant, MemRef, StackRef, Unknown, UnaryOp, BinaryOp, LibCall]


@dataclass(frozen=True)
class Comparison:
    left: Operand
    op: str
    right: Operand

    def __post_init__(self) -> None:
        if self.op not in REL_OPERATORS:
            raise ValueError(f"Invalid relational operator: {self.op!r}")


@dataclass(frozen=True)
class Condition:
    """Comparisons joined left to right by ``and`` / ``or``."""
    terms: tuple[Comparison, ...]
    connectives: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("Condition needs at least one comparison")
        if len(self.connectives) != len(self.terms) - 1:
            raise ValueError("Condition needs one connective between each pair of comparisons")
        for c in self.connectives:
            if c not in CONNECTIVES:
                raise ValueError(f"Invalid connective: {c!r}")


# =============================================================================
# Statements
# =============================================================================

@dataclass(frozen=True)
class Assignment:
    dest: Location
    value: Value
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "assignment"


@dataclass(frozen=True)
class Jump:
    target: Union[Location, Constant]
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "jump"


@dataclass(frozen=True)
class Control:
    """``if (cond) then; else otherwise;`` where each branch is a jump or an assignment."""
    condition: Condition
    then: Union[Jump, Assignment]
    otherwise: Optional[Union[Jump, Assignment]] = None
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "control"

    @property
    def jump(self) -> Optional[Jump]:
        """The jump branch, if the control transfers flow."""
        for branch in (self.then, self.otherwise):
            if isinstance(branch, Jump):
                return branch
        return None


@dataclass(frozen=True)
class ConditionStmt:
    condition: Condition
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "condition"


@dataclass(frozen=True)
class Call:
    target: Union[Location, Constant]
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "call"


@dataclass(frozen=True)
class Test:
    """A bare logical expression such as ``EAX and 0x10;``."""
    left: Operand
    op: str
    right: Operand
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "test"

    def __post_init__(self) -> None:
        if self.op not in LOGIC_OPERATORS:
            raise ValueError(f"Invalid test operator: {self.op!r}")


@dataclass(frozen=True)
class FunctionMarker:
    """``start_function_N`` / ``end_function_N``."""
    start: bool
    index: int
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "function_marker"

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("Function index must be non-negative")


@dataclass(frozen=True)
class Halt:
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "halt"


@dataclass(frozen=True)
class Lock:
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "lock"


@dataclass(frozen=True)
class UnknownStmt:
    """An instruction the lifter could not translate. ``text`` is the original source."""
    text: str = field(default="", compare=False)
    pattern: PatternTag = field(default=PatternTag.NOTDEFINED, compare=False)
    kind: ClassVar[str] = "unknown"


MailStatement = Union[
    Assignment, Control, ConditionStmt, FunctionMarker, Jump, LibCall,
    Call, Test, Halt, Lock, UnknownStmt,
]


def with_pattern(stmt: MailStatement, tag: PatternTag) -> MailStatement:
    """Return a copy of ``stmt`` carrying ``tag``."""
    return replace(stmt, pattern=tag)


def is_terminator(stmt: MailStatement) -> bool:
    """Statements that end a basic block: jumps, controls with a jump branch, halt."""
    if isinstance(stmt, (Jump, Halt)):
        return True
    return isinstance(stmt, Control) and stmt.jump is not None
