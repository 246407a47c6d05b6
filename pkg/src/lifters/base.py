"""
Base class for instruction lifters.

A lifter turns AsmInstruction records into MAIL statements. Each architecture
supplies the per-instruction translation; span handling, function markers,
classification and the fallback to UNKNOWN live here.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Optional

from ..disasm import Arch, AsmInstruction, FunctionSpan
from ..mail.classify import classified
from ..mail.nodes import (
    Assignment,
    BinaryOp,
    Condition,
    Constant,
    Control,
    FunctionMarker,
    Jump,
    MailStatement,
    Register,
    UnknownStmt,
)
from ..mail.parser import parse_condition
from ..mail.program import FunctionInfo, MailProgram
from ..tables import LiftingTable, load_lifting_table

logger = logging.getLogger(__name__)

# Operators for which "x op 0" leaves x unchanged.
_ZERO_IDENTITY = ("+", "-", "or", "xor", "<<", ">>")


class OperandError(ValueError):
    """Raised by lifter helpers when an operand cannot be expressed in MAIL."""


@dataclass(frozen=True)
class LiftResult:
    """The statements produced for one instruction."""
    instruction: AsmInstruction
    statements: tuple[MailStatement, ...]

    @property
    def ignored(self) -> bool:
        return not self.statements

    @property
    def unknown(self) -> bool:
        return any(isinstance(s, UnknownStmt) for s in self.statements)


class LiftContext:
    """
    Per-function lifting state.

    Holds the counter for synthetic gr_N temporaries. A fresh context is
    created for every function span so numbering restarts at gr_0.
    """

    def __init__(self) -> None:
        self._next_temp = 0

    def temp(self) -> Register:
        reg = Register(f"gr_{self._next_temp}")
        self._next_temp += 1
        return reg


def arith(dest, left, op: str, right) -> Assignment:
    """
    Build ``dest = left op right`` with the canonical forms applied.

    ``r = r xor r`` and ``r = r - r`` become ``r = 0x0``; ``x op 0x0`` for an
    identity operator becomes a plain copy.
    """
    if op in ("xor", "-") and left == right and isinstance(left, Register):
        return Assignment(dest, Constant(0))
    if op in _ZERO_IDENTITY and isinstance(right, Constant) and right.value == 0:
        return Assignment(dest, left)
    return Assignment(dest, BinaryOp(left, op, right))


def need(operands: tuple, count: int, mnemonic: str) -> None:
    if len(operands) < count:
        raise OperandError(f"{mnemonic} needs {count} operand(s), got {len(operands)}")


class Lifter(ABC):
    """
    Abstract base class for architecture lifters.

    Subclasses implement ``_lift`` for a single instruction. Anything they
    cannot express raises OperandError or returns None, and the instruction
    becomes an UNKNOWN statement.
    """

    arch: Arch

    def __init__(self, table: Optional[LiftingTable] = None, libcall_as_call: bool = False):
        self.table = table if table is not None else load_lifting_table(self.arch.value)
        self.libcall_as_call = libcall_as_call
        self._predicates: dict[str, Condition] = {
            code: parse_condition(text) for code, text in self.table.predicates.items()
        }

    def predicate(self, code: str) -> Condition:
        """The flag condition for a condition code such as "LE"."""
        try:
            return self._predicates[code]
        except KeyError:
            raise OperandError(f"no predicate for condition code {code}") from None

    def guarded(self, code: Optional[str], statements: list[MailStatement]) -> list[MailStatement]:
        """Wrap assignments and jumps in ``if (predicate)`` for a conditional instruction."""
        if code is None:
            return statements
        cond = self.predicate(code)
        return [
            Control(cond, s) if isinstance(s, (Assignment, Jump)) else s
            for s in statements
        ]

    @abstractmethod
    def _lift(self, insn: AsmInstruction, ctx: LiftContext) -> Optional[list[MailStatement]]:
        """Translate one instruction. Return [] when it is ignored, None when unsupported."""
        pass

    def lift_instruction(self, insn: AsmInstruction, ctx: Optional[LiftContext] = None) -> LiftResult:
        """
        Lift a single instruction to classified MAIL statements.

        Raises:
            ValueError: If the instruction belongs to another architecture.
        """
        if insn.arch != self.arch:
            raise ValueError(f"{type(self).__name__} cannot lift {insn.arch.value} instruction at 0x{insn.address:x}")
        ctx = ctx or LiftContext()
        try:
            statements = self._lift(insn, ctx)
        except OperandError as e:
            logger.debug(f"0x{insn.address:x} {insn.text}: {e}")
            statements = None
        if statements is None:
            logger.debug(f"0x{insn.address:x}: no lifting for {insn.text!r}, emitting UNKNOWN")
            statements = [UnknownStmt(insn.text)]
        return LiftResult(insn, tuple(classified(s, self.libcall_as_call) for s in statements))

    def lift_span(self, span: FunctionSpan, index: int) -> tuple[list[tuple[int, MailStatement]], FunctionInfo]:
        """Lift one function span, bracketed by its start/end markers."""
        ctx = LiftContext()
        statements: list[tuple[int, MailStatement]] = [
            (span.start, classified(FunctionMarker(True, index))),
        ]
        last = span.start
        for insn in span.instructions:
            for stmt in self.lift_instruction(insn, ctx).statements:
                statements.append((insn.address, stmt))
            last = max(last, insn.address)
        end = max(span.end, last)
        statements.append((end, classified(FunctionMarker(False, index))))
        info = FunctionInfo(
            index=index,
            name=span.name,
            start=span.start,
            end=end,
            boundaries=frozenset(i.address for i in span.instructions),
        )
        return statements, info

    def lift_program(self, spans: Iterable[FunctionSpan]) -> MailProgram:
        """
        Lift function spans into a MAIL program.

        Function N in the output is the N-th span. Every statement is
        classified before it is returned.
        """
        statements: list[tuple[int, MailStatement]] = []
        functions: list[FunctionInfo] = []
        for index, span in enumerate(spans):
            body, info = self.lift_span(span, index)
            statements.extend(body)
            functions.append(info)
        logger.debug(f"{self.arch.value}: lifted {len(functions)} function(s), {len(statements)} statement(s)")
        return MailProgram(tuple(statements), tuple(functions))
