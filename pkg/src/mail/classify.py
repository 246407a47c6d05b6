"""
Pattern classification.

classify_pattern is total: every statement maps to exactly one tag. Only bare
integer constants count as "a constant" for the *_CONSTANT tags; a
displacement inside a memory reference or the offset of a stack expression
does not.
"""

from __future__ import annotations

from typing import Iterator

from .nodes import (
    Assignment,
    BinaryOp,
    Call,
    Constant,
    Control,
    Jump,
    LibCall,
    Halt,
    Lock,
    MailStatement,
    Register,
    StackRef,
    Test,
    UnaryOp,
    UnknownStmt,
    Value,
    with_pattern,
)
from .patterns import PatternTag


def _value_operands(value: Value) -> Iterator:
    if isinstance(value, BinaryOp):
        yield value.left
        yield value.right
    elif isinstance(value, UnaryOp):
        yield value.operand
    elif isinstance(value, LibCall):
        yield from value.args
    else:
        yield value


def _assignment_operands(stmt: Assignment) -> list:
    return [stmt.dest, *_value_operands(stmt.value)]


def _has_constant(operands) -> bool:
    return any(isinstance(o, Constant) for o in operands)


def _classify_assignment(stmt: Assignment) -> PatternTag:
    operands = _assignment_operands(stmt)
    has_stack = any(isinstance(o, StackRef) for o in operands)
    if any(isinstance(o, Register) and o.is_flag for o in operands):
        return PatternTag.FLAG_STACK if has_stack else PatternTag.FLAG
    if has_stack:
        return PatternTag.STACK_CONSTANT if _has_constant(operands) else PatternTag.STACK
    return PatternTag.ASSIGN_CONSTANT if _has_constant(operands) else PatternTag.ASSIGN


def _classify_jump(stmt: Jump) -> PatternTag:
    if isinstance(stmt.target, Constant):
        return PatternTag.JUMP_CONSTANT
    if isinstance(stmt.target, StackRef):
        return PatternTag.JUMP_STACK
    return PatternTag.JUMP


def _classify_control(stmt: Control) -> PatternTag:
    jump = stmt.jump
    if jump is not None:
        constant = isinstance(jump.target, Constant)
    else:
        # predicated assignments (SETcc, ARM conditional moves)
        operands = []
        for branch in (stmt.then, stmt.otherwise):
            if isinstance(branch, Assignment):
                operands.extend(_assignment_operands(branch))
        constant = _has_constant(operands)
    return PatternTag.CONTROL_CONSTANT if constant else PatternTag.CONTROL


def classify_pattern(stmt: MailStatement, libcall_as_call: bool = False) -> PatternTag:
    """
    Return the pattern tag of a statement.

    Args:
        stmt: Any MAIL statement.
        libcall_as_call: Tag standalone library calls CALL/CALL_CONSTANT instead
            of LIBCALL/LIBCALL_CONSTANT (the alternative tagging some
            annotated listings use for ``compare(EAX, 0x0);``).
    """
    if isinstance(stmt, Assignment):
        return _classify_assignment(stmt)
    if isinstance(stmt, Control):
        return _classify_control(stmt)
    if isinstance(stmt, Jump):
        return _classify_jump(stmt)
    if isinstance(stmt, Call):
        return PatternTag.CALL_CONSTANT if isinstance(stmt.target, Constant) else PatternTag.CALL
    if isinstance(stmt, LibCall):
        constant = _has_constant(stmt.args)
        if libcall_as_call:
            return PatternTag.CALL_CONSTANT if constant else PatternTag.CALL
        return PatternTag.LIBCALL_CONSTANT if constant else PatternTag.LIBCALL
    if isinstance(stmt, Test):
        return PatternTag.TEST_CONSTANT if _has_constant((stmt.left, stmt.right)) else PatternTag.TEST
    if isinstance(stmt, Halt):
        return PatternTag.HALT
    if isinstance(stmt, Lock):
        return PatternTag.LOCK
    if isinstance(stmt, UnknownStmt):
        return PatternTag.UNKNOWN
    return PatternTag.NOTDEFINED


def classified(stmt: MailStatement, libcall_as_call: bool = False) -> MailStatement:
    """Return ``stmt`` with its pattern field set by classify_pattern."""
    return with_pattern(stmt, classify_pattern(stmt, libcall_as_call))
