"""
Canonical MAIL text rendering.

One statement per line, terminated by ";", hexadecimal constants with a
"0x" prefix and single spaces around operators. The output is accepted by
parse_mail, and parse_mail(emit_mail(p)) == p.
"""

from __future__ import annotations

from .nodes import (
    Assignment,
    BinaryOp,
    Call,
    Comparison,
    Condition,
    ConditionStmt,
    Constant,
    Control,
    FunctionMarker,
    Halt,
    Jump,
    LibCall,
    Lock,
    MailStatement,
    MemRef,
    Register,
    StackRef,
    Test,
    UnaryOp,
    Unknown,
    UnknownStmt,
)
from .program import MailProgram


def format_constant(c: Constant) -> str:
    if not c.hex:
        return str(c.value)
    digits = f"{abs(c.value):x}".rjust(c.width, "0")
    return f"-0x{digits}" if c.value < 0 else f"0x{digits}"


def format_operand(operand) -> str:
    if isinstance(operand, Register):
        return operand.name
    if isinstance(operand, Constant):
        return format_constant(operand)
    if isinstance(operand, MemRef):
        text = format_operand(operand.terms[0])
        for op, term in zip(operand.ops, operand.terms[1:]):
            rendered = format_operand(term)
            # "--" starts a comment
            sep = " " if op == "-" and rendered.startswith("-") else ""
            text += op + sep + rendered
        return "[" + text + "]"
    if isinstance(operand, StackRef):
        return f"[SP=SP{operand.op}0x{operand.offset:x}]"
    if isinstance(operand, Unknown):
        return "UNKNOWN"
    raise TypeError(f"Not a MAIL operand: {operand!r}")


def format_value(value) -> str:
    if isinstance(value, BinaryOp):
        return f"{format_operand(value.left)} {value.op} {format_operand(value.right)}"
    if isinstance(value, UnaryOp):
        return f"{value.op} {format_operand(value.operand)}"
    if isinstance(value, LibCall):
        return f"{value.name}({', '.join(format_operand(a) for a in value.args)})"
    return format_operand(value)


def format_condition(cond: Condition) -> str:
    parts = [_format_comparison(cond.terms[0])]
    for conn, term in zip(cond.connectives, cond.terms[1:]):
        parts.append(conn)
        parts.append(_format_comparison(term))
    return " ".join(parts)


def _format_comparison(c: Comparison) -> str:
    return f"{format_operand(c.left)} {c.op} {format_operand(c.right)}"


def _format_branch(branch) -> str:
    if isinstance(branch, Jump):
        return f"jmp {format_operand(branch.target)}"
    return f"{format_operand(branch.dest)} = {format_value(branch.value)}"


def format_statement(stmt: MailStatement) -> str:
    """Render one statement, including its terminating ';'."""
    if isinstance(stmt, Assignment):
        return f"{format_operand(stmt.dest)} = {format_value(stmt.value)};"
    if isinstance(stmt, Control):
        text = f"if ({format_condition(stmt.condition)}) {_format_branch(stmt.then)};"
        if stmt.otherwise is not None:
            text += f" else {_format_branch(stmt.otherwise)};"
        return text
    if isinstance(stmt, ConditionStmt):
        return f"{format_condition(stmt.condition)};"
    if isinstance(stmt, Jump):
        return f"jmp {format_operand(stmt.target)};"
    if isinstance(stmt, Call):
        return f"call {format_operand(stmt.target)};"
    if isinstance(stmt, LibCall):
        return f"{format_value(stmt)};"
    if isinstance(stmt, Test):
        return f"{format_operand(stmt.left)} {stmt.op} {format_operand(stmt.right)};"
    if isinstance(stmt, FunctionMarker):
        return f"{'start' if stmt.start else 'end'}_function_{stmt.index};"
    if isinstance(stmt, Halt):
        return "halt;"
    if isinstance(stmt, Lock):
        return "lock;"
    if isinstance(stmt, UnknownStmt):
        return "UNKNOWN;"
    raise TypeError(f"Not a MAIL statement: {stmt!r}")


def emit_mail(program: MailProgram, addresses: bool = False) -> str:
    """
    Render a program as MAIL text.

    Args:
        program: The program to render.
        addresses: Append "-- 0x<addr>" to every line. Function start markers
            also carry the function name so parse_mail can restore it.

    Returns:
        The text, one statement per line, with a trailing newline when the
        program is non-empty.
    """
    names = {f.index: f.name for f in program.functions}
    lines = []
    for addr, stmt in program.statements:
        line = format_statement(stmt)
        if addresses:
            line += f" -- 0x{addr:x}"
            if isinstance(stmt, FunctionMarker) and stmt.start and names.get(stmt.index):
                line += f" {names[stmt.index]}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")
