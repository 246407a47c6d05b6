"""
MAIL program well-formedness checks.

parse_mail already rejects text that violates the grammar. These checks cover
programs built in code (lifters, tests): function marker nesting, address
ordering inside function spans and library call arities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .mail.library import get_library
from .mail.nodes import Assignment, Control, FunctionMarker, LibCall
from .mail.program import MailProgram

logger = logging.getLogger(__name__)


@dataclass
class ValidationResult:
    """Result of program validation."""
    is_valid: bool
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def error_message(self) -> str:
        """Get a formatted error message."""
        if self.is_valid:
            return ""
        return "\n".join(self.errors)


class MailValidationError(Exception):
    """Raised when a MAIL program is not well formed."""

    def __init__(self, message: str, errors: list[str]):
        super().__init__(message)
        self.errors = errors


def _libcalls(stmt):
    if isinstance(stmt, LibCall):
        yield stmt
    elif isinstance(stmt, Assignment) and isinstance(stmt.value, LibCall):
        yield stmt.value
    elif isinstance(stmt, Control):
        for branch in (stmt.then, stmt.otherwise):
            if isinstance(branch, Assignment) and isinstance(branch.value, LibCall):
                yield branch.value


def validate_program(program: MailProgram) -> ValidationResult:
    """
    Check a program for structural problems.

    Errors: unbalanced or duplicated function markers, decreasing addresses
    inside a function, unknown library functions or wrong arities.
    Warnings: statements outside any function span.
    """
    errors: list[str] = []
    warnings: list[str] = []
    library = get_library()

    open_stack: list[int] = []
    seen: set[int] = set()
    last_addr: int | None = None
    outside = 0

    for position, (addr, stmt) in enumerate(program.statements):
        if isinstance(stmt, FunctionMarker):
            if stmt.start:
                if stmt.index in seen:
                    errors.append(f"statement {position}: duplicate start_function_{stmt.index}")
                seen.add(stmt.index)
                open_stack.append(stmt.index)
                last_addr = addr
            elif not open_stack or open_stack[-1] != stmt.index:
                errors.append(f"statement {position}: unmatched end_function_{stmt.index}")
            else:
                open_stack.pop()
            continue

        if open_stack:
            if last_addr is not None and addr < last_addr:
                errors.append(
                    f"statement {position}: address 0x{addr:x} precedes 0x{last_addr:x} "
                    f"in function {open_stack[-1]}"
                )
            last_addr = addr
        else:
            outside += 1

        for call in _libcalls(stmt):
            if not library.accepts(call.name, len(call.args)):
                errors.append(
                    f"statement {position}: invalid library call {call.name}() with {len(call.args)} argument(s)"
                )

    for index in open_stack:
        errors.append(f"missing end_function_{index}")

    declared = {f.index for f in program.functions}
    if declared != seen:
        errors.append(f"function table {sorted(declared)} does not match markers {sorted(seen)}")

    if outside:
        warnings.append(f"{outside} statement(s) outside any function span")

    return ValidationResult(is_valid=not errors, errors=errors, warnings=warnings)


def validate_program_or_raise(program: MailProgram) -> None:
    """
    Validate a program and raise if it is not well formed.

    Raises:
        MailValidationError: If validation fails
    """
    result = validate_program(program)
    if not result.is_valid:
        raise MailValidationError(
            f"MAIL program validation failed: {result.error_message}",
            result.errors,
        )
    for warning in result.warnings:
        logger.debug(warning)
