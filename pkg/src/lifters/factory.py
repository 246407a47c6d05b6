"""
Lifter factory.

This module maps an architecture to its lifter and lifts listings that mix
architectures span by span.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Iterable

from ..disasm import Arch, AsmInstruction, FunctionSpan
from ..mail.nodes import MailStatement
from ..mail.program import FunctionInfo, MailProgram
from .base import Lifter, LiftResult

logger = logging.getLogger(__name__)


def get_supported_archs() -> list[str]:
    """Return the architecture names accepted by create_lifter."""
    return [a.value for a in Arch]


def create_lifter(arch: Arch | str, libcall_as_call: bool = False) -> Lifter:
    """
    Create the lifter for an architecture.

    Args:
        arch: "x86" or "arm" (or an Arch)
        libcall_as_call: Tag library calls as CALL/CALL_CONSTANT

    Returns:
        Configured Lifter instance

    Raises:
        ValueError: If the architecture is unknown
        TableError: If the lifting table cannot be loaded
    """
    if isinstance(arch, str):
        arch = Arch.parse(arch)

    if arch == Arch.X86:
        from .x86 import X86Lifter
        return X86Lifter(libcall_as_call=libcall_as_call)

    elif arch == Arch.ARM:
        from .arm import ArmLifter
        return ArmLifter(libcall_as_call=libcall_as_call)

    else:
        raise ValueError(f"Unknown architecture: {arch}. Use 'x86' or 'arm'")


def lift_program(spans: Iterable[FunctionSpan], libcall_as_call: bool = False) -> MailProgram:
    """
    Lift spans that may belong to different architectures.

    Each span goes through the lifter for its own ``arch``; function indices
    follow span order.
    """
    statements: list[tuple[int, MailStatement]] = []
    functions: list[FunctionInfo] = []
    for index, span in enumerate(spans):
        lifter = _shared_lifter(span.arch, libcall_as_call)
        body, info = lifter.lift_span(span, index)
        statements.extend(body)
        functions.append(info)
    return MailProgram(tuple(statements), tuple(functions))


@lru_cache(maxsize=None)
def _shared_lifter(arch: Arch, libcall_as_call: bool) -> Lifter:
    return create_lifter(arch, libcall_as_call)


def lift_instruction(insn: AsmInstruction, libcall_as_call: bool = False) -> LiftResult:
    """Lift one instruction with the lifter for its architecture."""
    return _shared_lifter(insn.arch, libcall_as_call).lift_instruction(insn)
