"""
x86 / x86-64 lifter.

Mnemonics are mapped to rule ids by tables/x86.yaml; this module implements
one handler per rule shape. The string instructions use RSI/RDI and the
accumulator named by their size suffix.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional

from ..disasm import Arch, AsmInstruction
from ..mail.nodes import (
    UNKNOWN,
    Assignment,
    BinaryOp,
    Call,
    Comparison,
    Condition,
    Constant,
    Control,
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
)
from .base import LiftContext, Lifter, OperandError, arith, need
from .operands import parse_target, parse_x86_operand

logger = logging.getLogger(__name__)

# Single-operand sign extensions: mnemonic -> (destination, source)
IMPLICIT_CONVERSIONS = {
    "CBW": ("AX", "AL"),
    "CWDE": ("EAX", "AX"),
    "CDQE": ("RAX", "EAX"),
    "CWD": ("DX", "AX"),
    "CDQ": ("EDX", "EAX"),
    "CQO": ("RDX", "RAX"),
}

_ACCUMULATORS = {"B": "AL", "W": "AX", "D": "EAX", "Q": "RAX"}
_COUNT_REGISTERS = {"JCXZ": "CX", "JECXZ": "ECX", "JRCXZ": "RCX"}
# Shapes whose only operand is a branch target, kept as raw text
_TARGET_SHAPES = frozenset({"jmp", "call", "loop", "jcxz", "jcc"})

SRC_STRING = MemRef((Register("RSI"),))
DST_STRING = MemRef((Register("RDI"),))
PUSH_SLOT = StackRef("+", 1)
POP_SLOT = StackRef("-", 1)
RETURN_SLOT = StackRef("-", 8)


def _accumulator(mnemonic: str) -> Register:
    return Register(_ACCUMULATORS.get(mnemonic[-1], "EAX")) if len(mnemonic) > 4 else Register("EAX")


def _wide(operand) -> bool:
    return isinstance(operand, Register) and operand.name.startswith("R")


class X86Lifter(Lifter):
    """Lifter for Intel-syntax x86 and x86-64 disassembly."""

    arch = Arch.X86

    def _resolve(self, mnemonic: str) -> tuple[Optional[str], Optional[str]]:
        rule = self.table.rules.get(mnemonic)
        if rule is not None:
            return rule, None
        for prefix in sorted(self.table.families, key=len, reverse=True):
            if mnemonic.startswith(prefix):
                code = self.table.conditions.get(mnemonic[len(prefix):])
                if code is not None:
                    return self.table.families[prefix], code
        return None, None

    def _lift(self, insn: AsmInstruction, ctx: LiftContext) -> Optional[list[MailStatement]]:
        mnemonic = insn.mnemonic
        prefix: list[MailStatement] = [Lock()] if "LOCK" in insn.prefixes else []
        if mnemonic == "LOCK":
            return [Lock()]
        if self.table.is_ignored(mnemonic, insn.operands) or self._is_breakpoint(insn):
            return prefix

        rule, code = self._resolve(mnemonic)
        if rule is None:
            return None
        shape, _, arg = rule.partition(":")
        handler = _HANDLERS.get(shape)
        if handler is None:
            logger.warning(f"x86 table rule {rule!r} for {mnemonic} has no handler")
            return None
        if shape in _TARGET_SHAPES:
            operands = ()
        else:
            operands = tuple(parse_x86_operand(op) for op in insn.operands)
        body = handler(self, insn, operands, arg, code, ctx)
        return prefix + body

    @staticmethod
    def _is_breakpoint(insn: AsmInstruction) -> bool:
        if insn.mnemonic != "INT" or len(insn.operands) != 1:
            return False
        try:
            return int(insn.operands[0], 0) == 3
        except ValueError:
            return False

    # =========================================================================
    # Data movement
    # =========================================================================

    def _move(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        return [Assignment(ops[0], ops[1])]

    def _convert(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        return [Assignment(ops[0], LibCall("convert", (ops[1],)))]

    def _convert_implicit(self, insn, ops, arg, code, ctx):
        dest, src = IMPLICIT_CONVERSIONS[insn.mnemonic]
        return [Assignment(Register(dest), LibCall("convert", (Register(src),)))]

    def _lea(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        dest, addr = ops[0], ops[1]
        if not isinstance(addr, MemRef):
            return [Assignment(dest, addr)]
        terms, operators = addr.terms, addr.ops
        if len(terms) == 1:
            return [Assignment(dest, terms[0])]
        if len(terms) == 2:
            return [Assignment(dest, BinaryOp(terms[0], operators[0], terms[1]))]
        # scaled index forms need a temporary per partial result
        temp = ctx.temp()
        out: list[MailStatement] = [Assignment(temp, BinaryOp(terms[0], operators[0], terms[1]))]
        for op, term in zip(operators[1:-1], terms[2:-1]):
            out.append(Assignment(temp, BinaryOp(temp, op, term)))
        out.append(Assignment(dest, BinaryOp(temp, operators[-1], terms[-1])))
        return out

    def _xchg(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        a, b = ops[0], ops[1]
        if a == b:
            return []
        temp = ctx.temp()
        return [Assignment(temp, a), Assignment(a, b), Assignment(b, temp)]

    def _push(self, insn, ops, arg, code, ctx):
        need(ops, 1, insn.mnemonic)
        return [Assignment(PUSH_SLOT, ops[0])]

    def _pop(self, insn, ops, arg, code, ctx):
        need(ops, 1, insn.mnemonic)
        return [Assignment(ops[0], POP_SLOT)]

    def _pushf(self, insn, ops, arg, code, ctx):
        return [Assignment(PUSH_SLOT, Register("EFLAGS"))]

    def _popf(self, insn, ops, arg, code, ctx):
        return [Assignment(Register("EFLAGS"), POP_SLOT)]

    # =========================================================================
    # Arithmetic
    # =========================================================================

    def _binary(self, insn, ops, arg, code, ctx):
        need(ops, 1, insn.mnemonic)
        if len(ops) == 1:
            if arg in ("<<", ">>"):
                return [arith(ops[0], ops[0], arg, Constant(1))]
            # MUL/DIV/IMUL with one operand work on the accumulator
            acc = Register("RAX" if _wide(ops[0]) else "EAX")
            return [Assignment(acc, BinaryOp(acc, arg, ops[0]))]
        if len(ops) >= 3:
            return [arith(ops[0], ops[1], arg, ops[2])]
        return [arith(ops[0], ops[0], arg, ops[1])]

    def _inc(self, insn, ops, arg, code, ctx):
        need(ops, 1, insn.mnemonic)
        return [Assignment(ops[0], BinaryOp(ops[0], "+", Constant(1)))]

    def _dec(self, insn, ops, arg, code, ctx):
        need(ops, 1, insn.mnemonic)
        return [Assignment(ops[0], BinaryOp(ops[0], "+", Constant(-1)))]

    def _unary(self, insn, ops, arg, code, ctx):
        need(ops, 1, insn.mnemonic)
        return [Assignment(ops[0], UnaryOp(arg, ops[0]))]

    # =========================================================================
    # Library-backed instructions
    # =========================================================================

    def _scan(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        return [LibCall(arg, (ops[1], ops[0]))]

    def _lib_unary(self, insn, ops, arg, code, ctx):
        if not ops:
            st0 = Register("ST0")
            return [Assignment(st0, LibCall(arg, (st0,)))]
        src = ops[1] if len(ops) >= 2 else ops[0]
        return [Assignment(ops[0], LibCall(arg, (src,)))]

    def _lib_binary(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        if len(ops) >= 3:
            return [Assignment(ops[0], LibCall(arg, (ops[1], ops[2])))]
        return [Assignment(ops[0], LibCall(arg, (ops[0], ops[1])))]

    def _bit_test(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        return [Assignment(Register("CF"), LibCall("bit", (ops[0], ops[1], Constant(1))))]

    def _bits(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        if arg == "complement":
            return [Assignment(ops[0], LibCall(arg, (ops[0], ops[1])))]
        return [Assignment(ops[0], LibCall(arg, (ops[0], ops[1], Constant(1))))]

    # =========================================================================
    # Comparison and control flow
    # =========================================================================

    def _compare(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        return [LibCall("compare", (ops[0], ops[1]))]

    def _test(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        return [Test(ops[0], "and", ops[1])]

    @staticmethod
    def _target(insn: AsmInstruction, ops):
        need(insn.operands, 1, insn.mnemonic)
        try:
            return parse_target(insn.operands[0])
        except OperandError:
            return UNKNOWN

    def _jmp(self, insn, ops, arg, code, ctx):
        return [Jump(self._target(insn, ops))]

    def _call(self, insn, ops, arg, code, ctx):
        return [Call(self._target(insn, ops))]

    def _ret(self, insn, ops, arg, code, ctx):
        return [Jump(RETURN_SLOT)]

    def _loop(self, insn, ops, arg, code, ctx):
        cond = Condition((Comparison(Register("ECX"), "!=", Constant(0)),))
        return [Control(cond, Jump(self._target(insn, ops)))]

    def _jcxz(self, insn, ops, arg, code, ctx):
        reg = Register(_COUNT_REGISTERS.get(insn.mnemonic, "ECX"))
        cond = Condition((Comparison(reg, "==", Constant(0)),))
        return [Control(cond, Jump(self._target(insn, ops)))]

    def _halt(self, insn, ops, arg, code, ctx):
        return [Halt()]

    def _jcc(self, insn, ops, arg, code, ctx):
        return [Control(self.predicate(code), Jump(self._target(insn, ops)))]

    def _setcc(self, insn, ops, arg, code, ctx):
        need(ops, 1, insn.mnemonic)
        return [Control(
            self.predicate(code),
            Assignment(ops[0], Constant(1)),
            Assignment(ops[0], Constant(0)),
        )]

    def _cmovcc(self, insn, ops, arg, code, ctx):
        need(ops, 2, insn.mnemonic)
        return [Assignment(ops[0], ops[1])]

    # =========================================================================
    # String instructions
    # =========================================================================

    def _string_compare(self, insn, ops, arg, code, ctx):
        if len(ops) >= 2:
            return [LibCall("compare", (ops[0], ops[1]))]
        return [LibCall("compare", (SRC_STRING, DST_STRING))]

    def _string_scan(self, insn, ops, arg, code, ctx):
        return [LibCall("compare", (_accumulator(insn.mnemonic), DST_STRING))]

    def _string_move(self, insn, ops, arg, code, ctx):
        if len(ops) >= 2:
            return [LibCall("copy", (ops[0], ops[1]))]
        return [LibCall("copy", (DST_STRING, SRC_STRING))]

    def _string_load(self, insn, ops, arg, code, ctx):
        return [LibCall("load", (_accumulator(insn.mnemonic), SRC_STRING))]

    def _string_store(self, insn, ops, arg, code, ctx):
        return [LibCall("store", (DST_STRING, _accumulator(insn.mnemonic)))]

    def _movsd(self, insn, ops, arg, code, ctx):
        if ops:
            return self._move(insn, ops, arg, code, ctx)
        return self._string_move(insn, ops, arg, code, ctx)

    def _cmpsd(self, insn, ops, arg, code, ctx):
        if ops:
            return self._compare(insn, ops, arg, code, ctx)
        return self._string_compare(insn, ops, arg, code, ctx)

    # =========================================================================
    # Flags and no-ops
    # =========================================================================

    def _flag_clear(self, insn, ops, arg, code, ctx):
        return [Assignment(Register(arg), Constant(0))]

    def _flag_set(self, insn, ops, arg, code, ctx):
        return [Assignment(Register(arg), Constant(1))]

    def _nop(self, insn, ops, arg, code, ctx):
        return []


Handler = Callable[..., list]

_HANDLERS: dict[str, Handler] = {
    "move": X86Lifter._move,
    "convert": X86Lifter._convert,
    "convert_implicit": X86Lifter._convert_implicit,
    "lea": X86Lifter._lea,
    "xchg": X86Lifter._xchg,
    "push": X86Lifter._push,
    "pop": X86Lifter._pop,
    "pushf": X86Lifter._pushf,
    "popf": X86Lifter._popf,
    "binary": X86Lifter._binary,
    "inc": X86Lifter._inc,
    "dec": X86Lifter._dec,
    "unary": X86Lifter._unary,
    "scan": X86Lifter._scan,
    "lib_unary": X86Lifter._lib_unary,
    "lib_binary": X86Lifter._lib_binary,
    "bit_test": X86Lifter._bit_test,
    "bits": X86Lifter._bits,
    "compare": X86Lifter._compare,
    "test": X86Lifter._test,
    "jmp": X86Lifter._jmp,
    "call": X86Lifter._call,
    "ret": X86Lifter._ret,
    "loop": X86Lifter._loop,
    "jcxz": X86Lifter._jcxz,
    "halt": X86Lifter._halt,
    "jcc": X86Lifter._jcc,
    "setcc": X86Lifter._setcc,
    "cmovcc": X86Lifter._cmovcc,
    "string_compare": X86Lifter._string_compare,
    "string_scan": X86Lifter._string_scan,
    "string_move": X86Lifter._string_move,
    "string_load": X86Lifter._string_load,
    "string_store": X86Lifter._string_store,
    "movsd": X86Lifter._movsd,
    "cmpsd": X86Lifter._cmpsd,
    "flag_clear": X86Lifter._flag_clear,
    "flag_set": X86Lifter._flag_set,
    "nop": X86Lifter._nop,
}
