"""
ARM (A32) lifter.

A mnemonic is resolved in this order: exact table entry, stem plus a
trailing condition code (MOVLE), stem plus the flag-setting S suffix (ADDS),
and both (ADDSLE / ADDLES). The ignore list is consulted for each candidate
stem before the rules. Conditional instructions wrap their assignments and
jumps in ``if (<predicate>)``.
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
    Jump,
    LibCall,
    MailStatement,
    MemRef,
    Register,
    StackRef,
    Test,
    UnaryOp,
)
from .base import LiftContext, Lifter, OperandError, arith, need
from .operands import parse_arm_operand, parse_register_list, parse_target

logger = logging.getLogger(__name__)

UNCONDITIONAL = "AL"
PC = Register("PC")
PUSH_SLOT = StackRef("+", 1)
POP_SLOT = StackRef("-", 1)
RETURN_SLOT = StackRef("-", 8)

_SHIFTS = {"LSL": "<<", "LSR": ">>", "ASR": ">>", "ROR": ">>"}
_IGNORED = "ignore"


class ArmLifter(Lifter):
    """Lifter for ARM (A32) disassembly."""

    arch = Arch.ARM

    def _candidates(self, mnemonic: str) -> list[tuple[str, Optional[str]]]:
        conditions = self.table.conditions
        out: list[tuple[str, Optional[str]]] = [(mnemonic, None)]
        if len(mnemonic) > 2 and mnemonic[-2:] in conditions:
            stem, code = mnemonic[:-2], conditions[mnemonic[-2:]]
            out.append((stem, code))
            if len(stem) > 1 and stem.endswith("S"):
                out.append((stem[:-1], code))
        if len(mnemonic) > 1 and mnemonic.endswith("S"):
            stem = mnemonic[:-1]
            out.append((stem, None))
            if len(stem) > 2 and stem[-2:] in conditions:
                out.append((stem[:-2], conditions[stem[-2:]]))
        return out

    def _resolve(self, mnemonic: str) -> tuple[Optional[str], Optional[str]]:
        # width qualifiers such as ".W" do not change the lifting
        mnemonic = mnemonic.split(".", 1)[0]
        for stem, code in self._candidates(mnemonic):
            if stem in self.table.ignore:
                return _IGNORED, None
            rule = self.table.rules.get(stem)
            if rule is not None:
                return rule, None if code == UNCONDITIONAL else code
        return None, None

    def _lift(self, insn: AsmInstruction, ctx: LiftContext) -> Optional[list[MailStatement]]:
        if self.table.is_ignored(insn.mnemonic, insn.operands):
            return []
        rule, code = self._resolve(insn.mnemonic)
        if rule == _IGNORED:
            return []
        if rule is None:
            return None
        shape, _, arg = rule.partition(":")
        handler = _HANDLERS.get(shape)
        if handler is None:
            logger.warning(f"arm table rule {rule!r} for {insn.mnemonic} has no handler")
            return None
        return self.guarded(code, handler(self, insn, arg, ctx))

    # =========================================================================
    # Operand helpers
    # =========================================================================

    def _flexible(self, insn: AsmInstruction, ops: list, index: int, ctx: LiftContext, out: list):
        """
        The flexible second operand at ``index``. A trailing shift such as
        "LSL #2" is applied through a temporary.
        """
        value = ops[index]
        if len(insn.operands) > index + 1:
            words = insn.operands[index + 1].split()
            op = _SHIFTS.get(words[0].upper()) if words else None
            if op is None or len(words) != 2:
                raise OperandError(f"unsupported shifted operand {insn.operands[index + 1]!r}")
            amount = parse_arm_operand(words[1])
            temp = ctx.temp()
            out.append(Assignment(temp, BinaryOp(value, op, amount)))
            return temp
        return value

    # =========================================================================
    # Data processing
    # =========================================================================

    def _move(self, insn, arg, ctx):
        need(insn.operands, 2, insn.mnemonic)
        out: list[MailStatement] = []
        ops = [parse_arm_operand(insn.operands[0]), parse_arm_operand(insn.operands[1])]
        src = self._flexible(insn, ops, 1, ctx, out)
        out.append(Assignment(ops[0], src))
        return out

    def _unary_move(self, insn, arg, ctx):
        need(insn.operands, 2, insn.mnemonic)
        dest, src = parse_arm_operand(insn.operands[0]), parse_arm_operand(insn.operands[1])
        return [Assignment(dest, UnaryOp(arg, src))]

    def _load(self, insn, arg, ctx):
        need(insn.operands, 2, insn.mnemonic)
        dest, src = parse_arm_operand(insn.operands[0]), parse_arm_operand(insn.operands[1])
        return [Assignment(dest, src)]

    def _store(self, insn, arg, ctx):
        need(insn.operands, 2, insn.mnemonic)
        src, dest = parse_arm_operand(insn.operands[0]), parse_arm_operand(insn.operands[1])
        if not isinstance(dest, MemRef):
            raise OperandError(f"store destination must be memory, got {insn.operands[1]!r}")
        return [Assignment(dest, src)]

    def _binary(self, insn, arg, ctx):
        need(insn.operands, 2, insn.mnemonic)
        out: list[MailStatement] = []
        dest = parse_arm_operand(insn.operands[0])
        if len(insn.operands) == 2:
            out.append(arith(dest, dest, arg, parse_arm_operand(insn.operands[1])))
            return out
        ops = [dest, parse_arm_operand(insn.operands[1]), parse_arm_operand(insn.operands[2])]
        right = self._flexible(insn, ops, 2, ctx, out)
        out.append(arith(dest, ops[1], arg, right))
        return out

    def _reverse(self, insn, arg, ctx):
        need(insn.operands, 3, insn.mnemonic)
        dest, left, right = (parse_arm_operand(op) for op in insn.operands[:3])
        return [Assignment(dest, BinaryOp(right, arg, left))]

    def _mla(self, insn, arg, ctx):
        need(insn.operands, 4, insn.mnemonic)
        dest, rn, rm, ra = (parse_arm_operand(op) for op in insn.operands[:4])
        temp = ctx.temp()
        return [Assignment(temp, BinaryOp(rn, "*", rm)), Assignment(dest, BinaryOp(temp, "+", ra))]

    def _compare(self, insn, arg, ctx):
        need(insn.operands, 2, insn.mnemonic)
        a, b = parse_arm_operand(insn.operands[0]), parse_arm_operand(insn.operands[1])
        return [LibCall("compare", (a, b))]

    def _test(self, insn, arg, ctx):
        need(insn.operands, 2, insn.mnemonic)
        a, b = parse_arm_operand(insn.operands[0]), parse_arm_operand(insn.operands[1])
        return [Test(a, arg, b)]

    # =========================================================================
    # Branches
    # =========================================================================

    @staticmethod
    def _target(insn: AsmInstruction):
        need(insn.operands, 1, insn.mnemonic)
        try:
            return parse_target(insn.operands[0])
        except OperandError:
            return UNKNOWN

    def _branch(self, insn, arg, ctx):
        return [Jump(self._target(insn))]

    def _branch_link(self, insn, arg, ctx):
        return [Call(self._target(insn))]

    def _branch_exchange(self, insn, arg, ctx):
        need(insn.operands, 1, insn.mnemonic)
        return [Jump(UNKNOWN)]

    # =========================================================================
    # Stack
    # =========================================================================

    @staticmethod
    def _register_list(insn: AsmInstruction) -> list[Register]:
        need(insn.operands, 1, insn.mnemonic)
        # STMFD SP!, {...} carries the base register first
        return parse_register_list(insn.operands[-1])

    def _push(self, insn, arg, ctx):
        return [Assignment(PUSH_SLOT, reg) for reg in self._register_list(insn)]

    def _pop(self, insn, arg, ctx):
        out: list[MailStatement] = []
        for reg in self._register_list(insn):
            if reg == PC:
                out.append(Jump(RETURN_SLOT))
            else:
                out.append(Assignment(reg, POP_SLOT))
        return out

    def _nop(self, insn, arg, ctx):
        return []


_HANDLERS: dict[str, Callable[..., list]] = {
    "move": ArmLifter._move,
    "unary_move": ArmLifter._unary_move,
    "load": ArmLifter._load,
    "store": ArmLifter._store,
    "binary": ArmLifter._binary,
    "reverse": ArmLifter._reverse,
    "mla": ArmLifter._mla,
    "compare": ArmLifter._compare,
    "test": ArmLifter._test,
    "branch": ArmLifter._branch,
    "branch_link": ArmLifter._branch_link,
    "branch_exchange": ArmLifter._branch_exchange,
    "push": ArmLifter._push,
    "pop": ArmLifter._pop,
    "nop": ArmLifter._nop,
}


def lift_instruction_arm(insn: AsmInstruction, ctx: Optional[LiftContext] = None):
    """Lift one ARM instruction with the shipped ARM table."""
    return ArmLifter().lift_instruction(insn, ctx)


def lift_program_arm(spans):
    """Lift ARM function spans into a MAIL program."""
    return ArmLifter().lift_program(spans)
