"""
Operand text to MAIL operands.

x86 operands use Intel syntax ("DWORD PTR [RBP-0x18]", "0x1", "EAX"); ARM
operands use "#imm", "[Rn, #off]!" and "{R4, LR}".
"""

from __future__ import annotations

import re

from ..mail.nodes import Constant, MemRef, Register
from .base import OperandError

SIZE_WORDS = frozenset({
    "BYTE", "WORD", "DWORD", "QWORD", "TBYTE", "FWORD", "OWORD",
    "XMMWORD", "YMMWORD", "ZMMWORD", "PTR", "SHORT", "NEAR", "FAR",
})

_IMM_RE = re.compile(r"^(-)?(0x[0-9a-fA-F]+|\d+)$")
_REG_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SEGMENT_RE = re.compile(r"^[A-Za-z]{2}:")
_ADDR_TOKEN_RE = re.compile(r"\s*(0x[0-9a-fA-F]+|\d+|[A-Za-z_][A-Za-z0-9_]*|[-+*])")
_BARE_HEX_RE = re.compile(r"^(?:0x)?([0-9a-fA-F]+)$")


def _to_int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        # "0123": int() refuses a leading zero without a base prefix
        raise OperandError(f"ambiguous number {text!r}") from None


def parse_immediate(text: str) -> Constant:
    m = _IMM_RE.match(text.strip())
    if not m:
        raise OperandError(f"not an immediate: {text!r}")
    value = _to_int(m.group(2))
    return Constant(-value if m.group(1) else value)


def is_immediate(text: str) -> bool:
    return bool(_IMM_RE.match(text.strip()))


def parse_target(text: str) -> Constant:
    """A branch target. Bare digits are hexadecimal, as disassemblers print them."""
    m = _BARE_HEX_RE.match(text.strip().lstrip("#"))
    if not m:
        raise OperandError(f"not a branch address: {text!r}")
    return Constant(int(m.group(1), 16))


def parse_address_expr(inner: str) -> MemRef:
    """``RBP-0x18``, ``RDX+RAX*8+0x10`` or ``0x601040`` to a MemRef."""
    tokens: list[str] = []
    pos = 0
    inner = inner.strip()
    while pos < len(inner):
        m = _ADDR_TOKEN_RE.match(inner, pos)
        if not m:
            raise OperandError(f"cannot parse address {inner!r}")
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(inner) and inner[pos].isspace():
            pos += 1
    if not tokens:
        raise OperandError("empty address")

    terms: list = []
    ops: list[str] = []
    negate = False
    if tokens[0] == "-":
        negate = True
        tokens = tokens[1:]
    expect_term = True
    for tok in tokens:
        if expect_term:
            if tok in ("+", "-", "*"):
                raise OperandError(f"operator where a term was expected in {inner!r}")
            if is_immediate(tok):
                value = _to_int(tok)
                terms.append(Constant(-value if negate else value))
            else:
                terms.append(Register(tok.upper()))
            negate = False
            expect_term = False
        else:
            if tok not in ("+", "-", "*"):
                raise OperandError(f"missing operator in address {inner!r}")
            ops.append(tok)
            expect_term = True
    if expect_term:
        raise OperandError(f"address ends with an operator: {inner!r}")
    return MemRef(tuple(terms), tuple(ops))


def _strip_size(text: str) -> str:
    words = text.split()
    while words and words[0].upper() in SIZE_WORDS:
        words = words[1:]
    return " ".join(words)


def parse_x86_operand(text: str):
    """One Intel-syntax operand to a Register, Constant or MemRef."""
    t = _strip_size(text.strip())
    if "[" in t:
        start, end = t.index("["), t.rindex("]")
        return parse_address_expr(t[start + 1:end])
    if _SEGMENT_RE.match(t):
        # segment-relative absolute address, e.g. "FS:0x28"
        return parse_address_expr(t[3:])
    if is_immediate(t):
        return parse_immediate(t)
    if _REG_RE.match(t):
        return Register(t.upper())
    # x87 stack registers print as ST(1)
    m = re.match(r"^ST\((\d)\)$", t, re.IGNORECASE)
    if m:
        return Register(f"ST{m.group(1)}")
    raise OperandError(f"cannot parse operand {text!r}")


def parse_arm_operand(text: str):
    """One ARM operand: "#imm", "=imm", "[Rn, #off]", "[Rn, Rm]" or a register."""
    t = text.strip()
    if t.startswith(("#", "=")):
        return parse_immediate(t[1:])
    if t.startswith("["):
        inner = t.rstrip("!").strip()
        if not inner.endswith("]"):
            raise OperandError(f"unclosed memory operand {text!r}")
        parts = [p.strip() for p in inner[1:-1].split(",")]
        base = Register(parts[0].upper())
        if len(parts) == 1:
            return MemRef((base,))
        offset = parts[1]
        if offset.startswith("#"):
            value = parse_immediate(offset[1:]).value
            if value == 0:
                return MemRef((base,))
            op = "-" if value < 0 else "+"
            return MemRef((base, Constant(abs(value))), (op,))
        sign = "+"
        if offset.startswith("-"):
            sign, offset = "-", offset[1:]
        index = Register(offset.upper())
        if len(parts) > 2:
            shift = parts[2].split()
            if len(shift) == 2 and shift[0].upper() == "LSL":
                scale = 1 << parse_immediate(shift[1].lstrip("#")).value
                return MemRef((base, index, Constant(scale)), (sign, "*"))
            raise OperandError(f"unsupported index shift in {text!r}")
        return MemRef((base, index), (sign,))
    if _REG_RE.match(t):
        return Register(t.upper())
    raise OperandError(f"cannot parse operand {text!r}")


def parse_register_list(text: str) -> list[Register]:
    """``{R4, R5, LR}`` or ``{R4-R6}`` to registers in list order."""
    t = text.strip()
    if not (t.startswith("{") and t.endswith("}")):
        raise OperandError(f"not a register list: {text!r}")
    regs: list[Register] = []
    for item in t[1:-1].split(","):
        item = item.strip().upper()
        if not item:
            continue
        m = re.match(r"^R(\d+)-R(\d+)$", item)
        if m:
            regs.extend(Register(f"R{n}") for n in range(int(m.group(1)), int(m.group(2)) + 1))
        else:
            regs.append(Register(item))
    if not regs:
        raise OperandError("empty register list")
    return regs
