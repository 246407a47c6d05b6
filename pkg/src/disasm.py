"""
Textual disassembly input.

Line format (one instruction per line)::

    <hex-addr> <hex-bytes> <MNEMONIC> [operand, operand, ...]

``<hex-bytes>`` may be "-" when the machine code is not available. Lines
starting with "#" are comments and a trailing "; ..." is ignored. Functions
are declared with::

    FUNC <name> <hex-start> <hex-end> [ARCH x86|arm]

Instructions whose address lies in no declared function are collected into
one implicit span, placed after the declared ones.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

logger = logging.getLogger(__name__)

PREFIXES = frozenset({"LOCK", "REP", "REPE", "REPZ", "REPNE", "REPNZ"})
IMPLICIT_SPAN = "implicit"

_HEX_RE = re.compile(r"^(?:0x)?([0-9a-fA-F]+):?$")
_BYTES_RE = re.compile(r"^(?:[0-9a-fA-F]{2})+$")
_MNEMONIC_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.]*$")
_SYMBOL_RE = re.compile(r"\s*<[^>]*>")
_OPEN = "[{("
_CLOSE = "]})"


class Arch(str, Enum):
    X86 = "x86"
    ARM = "arm"

    @classmethod
    def parse(cls, text: str) -> "Arch":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"Unknown architecture: {text!r}. Use 'x86' or 'arm'") from None


class DisasmError(Exception):
    """Raised for malformed disassembly input."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class AsmInstruction:
    """One parsed disassembly line."""
    address: int
    bytes: str
    mnemonic: str
    operands: tuple[str, ...] = ()
    arch: Arch = Arch.X86
    prefixes: tuple[str, ...] = ()
    line: int = field(default=0, compare=False)

    @property
    def text(self) -> str:
        head = " ".join((*self.prefixes, self.mnemonic))
        return f"{head} {', '.join(self.operands)}" if self.operands else head


@dataclass(frozen=True)
class FunctionSpan:
    """A function's address range and its instructions in address order."""
    name: str
    start: int
    end: int
    arch: Arch = Arch.X86
    instructions: tuple[AsmInstruction, ...] = ()

    @property
    def implicit(self) -> bool:
        return self.name == IMPLICIT_SPAN


def _parse_hex(token: str, what: str, line: int) -> int:
    m = _HEX_RE.match(token)
    if not m:
        raise DisasmError(f"malformed {what} {token!r}", line)
    return int(m.group(1), 16)


def _strip_comment(text: str) -> str:
    depth = 0
    for i, ch in enumerate(text):
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth -= 1
        elif ch == ";" and depth == 0:
            return text[:i]
    return text


def split_operands(text: str, line: int = 0) -> tuple[str, ...]:
    """Split an operand list at top-level commas."""
    text = _SYMBOL_RE.sub("", text).strip()
    if not text:
        return ()
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in text:
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth -= 1
            if depth < 0:
                raise DisasmError(f"unbalanced {ch!r} in operands {text!r}", line)
        if ch == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise DisasmError(f"unclosed bracket in operands {text!r}", line)
    parts.append("".join(current).strip())
    if any(not p for p in parts):
        raise DisasmError(f"empty operand in {text!r}", line)
    return tuple(parts)


@dataclass
class _FuncDecl:
    name: str
    start: int
    end: int
    arch: Optional[Arch]
    line: int
    instructions: list[AsmInstruction] = field(default_factory=list)


def _parse_func_line(parts: list[str], line: int) -> _FuncDecl:
    if len(parts) not in (4, 6):
        raise DisasmError("FUNC line must be 'FUNC <name> <start> <end> [ARCH <arch>]'", line)
    arch = None
    if len(parts) == 6:
        if parts[4].upper() != "ARCH":
            raise DisasmError(f"expected ARCH, got {parts[4]!r}", line)
        try:
            arch = Arch.parse(parts[5])
        except ValueError as e:
            raise DisasmError(str(e), line) from None
    start = _parse_hex(parts[2], "function start", line)
    end = _parse_hex(parts[3], "function end", line)
    if end < start:
        raise DisasmError(f"function {parts[1]} ends before it starts", line)
    return _FuncDecl(parts[1], start, end, arch, line)


def parse_disasm(text: str, arch: Arch | str = Arch.X86) -> list[FunctionSpan]:
    """
    Parse a disassembly listing into function spans.

    Args:
        text: The listing.
        arch: Architecture for instructions whose FUNC line has no ARCH
            annotation (and for the implicit span).

    Returns:
        Declared spans in declaration order, then the implicit span if any
        instruction fell outside every declared function.

    Raises:
        DisasmError: malformed lines, duplicate addresses, overlapping
            functions; the message carries the line number.
    """
    default_arch = Arch.parse(arch) if isinstance(arch, str) else arch
    funcs: list[_FuncDecl] = []
    pending: list[tuple[int, str, str, str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        body = _strip_comment(stripped).strip()
        if not body:
            continue
        parts = body.split()
        if parts[0].upper() == "FUNC":
            funcs.append(_parse_func_line(parts, lineno))
            continue
        if len(parts) < 3:
            raise DisasmError(f"expected '<addr> <bytes> <mnemonic> [operands]', got {body!r}", lineno)
        address = _parse_hex(parts[0], "address", lineno)
        code = parts[1]
        if code == "-":
            code = ""
        elif not _BYTES_RE.match(code):
            raise DisasmError(f"malformed byte string {code!r}", lineno)
        rest = body.split(None, 2)[2]
        pending.append((address, code.lower(), rest, raw, lineno))

    ordered = sorted(funcs, key=lambda f: f.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start <= a.end:
            raise DisasmError(f"function {b.name} overlaps function {a.name}", b.line)

    seen: dict[int, int] = {}
    implicit: list[AsmInstruction] = []
    for address, code, rest, _raw, lineno in pending:
        if address in seen:
            raise DisasmError(f"duplicate address 0x{address:x} (first seen on line {seen[address]})", lineno)
        seen[address] = lineno
        owner = next((f for f in funcs if f.start <= address <= f.end), None)
        insn_arch = owner.arch if owner is not None and owner.arch is not None else default_arch
        insn = _parse_instruction(address, code, rest, insn_arch, lineno)
        if owner is None:
            implicit.append(insn)
        else:
            owner.instructions.append(insn)

    spans = [
        FunctionSpan(
            f.name, f.start, f.end, f.arch or default_arch,
            tuple(sorted(f.instructions, key=lambda i: i.address)),
        )
        for f in funcs
    ]
    if implicit:
        implicit.sort(key=lambda i: i.address)
        logger.debug(f"{len(implicit)} instruction(s) outside declared functions")
        spans.append(FunctionSpan(
            IMPLICIT_SPAN, implicit[0].address, implicit[-1].address, default_arch, tuple(implicit),
        ))
    return spans


def _parse_instruction(address: int, code: str, rest: str, arch: Arch, lineno: int) -> AsmInstruction:
    words = rest.split(None, 1)
    prefixes: list[str] = []
    while words and words[0].upper() in PREFIXES and len(words) == 2:
        prefixes.append(words[0].upper())
        words = words[1].split(None, 1)
    mnemonic = words[0]
    if not _MNEMONIC_RE.match(mnemonic):
        raise DisasmError(f"malformed mnemonic {mnemonic!r}", lineno)
    operands = split_operands(words[1], lineno) if len(words) > 1 else ()
    return AsmInstruction(
        address=address,
        bytes=code,
        mnemonic=mnemonic.upper(),
        operands=operands,
        arch=arch,
        prefixes=tuple(prefixes),
        line=lineno,
    )
