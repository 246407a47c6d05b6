"""
Recursive-descent parser for MAIL text.

Accepts the canonical output of emit_mail plus the looser forms of the
grammar: case-insensitive keywords, decimal literals, "!" for "not", optional
";" after function markers and "--" comments anywhere. A trailing comment of
the form "-- 0x<addr> [name]" after a statement sets its address (and, on a
start marker, the function name).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .classify import classified
from .library import get_library
from .nodes import (
    ARITH_OPERATORS,
    CONNECTIVES,
    LOGIC_OPERATORS,
    REL_OPERATORS,
    UNKNOWN,
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
    UnknownStmt,
)
from .program import FunctionInfo, MailProgram

KEYWORDS = frozenset({"if", "else", "jmp", "call", "halt", "lock", "and", "or", "xor", "not", "unknown"})

_MARKER_RE = re.compile(r"^(start|end)_function_(\d+)$", re.IGNORECASE)
_ADDR_COMMENT_RE = re.compile(r"^(0x[0-9a-fA-F]+)(?:\s+(.*\S))?\s*$")
_NUMBER_RE = re.compile(r"0[xX][0-9a-fA-F]+|\d+")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_OPERATORS = ("==", "!=", "<=", ">=", "<<", ">>", "<", ">", "=", "+", "-", "*", "/", "%", "!",
              "(", ")", "[", "]", ",", ";", ":")


class MailSyntaxError(Exception):
    """Raised for ill-formed MAIL text."""

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        location = f"line {line}, column {column}"
        detail = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{location}: {message}{detail}")
        self.line = line
        self.column = column
        self.expected = expected


# =============================================================================
# Lexer
# =============================================================================

@dataclass(frozen=True)
class Token:
    kind: str  # NUM, IDENT, OP, EOF
    text: str
    line: int
    column: int
    value: int = 0
    hex: bool = True
    width: int = 0

    @property
    def lower(self) -> str:
        return self.text.lower()


def _is_operand_end(tok: Optional[Token]) -> bool:
    if tok is None:
        return False
    if tok.kind == "IDENT":
        return tok.lower not in KEYWORDS or tok.lower == "unknown"
    return tok.kind == "NUM" or tok.text in ("]", ")")


def tokenize(text: str) -> tuple[list[Token], dict[int, str]]:
    """Split text into tokens. Comments are returned separately, keyed by line."""
    tokens: list[Token] = []
    comments: dict[int, str] = {}
    line, col, i, n = 1, 1, 0, len(text)

    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col, i = line + 1, 1, i + 1
            continue
        if ch.isspace():
            i, col = i + 1, col + 1
            continue
        if text.startswith("--", i):
            end = text.find("\n", i)
            end = n if end == -1 else end
            comments.setdefault(line, text[i + 2:end].strip())
            col += end - i
            i = end
            continue

        prev = tokens[-1] if tokens else None
        negative = ch == "-" and i + 1 < n and text[i + 1].isdigit() and not _is_operand_end(prev)
        start = i + 1 if negative else i
        m = _NUMBER_RE.match(text, start) if (negative or ch.isdigit()) else None
        if m:
            raw = m.group(0)
            if raw[:2].lower() == "0x":
                digits = raw[2:]
                value, is_hex = int(digits, 16), True
                width = len(digits) if len(digits) > 1 and digits[0] == "0" else 0
            else:
                value, is_hex, width = int(raw, 10), False, 0
            if negative:
                value = -value
            tokens.append(Token("NUM", text[i:m.end()], line, col, value, is_hex, width))
            col += m.end() - i
            i = m.end()
            continue

        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(Token("IDENT", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue

        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("OP", op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise MailSyntaxError(f"Unexpected character {ch!r}", line, col)

    tokens.append(Token("EOF", "", line, col))
    return tokens, comments


# =============================================================================
# Parser
# =============================================================================

class _Parser:
    def __init__(self, text: str, libcall_as_call: bool = False, lenient_end: bool = False):
        self.tokens, self.comments = tokenize(text)
        self.pos = 0
        self.lenient_end = lenient_end
        self.libcall_as_call = libcall_as_call
        self.library = get_library()

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message: str, expected: tuple[str, ...] = (), tok: Optional[Token] = None) -> MailSyntaxError:
        tok = tok or self.tok
        return MailSyntaxError(message, tok.line, tok.column, expected)

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "OP" and self.tok.text in ops

    def at_keyword(self, *words: str) -> bool:
        return self.tok.kind == "IDENT" and self.tok.lower in words

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            raise self.error(f"Unexpected {self._describe(self.tok)}", (repr(op),))
        return self.advance()

    def terminator(self) -> Token:
        if self.lenient_end and self.tok.kind == "EOF":
            return self.tok
        return self.expect_op(";")

    def expect_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            raise self.error(f"Unexpected {self._describe(self.tok)}", (repr(word),))
        return self.advance()

    @staticmethod
    def _describe(tok: Token) -> str:
        return "end of input" if tok.kind == "EOF" else f"token {tok.text!r}"

    # -- operands ------------------------------------------------------------

    def _is_register_start(self) -> bool:
        return self.tok.kind == "IDENT" and self.tok.lower not in KEYWORDS and not _MARKER_RE.match(self.tok.text)

    def parse_register(self) -> Register:
        if not self._is_register_start():
            raise self.error(f"Unexpected {self._describe(self.tok)}", ("register",))
        name = self.advance().text
        if self.at_op(":") and self.peek().kind == "IDENT":
            self.advance()
            name = f"{name}:{self.advance().text}"
        return Register(name)

    def parse_constant(self) -> Constant:
        tok = self.tok
        if tok.kind != "NUM":
            raise self.error(f"Unexpected {self._describe(tok)}", ("number",))
        self.advance()
        return Constant(tok.value, tok.hex, tok.width)

    def parse_address(self):
        self.expect_op("[")
        if self.tok.kind == "IDENT" and self.tok.lower == "sp" and self.peek().text == "=":
            self.advance()
            self.expect_op("=")
            if not (self.tok.kind == "IDENT" and self.tok.lower == "sp"):
                raise self.error(f"Unexpected {self._describe(self.tok)}", ("'sp'",))
            self.advance()
            if not self.at_op("+", "-"):
                raise self.error(f"Unexpected {self._describe(self.tok)}", ("'+'", "'-'"))
            op = self.advance().text
            offset_tok = self.tok
            offset = self.parse_constant()
            if offset.value <= 0:
                raise self.error("Stack offset must be positive", tok=offset_tok)
            self.expect_op("]")
            return StackRef(op, offset.value)

        terms = [self._parse_address_term()]
        ops: list[str] = []
        while self.at_op(*ARITH_OPERATORS):
            ops.append(self.advance().text)
            terms.append(self._parse_address_term())
        self.expect_op("]")
        return MemRef(tuple(terms), tuple(ops))

    def _parse_address_term(self):
        if self.tok.kind == "NUM":
            return self.parse_constant()
        return self.parse_register()

    def parse_operand(self):
        tok = self.tok
        if tok.kind == "NUM":
            return self.parse_constant()
        if tok.kind == "IDENT" and tok.lower == "unknown":
            self.advance()
            return UNKNOWN
        if self.at_op("["):
            return self.parse_address()
        if self._is_register_start():
            return self.parse_register()
        raise self.error(f"Unexpected {self._describe(tok)}", ("register", "address", "number"))

    def parse_location(self):
        tok = self.tok
        operand = self.parse_operand()
        if isinstance(operand, Constant):
            raise self.error("A constant cannot be assigned to", ("register", "address"), tok=tok)
        return operand

    # -- expressions ---------------------------------------------------------

    def _at_libcall(self) -> bool:
        return self._is_register_start() and self.peek().kind == "OP" and self.peek().text == "("

    def parse_libcall(self) -> LibCall:
        name_tok = self.advance()
        self.expect_op("(")
        args = []
        if not self.at_op(")"):
            args.append(self.parse_operand())
            while self.at_op(","):
                self.advance()
                args.append(self.parse_operand())
        self.expect_op(")")
        fn = self.library.get(name_tok.text)
        if fn is None:
            raise self.error(f"Unknown library function {name_tok.text!r}", tok=name_tok)
        if len(args) not in fn.arities:
            expected = "/".join(str(a) for a in sorted(fn.arities))
            raise self.error(
                f"{name_tok.text}() takes {expected} argument(s), got {len(args)}", tok=name_tok
            )
        return LibCall(name_tok.text, tuple(args))

    def _at_math_operator(self) -> bool:
        return self.at_op(*ARITH_OPERATORS, "<<", ">>") or self.at_keyword("and", "or", "xor")

    def parse_value(self):
        if self._at_libcall():
            return self.parse_libcall()
        if self.at_op("-") or self.at_op("!") or self.at_keyword("not"):
            op = self.advance().text.lower()
            return UnaryOp("-" if op == "-" else "not", self.parse_operand())
        left = self.parse_operand()
        if self._at_math_operator():
            op = self.advance().text.lower()
            return BinaryOp(left, op, self.parse_operand())
        return left

    def parse_comparison(self, left=None) -> Comparison:
        if left is None:
            left = self.parse_operand()
        if not self.at_op(*REL_OPERATORS):
            raise self.error(f"Unexpected {self._describe(self.tok)}", tuple(repr(o) for o in REL_OPERATORS))
        op = self.advance().text
        return Comparison(left, op, self.parse_operand())

    def parse_condition(self, left=None) -> Condition:
        terms = [self.parse_comparison(left)]
        connectives: list[str] = []
        while self.at_keyword(*CONNECTIVES):
            connectives.append(self.advance().lower)
            terms.append(self.parse_comparison())
        return Condition(tuple(terms), tuple(connectives))

    # -- statements ----------------------------------------------------------

    def parse_branch(self):
        if self.at_keyword("jmp"):
            self.advance()
            return Jump(self.parse_operand())
        dest = self.parse_location()
        self.expect_op("=")
        return Assignment(dest, self.parse_value())

    def parse_statement(self) -> tuple[MailStatement, Token]:
        """Parse one statement; returns it with its terminating token."""
        tok = self.tok

        if tok.kind == "IDENT":
            marker = _MARKER_RE.match(tok.text)
            if marker:
                self.advance()
                stmt = FunctionMarker(marker.group(1).lower() == "start", int(marker.group(2)))
                end = self.advance() if self.at_op(";") else tok
                return stmt, end
            word = tok.lower
            if word in ("halt", "lock"):
                self.advance()
                return (Halt() if word == "halt" else Lock()), self.terminator()
            if word == "jmp":
                self.advance()
                return Jump(self.parse_operand()), self.terminator()
            if word == "call":
                self.advance()
                return Call(self.parse_operand()), self.terminator()
            if word == "if":
                return self._parse_control()
            if word == "unknown" and (self.peek().text == ";" or (self.lenient_end and self.peek().kind == "EOF")):
                self.advance()
                return UnknownStmt(), self.terminator()
            if self._at_libcall():
                return self.parse_libcall(), self.terminator()

        left = self.parse_operand()
        if self.at_op("="):
            if isinstance(left, Constant):
                raise self.error("A constant cannot be assigned to", ("register", "address"), tok=tok)
            self.advance()
            return Assignment(left, self.parse_value()), self.terminator()
        if self.at_op(*REL_OPERATORS):
            return ConditionStmt(self.parse_condition(left)), self.terminator()
        if self.at_op("<<", ">>") or self.at_keyword(*LOGIC_OPERATORS):
            op = self.advance().text.lower()
            return Test(left, op, self.parse_operand()), self.terminator()
        raise self.error(
            f"Unexpected {self._describe(self.tok)}",
            ("'='", "relational operator", "logical operator"),
        )

    def _parse_control(self) -> tuple[Control, Token]:
        self.expect_keyword("if")
        self.expect_op("(")
        condition = self.parse_condition()
        self.expect_op(")")
        then = self.parse_branch()
        end = None
        if self.at_op(";"):
            end = self.advance()
        otherwise = None
        if self.at_keyword("else"):
            self.advance()
            otherwise = self.parse_branch()
            end = self.terminator()
        elif end is None and self.lenient_end and self.tok.kind == "EOF":
            end = self.tok
        elif end is None:
            raise self.error(f"Unexpected {self._describe(self.tok)}", ("';'", "'else'"))
        return Control(condition, then, otherwise), end

    # -- program -------------------------------------------------------------

    def _address_comment(self, line: int) -> Optional[tuple[int, str]]:
        comment = self.comments.get(line)
        if not comment:
            return None
        m = _ADDR_COMMENT_RE.match(comment)
        if not m:
            return None
        return int(m.group(1), 16), (m.group(2) or "")

    def parse_program(self) -> MailProgram:
        parsed: list[tuple[Token, MailStatement, Optional[tuple[int, str]]]] = []
        while self.tok.kind != "EOF":
            first = self.tok
            stmt, end = self.parse_statement()
            parsed.append((first, classified(stmt, self.libcall_as_call), self._address_comment(end.line)))

        use_comments = any(note is not None for _, _, note in parsed)
        statements: list[tuple[int, MailStatement]] = []
        functions: list[FunctionInfo] = []
        open_functions: list[tuple[int, str, int]] = []
        seen: set[int] = set()
        addr = 0

        for ordinal, (tok, stmt, note) in enumerate(parsed):
            if use_comments:
                if note is not None:
                    addr = note[0]
            else:
                addr = ordinal
            if isinstance(stmt, FunctionMarker):
                if stmt.start:
                    if stmt.index in seen:
                        raise MailSyntaxError(f"Duplicate start_function_{stmt.index}", tok.line, tok.column)
                    seen.add(stmt.index)
                    open_functions.append((stmt.index, note[1] if note else "", addr))
                else:
                    if not open_functions or open_functions[-1][0] != stmt.index:
                        expected = (f"end_function_{open_functions[-1][0]}",) if open_functions else ()
                        raise MailSyntaxError(
                            f"Unmatched end_function_{stmt.index}", tok.line, tok.column, expected
                        )
                    index, name, start = open_functions.pop()
                    functions.append(FunctionInfo(index, name, start, addr))
            statements.append((addr, stmt))

        if open_functions:
            index = open_functions[-1][0]
            raise MailSyntaxError(
                f"Missing end_function_{index}", self.tok.line, self.tok.column, (f"end_function_{index}",)
            )

        functions.sort(key=lambda f: f.index)
        return MailProgram(tuple(statements), tuple(functions))


# =============================================================================
# Public API
# =============================================================================

def parse_mail(text: str, libcall_as_call: bool = False) -> MailProgram:
    """
    Parse MAIL source text into a program.

    Every statement is pattern-classified. Raises MailSyntaxError with line
    and column on ill-formed input, unknown library functions, wrong library
    arities and unbalanced function markers.
    """
    return _Parser(text, libcall_as_call).parse_program()


def parse_statement(text: str, libcall_as_call: bool = False) -> MailStatement:
    """Parse a single statement; the terminating ';' is optional."""
    p = _Parser(text, libcall_as_call, lenient_end=True)
    stmt, _ = p.parse_statement()
    if p.tok.kind != "EOF":
        raise p.error(f"Unexpected {p._describe(p.tok)} after statement", ("end of input",))
    return classified(stmt, libcall_as_call)


def parse_condition(text: str) -> Condition:
    """Parse a bare condition such as ``ZF == 1 or SF != OF``."""
    p = _Parser(text)
    cond = p.parse_condition()
    if p.tok.kind != "EOF":
        raise p.error(f"Unexpected {p._describe(p.tok)} after condition", ("end of input",))
    return cond
