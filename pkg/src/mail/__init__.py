"""
MAIL: the Malware Analysis Intermediate Language.

AST node types, the 21 statement patterns, the library registry, and the
text parser/printer.
"""

from .classify import classified, classify_pattern
from .library import get_library, validate_libcall
from .nodes import (
    FLAG_REGISTERS,
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
    Unknown,
    UnknownStmt,
    is_terminator,
    with_pattern,
)
from .parser import MailSyntaxError, parse_condition, parse_mail, parse_statement
from .patterns import PatternTag, parse_tag
from .printer import emit_mail, format_statement
from .program import FunctionInfo, MailProgram

__all__ = [
    "FLAG_REGISTERS",
    "UNKNOWN",
    "Assignment",
    "BinaryOp",
    "Call",
    "Comparison",
    "Condition",
    "ConditionStmt",
    "Constant",
    "Control",
    "FunctionInfo",
    "FunctionMarker",
    "Halt",
    "Jump",
    "LibCall",
    "Lock",
    "MailProgram",
    "MailStatement",
    "MailSyntaxError",
    "MemRef",
    "PatternTag",
    "Register",
    "StackRef",
    "Test",
    "UnaryOp",
    "Unknown",
    "UnknownStmt",
    "classified",
    "classify_pattern",
    "emit_mail",
    "format_statement",
    "get_library",
    "is_terminator",
    "parse_condition",
    "parse_mail",
    "parse_statement",
    "parse_tag",
    "validate_libcall",
    "with_pattern",
]
