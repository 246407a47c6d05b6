"""
Tests for the MAIL language core: parser, printer, pattern classifier,
library registry and program validation.
"""

import random

import pytest

from src.mail import (
    UNKNOWN,
    Assignment,
    BinaryOp,
    Call,
    Comparison,
    Condition,
    ConditionStmt,
    Constant,
    Control,
    FunctionInfo,
    FunctionMarker,
    Halt,
    Jump,
    LibCall,
    Lock,
    MailProgram,
    MailSyntaxError,
    MemRef,
    PatternTag,
    Register,
    StackRef,
    Test,
    UnaryOp,
    UnknownStmt,
    classify_pattern,
    emit_mail,
    format_statement,
    get_library,
    parse_mail,
    parse_statement,
    parse_tag,
    validate_libcall,
)
from src.validation import MailValidationError, validate_program, validate_program_or_raise


EAX, EBX, ECX = Register("EAX"), Register("EBX"), Register("ECX")
ZF = Register("ZF")


class TestParser:
    """Tests for parse_mail and parse_statement."""

    def test_parse_assignment(self):
        """Test that a binary assignment parses into its parts."""
        program = parse_mail("EAX = EAX + ECX;")
        assert len(program) == 1
        _, stmt = program.statements[0]
        assert stmt == Assignment(EAX, BinaryOp(EAX, "+", ECX))
        assert stmt.pattern == PatternTag.ASSIGN

    def test_parse_empty(self):
        """Test that empty input is a program with no statements."""
        program = parse_mail("")
        assert program == MailProgram()
        assert len(program) == 0

    def test_parse_control(self):
        """Test that a conditional jump parses into a control statement."""
        stmt = parse_statement("if (ZF == 1) jmp 0x401267;")
        assert isinstance(stmt, Control)
        assert stmt.condition == Condition((Comparison(ZF, "==", Constant(1, hex=False)),))
        assert stmt.jump == Jump(Constant(0x401267))
        assert stmt.otherwise is None

    def test_parse_control_with_else(self):
        """Test that both branches of a predicated assignment are kept."""
        stmt = parse_statement("if (ZF == 0x0 and SF == OF) AL = 0x1; else AL = 0x0;")
        assert stmt.then == Assignment(Register("AL"), Constant(1))
        assert stmt.otherwise == Assignment(Register("AL"), Constant(0))
        assert stmt.condition.connectives == ("and",)

    def test_parse_stack_expression(self):
        """Test that [SP=SP-k] is a stack reference, not a memory reference."""
        stmt = parse_statement("EAX = [SP=SP-0x1];")
        assert stmt.value == StackRef("-", 1)

    def test_parse_memory_reference(self):
        """Test that a bracketed address keeps its terms and operators."""
        stmt = parse_statement("EAX = [RBP-0x44];")
        assert stmt.value == MemRef((Register("RBP"), Constant(0x44)), ("-",))

    def test_parse_negative_constant(self):
        """Test that a minus sign directly before a number after an operator is part of the number."""
        stmt = parse_statement("EAX = EAX + -0x1;")
        assert stmt.value == BinaryOp(EAX, "+", Constant(-1))

    def test_parse_case_insensitive_keywords(self):
        """Test that keywords are accepted in upper case."""
        assert isinstance(parse_statement("HALT;"), Halt)
        assert parse_statement("CALL EBX;") == Call(EBX)
        assert parse_statement("JMP 0x680376") == Jump(Constant(0x680376))

    def test_parse_comments(self):
        """Test that '--' comments are ignored."""
        program = parse_mail("-- header\nEAX = 0x0; -- trailing\nhalt;\n")
        assert [type(s) for _, s in program] == [Assignment, Halt]

    def test_parse_function_markers(self):
        """Test that markers delimit functions and address comments set names."""
        text = (
            "start_function_0; -- 0x10 main\n"
            "EAX = 0x0; -- 0x10\n"
            "jmp [SP=SP-0x8]; -- 0x14\n"
            "end_function_0; -- 0x14\n"
        )
        program = parse_mail(text)
        assert program.functions == (FunctionInfo(0, "main", 0x10, 0x14),)
        assert [a for a, _ in program] == [0x10, 0x10, 0x14, 0x14]
        assert len(program.body(0)) == 2

    def test_unknown_library_function(self):
        """Test that an unknown library function is a syntax error with a position."""
        with pytest.raises(MailSyntaxError) as exc_info:
            parse_mail("EAX = EAX + 0x1;\nfrobnicate(EAX);")
        assert exc_info.value.line == 2
        assert exc_info.value.column == 1
        assert "frobnicate" in str(exc_info.value)

    def test_wrong_arity(self):
        """Test that a library call with the wrong argument count is rejected."""
        with pytest.raises(MailSyntaxError, match="compare"):
            parse_mail("compare(EAX);")

    def test_missing_semicolon(self):
        """Test that a missing terminator reports the expected token."""
        with pytest.raises(MailSyntaxError) as exc_info:
            parse_mail("EAX = 0x1\nhalt;")
        assert "';'" in exc_info.value.expected

    def test_unbalanced_markers(self):
        """Test that an end marker without its start is rejected."""
        with pytest.raises(MailSyntaxError, match="end_function_1"):
            parse_mail("start_function_0;\nend_function_1;")

    def test_missing_end_marker(self):
        """Test that an unclosed function is rejected."""
        with pytest.raises(MailSyntaxError, match="Missing end_function_0"):
            parse_mail("start_function_0;\nhalt;")

    def test_constant_cannot_be_assigned(self):
        """Test that a constant destination is rejected."""
        with pytest.raises(MailSyntaxError, match="constant cannot be assigned"):
            parse_statement("0x1 = EAX;")

    def test_unexpected_character(self):
        """Test that stray characters are reported with their column."""
        with pytest.raises(MailSyntaxError) as exc_info:
            parse_mail("EAX = @;")
        assert exc_info.value.column == 7


class TestPrinter:
    """Tests for canonical MAIL rendering."""

    def test_assignment_keeps_constant_width(self):
        """Test that a zero-padded literal prints as written."""
        stmt = Assignment(EAX, BinaryOp(EAX, "+", Constant(1, width=2)))
        assert format_statement(stmt) == "EAX = EAX + 0x01;"

    def test_halt(self):
        """Test the keyword statements."""
        assert format_statement(Halt()) == "halt;"
        assert format_statement(Lock()) == "lock;"
        assert format_statement(UnknownStmt("FOO")) == "UNKNOWN;"

    def test_libcall(self):
        """Test a standalone library call."""
        assert format_statement(LibCall("compare", (EAX, Constant(0)))) == "compare(EAX, 0x0);"

    def test_control_with_else(self):
        """Test a control statement with both branches."""
        cond = Condition((Comparison(ZF, "==", Constant(1)),))
        stmt = Control(cond, Assignment(EAX, Constant(1)), Assignment(EAX, Constant(0)))
        assert format_statement(stmt) == "if (ZF == 0x1) EAX = 0x1; else EAX = 0x0;"

    def test_stack_and_negative(self):
        """Test stack references and negative constants."""
        assert format_statement(Assignment(StackRef("+", 1), Register("RBP"))) == "[SP=SP+0x1] = RBP;"
        assert format_statement(Assignment(EAX, BinaryOp(EAX, "+", Constant(-1)))) == "EAX = EAX + -0x1;"

    def test_emit_with_addresses(self):
        """Test that address comments and function names are emitted."""
        program = MailProgram(
            statements=(
                (0x10, FunctionMarker(True, 0)),
                (0x10, Halt()),
                (0x10, FunctionMarker(False, 0)),
            ),
            functions=(FunctionInfo(0, "entry", 0x10, 0x10),),
        )
        text = emit_mail(program, addresses=True)
        assert text.splitlines() == [
            "start_function_0; -- 0x10 entry",
            "halt; -- 0x10",
            "end_function_0; -- 0x10",
        ]
        assert parse_mail(text) == program

    def test_emit_empty(self):
        """Test that an empty program renders as the empty string."""
        assert emit_mail(MailProgram()) == ""


class TestPatterns:
    """Tests for the pattern classifier."""

    @pytest.mark.parametrize("text,tag", [
        ("EAX = EAX + ECX;", PatternTag.ASSIGN),
        ("EAX = EAX + 0x01;", PatternTag.ASSIGN_CONSTANT),
        ("if (ZF == 1) JMP [EAX+ECX+0x10];", PatternTag.CONTROL),
        ("if (ZF == 1) JMP 0x400567;", PatternTag.CONTROL_CONSTANT),
        ("CALL EBX;", PatternTag.CALL),
        ("CALL 0x603248;", PatternTag.CALL_CONSTANT),
        ("CF = 1;", PatternTag.FLAG),
        ("EFLAGS = [SP=SP-0x1];", PatternTag.FLAG_STACK),
        ("HALT;", PatternTag.HALT),
        ("JMP [EAX+ECX+0x10];", PatternTag.JUMP),
        ("JMP 0x680376", PatternTag.JUMP_CONSTANT),
        ("JMP [SP=SP-0x8]", PatternTag.JUMP_STACK),
        ("compare(EAX, ECX);", PatternTag.LIBCALL),
        ("compare(EAX, 0x10);", PatternTag.LIBCALL_CONSTANT),
        ("lock;", PatternTag.LOCK),
        ("EAX = [SP=SP-0x1];", PatternTag.STACK),
        ("[SP=SP+0x1] = 0x432516;", PatternTag.STACK_CONSTANT),
        ("EAX and ECX;", PatternTag.TEST),
        ("EAX and 0x10;", PatternTag.TEST_CONSTANT),
        ("UNKNOWN;", PatternTag.UNKNOWN),
    ])
    def test_documented_examples(self, text, tag):
        """Test that every documented example statement gets its tag."""
        assert parse_statement(text).pattern == tag

    def test_decrement_compare_branch_triple(self):
        """Test the decrement / compare / branch sequence of a counted loop."""
        lines = ["EAX = EAX + -0x1;", "compare(EAX, 0x0);", "if (ZF == 1) jmp 0x401267;"]
        assert [parse_statement(s).pattern for s in lines] == [
            PatternTag.ASSIGN_CONSTANT, PatternTag.LIBCALL_CONSTANT, PatternTag.CONTROL_CONSTANT,
        ]
        compat = [parse_statement(s, libcall_as_call=True).pattern for s in lines]
        assert compat == [PatternTag.ASSIGN_CONSTANT, PatternTag.CALL_CONSTANT, PatternTag.CONTROL_CONSTANT]

    def test_memory_displacement_is_not_a_constant(self):
        """Test that a displacement inside a memory reference does not make a *_CONSTANT tag."""
        assert parse_statement("EAX = [RBP-0x44];").pattern == PatternTag.ASSIGN

    def test_condition_statement_is_notdefined(self):
        """Test that a bare condition has no pattern of its own."""
        assert parse_statement("EAX == 0x1;").pattern == PatternTag.NOTDEFINED
        assert classify_pattern(ConditionStmt(Condition((Comparison(EAX, "==", ECX),)))) == PatternTag.NOTDEFINED

    def test_predicated_assignment(self):
        """Test that a control without a jump is tagged by its assignment operands."""
        stmt = parse_statement("if (ZF == 0x1) AL = 0x1; else AL = 0x0;")
        assert stmt.pattern == PatternTag.CONTROL_CONSTANT
        stmt = parse_statement("if (ZF == 0x1) AL = BL;")
        assert stmt.pattern == PatternTag.CONTROL

    def test_new_statements_are_notdefined(self):
        """Test that a constructed statement starts out NOTDEFINED."""
        assert Assignment(EAX, ECX).pattern == PatternTag.NOTDEFINED

    def test_pattern_excluded_from_equality(self):
        """Test that classified and unclassified statements compare equal."""
        assert parse_statement("EAX = ECX;") == Assignment(EAX, ECX)

    def test_twenty_one_tags(self):
        """Test the size of the tag set and tag lookup."""
        assert len(PatternTag) == 21
        assert parse_tag("libcall_constant") == PatternTag.LIBCALL_CONSTANT
        with pytest.raises(ValueError):
            parse_tag("BOGUS")


class TestLibrary:
    """Tests for the library registry."""

    def test_validate_libcall(self):
        """Test arity checks, including both forms of swap."""
        assert validate_libcall("compare", 2)
        assert validate_libcall("swap", 1)
        assert validate_libcall("swap", 2)
        assert not validate_libcall("swap", 3)
        assert not validate_libcall("frobnicate", 1)

    def test_registry_contents(self):
        """Test that every documented library function is registered."""
        expected = {
            "abs", "aes", "allocate", "atan", "avg", "bit", "clear", "compare", "complement",
            "convert", "copy", "cos", "count", "len", "load", "log", "max", "min", "rev", "round", "scanf",
            "scanr", "set", "sin", "sqrt", "store", "substr", "swap", "tan",
        }
        library = get_library()
        assert set(library.names) == expected
        assert library.row_count == 30


# =============================================================================
# Round trip
# =============================================================================

_REGISTERS = ["EAX", "EBX", "ECX", "EDX", "RSP", "RBP", "R8D", "gr_0", "gr_1", "ZF", "CF", "EFLAGS", "AL"]
_LIBCALLS = [(fn.name, arity) for fn in get_library().functions.values() for arity in sorted(fn.arities)]


class _ProgramGenerator:
    """Random well-formed MAIL programs."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def register(self):
        return Register(self.rng.choice(_REGISTERS))

    def constant(self):
        value = self.rng.choice([0, 1, 0x10, 0x401267, -1, -0x44, self.rng.randint(0, 0xFFFF)])
        is_hex = self.rng.random() < 0.8
        return Constant(value, is_hex, 2 if is_hex and 0 < value < 0x10 and self.rng.random() < 0.3 else 0)

    def memref(self):
        terms = [self.register() if self.rng.random() < 0.6 else Constant(self.rng.choice([0x4, 0x10, -0x4, -0x44]))
                 for _ in range(self.rng.randint(1, 3))]
        ops = [self.rng.choice(["+", "-", "*"]) for _ in terms[1:]]
        return MemRef(tuple(terms), tuple(ops))

    def stackref(self):
        return StackRef(self.rng.choice("+-"), self.rng.choice([1, 8, 0x10]))

    def operand(self):
        kind = self.rng.random()
        if kind < 0.4:
            return self.register()
        if kind < 0.65:
            return self.constant()
        if kind < 0.85:
            return self.memref()
        if kind < 0.95:
            return self.stackref()
        return UNKNOWN

    def location(self):
        kind = self.rng.random()
        if kind < 0.6:
            return self.register()
        if kind < 0.85:
            return self.memref()
        if kind < 0.97:
            return self.stackref()
        return UNKNOWN

    def libcall(self):
        name, arity = self.rng.choice(_LIBCALLS)
        return LibCall(name, tuple(self.operand() for _ in range(arity)))

    def value(self):
        kind = self.rng.random()
        if kind < 0.35:
            return self.operand()
        if kind < 0.75:
            op = self.rng.choice(["+", "-", "*", "/", "%", "and", "or", "xor", "<<", ">>"])
            return BinaryOp(self.operand(), op, self.operand())
        if kind < 0.85:
            return UnaryOp(self.rng.choice(["-", "not"]), self.operand())
        return self.libcall()

    def condition(self):
        terms = tuple(
            Comparison(self.operand(), self.rng.choice(["==", "!=", "<=", ">=", "<", ">"]), self.operand())
            for _ in range(self.rng.randint(1, 3))
        )
        return Condition(terms, tuple(self.rng.choice(["and", "or"]) for _ in terms[1:]))

    def branch(self):
        if self.rng.random() < 0.5:
            return Jump(self.operand())
        return Assignment(self.location(), self.value())

    def statement(self):
        kind = self.rng.randrange(10)
        if kind <= 2:
            return Assignment(self.location(), self.value())
        if kind == 3:
            otherwise = self.branch() if self.rng.random() < 0.4 else None
            return Control(self.condition(), self.branch(), otherwise)
        if kind == 4:
            return Jump(self.operand())
        if kind == 5:
            return Call(self.operand())
        if kind == 6:
            return self.libcall()
        if kind == 7:
            op = self.rng.choice(["and", "or", "xor", "<<", ">>"])
            return Test(self.operand(), op, self.operand())
        if kind == 8:
            return ConditionStmt(self.condition())
        return self.rng.choice([Halt(), Lock(), UnknownStmt()])

    def program(self) -> MailProgram:
        statements = []
        functions = []
        addr = self.rng.randrange(0x1000)
        for index in range(self.rng.randint(0, 3)):
            start = addr
            statements.append((addr, FunctionMarker(True, index)))
            for _ in range(self.rng.randint(0, 8)):
                addr += self.rng.randint(0, 6)
                statements.append((addr, self.statement()))
            statements.append((addr, FunctionMarker(False, index)))
            functions.append(FunctionInfo(index, f"fn_{index}", start, addr))
            addr += 1
        for _ in range(self.rng.randint(0, 3)):
            addr += 1
            statements.append((addr, self.statement()))
        return MailProgram(tuple(statements), tuple(functions))


class TestRoundTrip:
    """Tests that emitted MAIL parses back to the same program."""

    def test_random_programs(self):
        """Test parse(emit(p)) == p on 1000 random programs."""
        generator = _ProgramGenerator(seed=7)
        for _ in range(1000):
            program = generator.program()
            text = emit_mail(program, addresses=True)
            assert parse_mail(text) == program, text

    def test_subtracted_negative_displacement(self):
        """Test that "- -0x4" inside a memory reference is not read as a comment."""
        program = parse_mail("EAX = [EBX - -4];\n")
        text = emit_mail(program)
        assert text == "EAX = [EBX- -4];\n"
        assert parse_mail(text) == program

        built = MailProgram(((0, Assignment(EAX, MemRef((Register("EBX"), Constant(-4)), ("-",)))),))
        assert emit_mail(built) == "EAX = [EBX- -0x4];\n"
        assert parse_mail(emit_mail(built)) == built

    def test_emit_is_canonical(self):
        """Test that emitting a parsed program reproduces the text."""
        generator = _ProgramGenerator(seed=11)
        for _ in range(100):
            text = emit_mail(generator.program(), addresses=True)
            assert emit_mail(parse_mail(text), addresses=True) == text

    def test_without_addresses(self):
        """Test that without address comments statements are numbered in order."""
        program = parse_mail("EAX = 0x0;\nhalt;\n")
        assert [a for a, _ in program] == [0, 1]
        assert parse_mail(emit_mail(program)) == program


class TestValidation:
    """Tests for program well-formedness checks."""

    def _program(self, *statements, functions=()):
        return MailProgram(tuple(statements), tuple(functions))

    def test_valid_program(self):
        """Test that a parsed program validates cleanly."""
        program = parse_mail("start_function_0; -- 0x0 f\nEAX = 0x1; -- 0x4\nend_function_0; -- 0x8\n")
        result = validate_program(program)
        assert result.is_valid
        assert result.error_message == ""

    def test_decreasing_addresses(self):
        """Test that addresses going backwards inside a function are reported."""
        program = self._program(
            (0x10, FunctionMarker(True, 0)),
            (0x14, Halt()),
            (0x12, Halt()),
            (0x14, FunctionMarker(False, 0)),
            functions=(FunctionInfo(0, "f", 0x10, 0x14),),
        )
        result = validate_program(program)
        assert not result.is_valid
        assert any("precedes" in e for e in result.errors)

    def test_bad_libcall_arity(self):
        """Test that library calls built in code are checked against the registry."""
        program = self._program((0, Assignment(EAX, LibCall("compare", (EAX,)))))
        result = validate_program(program)
        assert not result.is_valid
        assert "compare" in result.error_message

    def test_statements_outside_functions_warn(self):
        """Test that loose statements are a warning, not an error."""
        result = validate_program(self._program((0, Halt())))
        assert result.is_valid
        assert result.warnings

    def test_unmatched_marker_raises(self):
        """Test that validate_program_or_raise raises on marker errors."""
        program = self._program((0, FunctionMarker(True, 0)))
        with pytest.raises(MailValidationError) as exc_info:
            validate_program_or_raise(program)
        assert any("missing end_function_0" in e for e in exc_info.value.errors)
