"""
Tests for the x86 and ARM lifters.
"""

from unittest.mock import patch

import pytest

from src.disasm import Arch, FunctionSpan, parse_disasm
from src.lifters import LiftContext, create_lifter, get_supported_archs, lift_program
from src.lifters import x86 as x86_lifter
from src.mail import FunctionMarker, PatternTag, emit_mail, format_statement


def lift(line: str, arch: str = "x86", libcall_as_call: bool = False) -> list[str]:
    """Lift one listing line and render each resulting statement."""
    insn = parse_disasm(line, arch)[0].instructions[0]
    result = create_lifter(arch, libcall_as_call).lift_instruction(insn)
    return [format_statement(s) for s in result.statements]


def lift_tags(line: str, arch: str = "x86", libcall_as_call: bool = False) -> list[PatternTag]:
    insn = parse_disasm(line, arch)[0].instructions[0]
    result = create_lifter(arch, libcall_as_call).lift_instruction(insn)
    return [s.pattern for s in result.statements]


class TestFactory:
    """Tests for the lifter factory."""

    def test_supported_archs(self):
        assert get_supported_archs() == ["x86", "arm"]

    def test_unknown_arch(self):
        """Test that an unknown architecture raises ValueError."""
        with pytest.raises(ValueError, match="Unknown architecture"):
            create_lifter("mips")

    def test_wrong_arch_instruction(self):
        """Test that a lifter refuses another architecture's instruction."""
        insn = parse_disasm("8000 - MOV R0, R1", "arm")[0].instructions[0]
        with pytest.raises(ValueError, match="cannot lift arm"):
            create_lifter("x86").lift_instruction(insn)


class TestX86:
    """Tests for x86 instruction lifting."""

    @pytest.mark.parametrize("line,expected", [
        ("4010a2 - MOV EAX, [RBP-0x44]", ["EAX = [RBP-0x44];"]),
        ("401000 - MOV DWORD PTR [RBP-0x18], 0x0", ["[RBP-0x18] = 0x0;"]),
        ("401000 - SUB EAX, [RBP-0x18]", ["EAX = EAX - [RBP-0x18];"]),
        ("401000 - XOR EAX, EAX", ["EAX = 0x0;"]),
        ("401000 - ADD ECX, 0x0", ["ECX = ECX;"]),
        ("401000 - INC ECX", ["ECX = ECX + 0x1;"]),
        ("401000 - DEC EAX", ["EAX = EAX + -0x1;"]),
        ("401000 - SHL EAX", ["EAX = EAX << 0x1;"]),
        ("401000 - NEG EDX", ["EDX = - EDX;"]),
        ("401000 - LEA EAX, [RDX+RAX]", ["EAX = RDX + RAX;"]),
        ("401000 - CMP EAX, 0x0", ["compare(EAX, 0x0);"]),
        ("401000 - TEST AL, AL", ["AL and AL;"]),
        ("401000 - JZ 0x401267", ["if (ZF == 1) jmp 0x401267;"]),
        ("401000 - JLE 0x401267", ["if (ZF == 1 or SF != OF) jmp 0x401267;"]),
        ("401000 - JMP 0x4011b5", ["jmp 0x4011b5;"]),
        ("401000 - JMP RAX", ["jmp UNKNOWN;"]),
        ("401000 - CALL 0x400a9c", ["call 0x400a9c;"]),
        ("401000 - RET", ["jmp [SP=SP-0x8];"]),
        ("401000 - PUSH RBP", ["[SP=SP+0x1] = RBP;"]),
        ("401000 - POP RBP", ["RBP = [SP=SP-0x1];"]),
        ("401000 - CDQE", ["RAX = convert(EAX);"]),
        ("401000 - MOVSXD RDX, EAX", ["RDX = convert(EAX);"]),
        ("401000 - CLD", ["DF = 0x0;"]),
        ("401000 - HLT", ["halt;"]),
        ("401000 - SETG AL", ["if (ZF == 0 and SF == OF) AL = 0x1; else AL = 0x0;"]),
    ])
    def test_lifting(self, line, expected):
        """Test instruction to MAIL text."""
        assert lift(line) == expected

    @pytest.mark.parametrize("line,expected", [
        ("401000 - SUB EAX, [RBP-0x18]", [PatternTag.ASSIGN]),
        ("401000 - XOR EAX, EAX", [PatternTag.ASSIGN_CONSTANT]),
        ("401000 - CMP EAX, 0x0", [PatternTag.LIBCALL_CONSTANT]),
        ("401000 - JZ 0x401267", [PatternTag.CONTROL_CONSTANT]),
        ("401000 - RET", [PatternTag.JUMP_STACK]),
        ("401000 - PUSH RBP", [PatternTag.STACK]),
        ("401000 - PUSHFQ", [PatternTag.FLAG_STACK]),
        ("401000 - CALL 0x400a9c", [PatternTag.CALL_CONSTANT]),
        ("401000 - CALL RAX", [PatternTag.CALL]),
        ("401000 - TEST AL, AL", [PatternTag.TEST]),
        ("401000 - CLD", [PatternTag.FLAG]),
        ("401000 - SETG AL", [PatternTag.CONTROL_CONSTANT]),
    ])
    def test_patterns(self, line, expected):
        """Test that lifted statements come out classified."""
        assert lift_tags(line) == expected

    def test_xchg_uses_temporary(self):
        """Test that XCHG swaps through a gr_N temporary."""
        assert lift("401000 - XCHG EAX, EBX") == ["gr_0 = EAX;", "EAX = EBX;", "EBX = gr_0;"]

    def test_xchg_same_register(self):
        """Test that exchanging a register with itself lifts to nothing."""
        assert lift("401000 - XCHG AX, AX") == []

    def test_temporaries_numbered_per_context(self):
        """Test that temporaries count up within one context."""
        lifter = create_lifter("x86")
        spans = parse_disasm("401000 - XCHG EAX, EBX\n401002 - XCHG ECX, EDX\n")
        ctx = LiftContext()
        first, second = (lifter.lift_instruction(i, ctx) for i in spans[0].instructions)
        assert format_statement(first.statements[0]) == "gr_0 = EAX;"
        assert format_statement(second.statements[0]) == "gr_1 = ECX;"

    def test_decrement_compare_branch(self):
        """Test the decrement, compare and branch triple and its tags."""
        listing = "401000 - DEC EAX\n401002 - CMP EAX, 0x0\n401005 - JZ 0x401267\n"
        program = lift_program(parse_disasm(listing))
        body = [s for _, s in program.body(0)]
        assert [s.pattern for s in body] == [
            PatternTag.ASSIGN_CONSTANT, PatternTag.LIBCALL_CONSTANT, PatternTag.CONTROL_CONSTANT,
        ]
        compat = lift_program(parse_disasm(listing), libcall_as_call=True)
        assert [s.pattern for _, s in compat.body(0)][1] == PatternTag.CALL_CONSTANT

    def test_lock_prefix(self):
        """Test that a LOCK prefix becomes its own statement."""
        assert lift("401000 - LOCK ADD [RAX], EBX") == ["lock;", "[RAX] = [RAX] + EBX;"]
        assert lift_tags("401000 - LOCK ADD [RAX], EBX")[0] == PatternTag.LOCK

    @pytest.mark.parametrize("line,expected", [
        ("401000 - MOVSB", "copy([RDI], [RSI]);"),
        ("401000 - REP MOVSB", "copy([RDI], [RSI]);"),
        ("401000 - MOVSD", "copy([RDI], [RSI]);"),
        ("401000 - LODSB", "load(AL, [RSI]);"),
        ("401000 - REP LODSQ", "load(RAX, [RSI]);"),
        ("401000 - STOSD", "store([RDI], EAX);"),
        ("401000 - REP STOSD", "store([RDI], EAX);"),
        ("401000 - SCASB", "compare(AL, [RDI]);"),
        ("401000 - REPNE SCASB", "compare(AL, [RDI]);"),
        ("401000 - CMPSB", "compare([RSI], [RDI]);"),
        ("401000 - REPE CMPSB", "compare([RSI], [RDI]);"),
    ])
    def test_string_instructions(self, line, expected):
        """Test that string instructions lift to one library call, with or without REP."""
        assert lift(line) == [expected]
        assert lift_tags(line) == [PatternTag.LIBCALL]

    def test_sse_movsd_is_a_move(self):
        assert lift("401000 - MOVSD XMM0, [RAX]") == ["XMM0 = [RAX];"]

    @pytest.mark.parametrize("line", [
        "401000 - NOP",
        "401000 - LEAVE",
        "401000 - CPUID",
        "401000 - INT 3",
        "401000 - ENDBR64",
    ])
    def test_ignored(self, line):
        """Test that instructions without MAIL meaning lift to nothing."""
        insn = parse_disasm(line)[0].instructions[0]
        result = create_lifter("x86").lift_instruction(insn)
        assert result.ignored
        assert not result.unknown

    @pytest.mark.parametrize("line", [
        "401000 - FOOBAR EAX",
        "401000 - MOV EAX",
        "401000 - MOV EAX, ???",
        "401000 - MOV EAX, 0123",
    ])
    def test_unknown(self, line):
        """Test that unsupported or malformed instructions become UNKNOWN."""
        insn = parse_disasm(line)[0].instructions[0]
        result = create_lifter("x86").lift_instruction(insn)
        assert result.unknown
        assert [format_statement(s) for s in result.statements] == ["UNKNOWN;"]
        assert result.statements[0].pattern == PatternTag.UNKNOWN

    def test_handler_errors_propagate(self):
        """Test that a ValueError raised inside a handler is not turned into UNKNOWN."""
        def broken(self, insn, ops, arg, code, ctx):
            raise ValueError("handler bug")

        insn = parse_disasm("401000 - MOV EAX, EBX")[0].instructions[0]
        with patch.dict(x86_lifter._HANDLERS, {"move": broken}):
            with pytest.raises(ValueError, match="handler bug"):
                create_lifter("x86").lift_instruction(insn)


class TestArm:
    """Tests for ARM instruction lifting."""

    @pytest.mark.parametrize("line,expected", [
        ("8000 - CMP R0, R1", ["compare(R0, R1);"]),
        ("8000 - MOV R0, #0x1", ["R0 = 0x1;"]),
        ("8000 - MOVLE R0, #0x1", ["if (ZF == 1 or SF != OF) R0 = 0x1;"]),
        ("8000 - B 0x8000", ["jmp 0x8000;"]),
        ("8000 - BNE 0x10034", ["if (ZF == 0) jmp 0x10034;"]),
        ("8000 - BL 0x10400", ["call 0x10400;"]),
        ("8000 - BX LR", ["jmp UNKNOWN;"]),
        ("8000 - ADDS R0, R0, #1", ["R0 = R0 + 0x1;"]),
        ("8000 - SUB SP, SP, #0x10", ["SP = SP - 0x10;"]),
        ("8000 - LDR R2, [R7, R3, LSL #2]", ["R2 = [R7+R3*0x4];"]),
        ("8000 - STR R3, [R11, #-24]", ["[R11-0x18] = R3;"]),
        ("8000 - LDR R0, [R1]", ["R0 = [R1];"]),
        ("8000 - PUSH {R4, LR}", ["[SP=SP+0x1] = R4;", "[SP=SP+0x1] = LR;"]),
        ("8000 - POP {R4, PC}", ["R4 = [SP=SP-0x1];", "jmp [SP=SP-0x8];"]),
        ("8000 - ADD R1, R2, R6, LSL #1", ["gr_0 = R6 << 0x1;", "R1 = R2 + gr_0;"]),
    ])
    def test_lifting(self, line, expected):
        """Test ARM instruction to MAIL text."""
        assert lift(line, "arm") == expected

    def test_conditional_move_pattern(self):
        """Test that a predicated move with a constant is CONTROL_CONSTANT."""
        assert lift_tags("8000 - MOVLE R0, #0x1", "arm") == [PatternTag.CONTROL_CONSTANT]
        assert lift_tags("8000 - MOVGT R0, R1", "arm") == [PatternTag.CONTROL]

    def test_always_condition(self):
        """Test that the AL condition code lifts like the bare mnemonic."""
        assert lift("8000 - MOVAL R0, R1", "arm") == ["R0 = R1;"]

    @pytest.mark.parametrize("line", ["8000 - NOP", "8000 - DMB ish", "8000 - BKPT #0"])
    def test_ignored(self, line):
        insn = parse_disasm(line, "arm")[0].instructions[0]
        assert create_lifter("arm").lift_instruction(insn).ignored

    def test_unknown(self):
        """Test that an unsupported ARM mnemonic becomes UNKNOWN."""
        assert lift("8000 - VADD.F32 S0, S1, S2", "arm") == ["UNKNOWN;"]


class TestLiftProgram:
    """Tests for lifting whole listings."""

    def test_empty_span(self):
        """Test that a function without instructions lifts to its markers."""
        program = lift_program([FunctionSpan("empty", 0x8000, 0x8010, Arch.ARM)])
        assert emit_mail(program) == "start_function_0;\nend_function_0;\n"
        assert program.functions[0].name == "empty"
        assert program.functions[0].boundaries == frozenset()

    def test_markers_and_addresses(self):
        """Test marker placement and statement addresses."""
        listing = (
            "FUNC f 401000 401010\n"
            "401000 - PUSH RBP\n"
            "401001 - NOP\n"
            "401002 - RET\n"
        )
        program = lift_program(parse_disasm(listing))
        assert [a for a, _ in program.statements] == [0x401000, 0x401000, 0x401002, 0x401010]
        assert isinstance(program.statements[0][1], FunctionMarker)
        info = program.functions[0]
        assert (info.start, info.end) == (0x401000, 0x401010)
        assert info.boundaries == frozenset({0x401000, 0x401001, 0x401002})

    def test_mixed_architectures(self):
        """Test that each span is lifted by the lifter of its own architecture."""
        listing = (
            "FUNC a 401000 401004\n"
            "401000 - RET\n"
            "FUNC b 8000 8004 ARCH arm\n"
            "8000 - BX LR\n"
        )
        program = lift_program(parse_disasm(listing))
        assert emit_mail(program) == (
            "start_function_0;\njmp [SP=SP-0x8];\nend_function_0;\n"
            "start_function_1;\njmp UNKNOWN;\nend_function_1;\n"
        )

    def test_merge_sort_covers_listing(self, merge_sort_text):
        """Test that every instruction address of the fixture appears in the function boundaries."""
        spans = parse_disasm(merge_sort_text)
        program = lift_program(spans)
        assert len(program.functions) == 1
        assert program.functions[0].boundaries == frozenset(i.address for i in spans[0].instructions)
        # only the three instrumentation lines are unsupported
        unknown = [a for a, s in program.statements if s.pattern == PatternTag.UNKNOWN]
        assert unknown == [0x4011D8, 0x4011DE, 0x4011E0]

    def test_merge_sort_arm(self, merge_sort_arm_text):
        """Test that the ARM fixture lifts without UNKNOWN statements."""
        program = lift_program(parse_disasm(merge_sort_arm_text, "arm"))
        assert len(program.functions) == 1
        assert not any(s.pattern == PatternTag.UNKNOWN for _, s in program.statements)
