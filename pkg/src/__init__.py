"""
MAIL toolkit.

Lifts x86 and ARM disassembly into MAIL (Malware Analysis Intermediate
Language), builds annotated control flow graphs whose blocks carry
statement pattern sequences, and detects malware by matching those graphs
against a store of malware templates.
"""

__version__ = "0.1.0"

from .cfg import ACFG, BasicBlock, build_cfg, find_loops, normalize, partition_blocks
from .detector import (
    DetectionReport,
    TemplateStore,
    build_templates,
    detect_exact,
    detect_threshold,
    prepare_sample,
)
from .disasm import parse_disasm
from .lifters import lift_program
from .mail import MailProgram, emit_mail, parse_mail
from .matcher import brute_force_match, subgraph_match

__all__ = [
    "ACFG",
    "BasicBlock",
    "DetectionReport",
    "MailProgram",
    "TemplateStore",
    "__version__",
    "brute_force_match",
    "build_cfg",
    "build_templates",
    "detect_exact",
    "detect_threshold",
    "emit_mail",
    "find_loops",
    "lift_program",
    "normalize",
    "parse_disasm",
    "parse_mail",
    "partition_blocks",
    "prepare_sample",
    "subgraph_match",
]
