"""
Control flow graphs annotated with MAIL statement patterns.
"""

from .blocks import (
    ACFG,
    BasicBlock,
    annotate,
    build_cfg,
    function_acfgs,
    partition_blocks,
    program_acfg,
)
from .loops import Loop, LoopInfo, find_loops
from .normalize import normalize
from .serialize import AcfgFormatError, deserialize, deserialize_all, render_dot, serialize

__all__ = [
    "ACFG",
    "AcfgFormatError",
    "BasicBlock",
    "Loop",
    "LoopInfo",
    "annotate",
    "build_cfg",
    "deserialize",
    "deserialize_all",
    "find_loops",
    "function_acfgs",
    "normalize",
    "partition_blocks",
    "program_acfg",
    "render_dot",
    "serialize",
]
