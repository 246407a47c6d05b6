"""
Assembly to MAIL lifters.

Provides a unified interface over the x86 and ARM lifters.
"""

from .base import LiftContext, Lifter, LiftResult, OperandError
from .factory import create_lifter, get_supported_archs, lift_instruction, lift_program

__all__ = [
    "LiftContext",
    "LiftResult",
    "Lifter",
    "OperandError",
    "create_lifter",
    "get_supported_archs",
    "lift_instruction",
    "lift_program",
]
