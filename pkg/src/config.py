"""
Run configuration.

Defaults come from the environment so that scripted corpus runs can be
tuned without changing command lines:

    MAIL_TEMPLATE_STORE  template store directory
    MAIL_WORKERS         corpus-level worker processes (default: CPU count)
    MAIL_THRESHOLD       threshold-mode fraction (default: 0.25)
    MAIL_MATCH_BUDGET    matcher expansion budget per template/target pair
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .disasm import Arch
from .matcher import DEFAULT_BUDGET

DEFAULT_THRESHOLD = 0.25
DETECTION_MODES = ("exact", "threshold")
GRANULARITIES = ("function", "program")


def _default_workers() -> int:
    value = os.environ.get("MAIL_WORKERS")
    if value:
        return int(value)
    return os.cpu_count() or 1


def _default_store() -> Optional[Path]:
    value = os.environ.get("MAIL_TEMPLATE_STORE")
    return Path(value) if value else None


def check_threshold(threshold: float) -> float:
    """Return ``threshold`` if it lies in (0, 1], else raise ValueError."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"Threshold must be in (0, 1], got {threshold}")
    return threshold


@dataclass
class DetectionConfig:
    """How samples are scored against a template store."""
    mode: str = "threshold"
    threshold: float = field(default_factory=lambda: float(
        os.environ.get("MAIL_THRESHOLD", DEFAULT_THRESHOLD)
    ))
    granularity: str = "function"
    use_patterns: bool = True
    budget: int = field(default_factory=lambda: int(
        os.environ.get("MAIL_MATCH_BUDGET", DEFAULT_BUDGET)
    ))
    workers: int = field(default_factory=_default_workers)

    def __post_init__(self) -> None:
        if self.mode not in DETECTION_MODES:
            raise ValueError(f"Unknown detection mode: {self.mode!r}. Use 'exact' or 'threshold'")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"Unknown granularity: {self.granularity!r}. Use 'function' or 'program'")
        check_threshold(self.threshold)
        if self.budget <= 0:
            raise ValueError(f"Match budget must be positive, got {self.budget}")
        if self.workers < 1:
            raise ValueError(f"Worker count must be at least 1, got {self.workers}")


@dataclass
class CliConfig:
    """Options shared by the command-line subcommands."""
    command: str
    inputs: list[Path] = field(default_factory=list)
    arch: Arch = Arch.X86
    output: Optional[Path] = None
    store: Optional[Path] = field(default_factory=_default_store)
    manifest: Optional[Path] = None
    threshold: float = field(default_factory=lambda: float(
        os.environ.get("MAIL_THRESHOLD", DEFAULT_THRESHOLD)
    ))
    seed: int = 0
    folds: int = 10
    train_size: int = 25
    use_patterns: bool = True
    libcall_as_call: bool = False
    verbosity: int = 0
    workers: int = field(default_factory=_default_workers)
    budget: int = field(default_factory=lambda: int(
        os.environ.get("MAIL_MATCH_BUDGET", DEFAULT_BUDGET)
    ))

    def __post_init__(self) -> None:
        if isinstance(self.arch, str):
            self.arch = Arch.parse(self.arch)
        check_threshold(self.threshold)
        if self.command == "xval" and self.folds < 2:
            raise ValueError(f"Cross-validation needs at least 2 folds, got {self.folds}")
        if self.train_size < 0:
            raise ValueError(f"Training size must not be negative, got {self.train_size}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise ValueError(f"Worker count must be at least 1, got {self.workers}")

    def detection(self, mode: str = "threshold", granularity: str = "function") -> DetectionConfig:
        return DetectionConfig(
            mode=mode,
            threshold=self.threshold,
            granularity=granularity,
            use_patterns=self.use_patterns,
            budget=self.budget,
            workers=self.workers,
        )
