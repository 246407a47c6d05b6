"""
Samples as graphs, and corpus manifests.

A sample is scored through its normalized per-function ACFGs and its
whole-program ACFG. A corpus manifest is a YAML file listing sample files
with their labels:

    samples:
      - path: malware/dropper.asm
        label: malware
        arch: x86          # optional, default x86
        name: dropper      # optional, default: file stem
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from ..cfg import ACFG, function_acfgs, program_acfg
from ..disasm import Arch, DisasmError, parse_disasm
from ..lifters import lift_program
from ..logging_config import sample_context
from ..mail.program import MailProgram

logger = logging.getLogger(__name__)

LABELS = ("malware", "benign")


class ManifestError(ValueError):
    """Raised for a missing or malformed corpus manifest."""


@dataclass(frozen=True)
class SampleGraphs:
    """The graphs a sample is matched through."""
    name: str
    functions: tuple[ACFG, ...]
    program: ACFG
    arch: str = Arch.X86.value


def graphs_from_program(
    name: str,
    program: MailProgram,
    arch: Arch | str = Arch.X86,
    libcall_as_call: bool = False,
) -> SampleGraphs:
    """Normalized function and whole-program ACFGs of a lifted program."""
    return SampleGraphs(
        name=name,
        functions=tuple(function_acfgs(program, normalized=True, libcall_as_call=libcall_as_call)),
        program=program_acfg(program, normalized=True, libcall_as_call=libcall_as_call),
        arch=Arch(arch).value,
    )


def prepare_sample(
    name: str,
    text: str,
    arch: Arch | str = Arch.X86,
    libcall_as_call: bool = False,
) -> SampleGraphs:
    """
    Parse, lift and graph one disassembly listing.

    Raises:
        DisasmError: If the listing is malformed.
        ValueError: If the architecture is unknown.
    """
    arch = Arch.parse(arch) if isinstance(arch, str) else arch
    with sample_context(name):
        program = lift_program(parse_disasm(text, arch), libcall_as_call)
        graphs = graphs_from_program(name, program, arch, libcall_as_call)
        logger.debug(
            f"{name}: {len(graphs.functions)} function graph(s), "
            f"program graph {graphs.program.size[0]} blocks"
        )
    return graphs


@dataclass(frozen=True)
class CorpusEntry:
    """One sample file listed in a corpus manifest."""
    name: str
    path: Path
    label: str
    arch: Arch = Arch.X86

    @property
    def is_malware(self) -> bool:
        return self.label == "malware"

    def read(self) -> str:
        return self.path.read_text()


def _entry(item: dict, base: Path, position: int) -> CorpusEntry:
    if not isinstance(item, dict) or "path" not in item:
        raise ManifestError(f"sample #{position}: expected a mapping with a 'path' key")
    label = str(item.get("label", "")).lower()
    if label not in LABELS:
        raise ManifestError(f"sample #{position}: label must be 'malware' or 'benign', got {item.get('label')!r}")
    path = Path(item["path"])
    if not path.is_absolute():
        path = base / path
    try:
        arch = Arch.parse(str(item.get("arch", Arch.X86.value)))
    except ValueError as e:
        raise ManifestError(f"sample #{position}: {e}") from None
    return CorpusEntry(name=str(item.get("name") or path.stem), path=path, label=label, arch=arch)


def load_corpus_manifest(path: Path | str) -> list[CorpusEntry]:
    """
    Read a corpus manifest. Relative sample paths resolve against the
    manifest's directory.

    Raises:
        ManifestError: If the file is missing, not YAML, lacks a samples
            list, has an entry without a path or with a bad label, or
            names the same sample twice.
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"Corpus manifest not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ManifestError(f"Invalid YAML in {path}: {e}") from e

    items = data.get("samples") if isinstance(data, dict) else None
    if not isinstance(items, list):
        raise ManifestError(f"{path}: expected a top-level 'samples' list")

    entries = [_entry(item, path.parent, i) for i, item in enumerate(items)]
    seen: set[str] = set()
    for entry in entries:
        if entry.name in seen:
            raise ManifestError(f"{path}: duplicate sample name {entry.name!r}")
        seen.add(entry.name)
    logger.info(f"Loaded corpus manifest {path}: {len(entries)} sample(s)")
    return entries


def load_corpus(
    entries: list[CorpusEntry],
    libcall_as_call: bool = False,
) -> tuple[list[SampleGraphs], list[str]]:
    """
    Prepare every manifest entry that parses and lifts.

    Returns:
        (graphs, labels) in manifest order; entries that fail are logged
        and left out of both lists.
    """
    graphs: list[SampleGraphs] = []
    labels: list[str] = []
    for entry in entries:
        prepared = _try_prepare(entry, libcall_as_call)
        if prepared is not None:
            graphs.append(prepared)
            labels.append(entry.label)
    return graphs, labels


def _try_prepare(entry: CorpusEntry, libcall_as_call: bool) -> Optional[SampleGraphs]:
    try:
        return prepare_sample(entry.name, entry.read(), entry.arch, libcall_as_call)
    except (OSError, DisasmError, ValueError) as e:
        logger.warning(f"skipping sample {entry.name}: {e}")
        return None
