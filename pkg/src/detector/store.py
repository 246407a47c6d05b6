"""
Malware template store.

On disk a store is a directory with one subdirectory per template and an
``index.yaml`` at the top:

    store/
      index.yaml
      dropper/
        fn0000.acfg
        fn0001.acfg
        program.acfg

Each ``fnNNNN.acfg`` holds one normalized function ACFG in the serialized
ACFG format, ``program.acfg`` the whole-program ACFG. The index lists every
template with its directory, provenance and a sha256 digest over its files.
Rebuilding with unchanged inputs keeps the recorded creation time, so the
store is byte-identical afterwards.
"""

from __future__ import annotations

import hashlib
import logging
import re
import shutil
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import yaml

from ..cfg import ACFG, AcfgFormatError, deserialize, serialize
from ..disasm import Arch, DisasmError
from ..mail.parser import MailSyntaxError
from .samples import SampleGraphs, prepare_sample

logger = logging.getLogger(__name__)

INDEX_FILE = "index.yaml"
PROGRAM_FILE = "program.acfg"
FORMAT_VERSION = 1

_DIR_RE = re.compile(r"[^A-Za-z0-9._-]+")

# Single writer per process; building the store is exclusive.
_write_lock = threading.Lock()


class StoreFormatError(Exception):
    """Raised when a template store on disk is missing, corrupt or of another version."""


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class MalwareTemplate:
    """The normalized, annotated graphs of one known malware sample."""
    name: str
    acfgs: tuple[ACFG, ...] = ()
    program: Optional[ACFG] = None
    arch: str = Arch.X86.value
    source: str = ""
    created: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.name or not self.name.strip():
            raise ValueError("Template name must not be empty")

    @classmethod
    def from_graphs(cls, graphs: SampleGraphs, source: str = "") -> "MalwareTemplate":
        return cls(
            name=graphs.name,
            acfgs=graphs.functions,
            program=graphs.program,
            arch=graphs.arch,
            source=source,
        )

    def files(self) -> dict[str, str]:
        """File name -> serialized ACFG, in store order."""
        out = {f"fn{i:04d}.acfg": serialize(acfg) for i, acfg in enumerate(self.acfgs)}
        if self.program is not None:
            out[PROGRAM_FILE] = serialize(self.program)
        return out

    def digest(self) -> str:
        return _digest(self.files())


@dataclass(frozen=True)
class TemplateSource:
    """A sample to build a template from."""
    name: str
    text: str
    arch: str = Arch.X86.value
    source: str = ""


class TemplateStore:
    """An ordered, name-unique collection of templates, optionally backed by a directory."""

    def __init__(self, templates: Iterable[MalwareTemplate] = (), root: Optional[Path] = None):
        self._templates: list[MalwareTemplate] = []
        self._by_name: dict[str, MalwareTemplate] = {}
        self.root = Path(root) if root is not None else None
        for template in templates:
            self.add(template)

    def add(self, template: MalwareTemplate) -> None:
        if template.name in self._by_name:
            raise ValueError(f"Duplicate template name: {template.name!r}")
        self._templates.append(template)
        self._by_name[template.name] = template

    def get(self, name: str) -> MalwareTemplate:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"No template named {name!r}") from None

    def names(self) -> list[str]:
        return [t.name for t in self._templates]

    def __len__(self) -> int:
        return len(self._templates)

    def __iter__(self) -> Iterator[MalwareTemplate]:
        return iter(self._templates)

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    def __repr__(self) -> str:
        return f"TemplateStore({len(self)} templates, root={self.root})"

    # -------------------------------------------------------------------------
    # Persistence
    # -------------------------------------------------------------------------

    def save(self, root: Optional[Path] = None) -> Path:
        """
        Write the store to ``root`` (default: the store's own root).

        Templates whose digest did not change keep their creation time.
        Directories of templates that are no longer in the store are removed.
        """
        root = Path(root) if root is not None else self.root
        if root is None:
            raise ValueError("No store directory given")

        with _write_lock:
            root.mkdir(parents=True, exist_ok=True)
            previous = _previous_entries(root)
            used: set[str] = set()
            entries = []
            now = datetime.now(timezone.utc).replace(microsecond=0).isoformat()

            for template in self._templates:
                files = template.files()
                digest = _digest(files)
                old = previous.get(template.name)
                created = old["created"] if old and old.get("digest") == digest else (template.created or now)
                dirname = _dir_name(template.name, used)
                _write_template_dir(root / dirname, files)
                entries.append({
                    "name": template.name,
                    "dir": dirname,
                    "arch": template.arch,
                    "source": template.source,
                    "digest": digest,
                    "created": created,
                    "functions": [f for f in files if f != PROGRAM_FILE],
                    "program": PROGRAM_FILE if PROGRAM_FILE in files else None,
                })

            for old in previous.values():
                stale = old.get("dir")
                if stale and stale not in used and (root / stale).is_dir():
                    logger.info(f"Removing stale template directory {stale}")
                    shutil.rmtree(root / stale)

            index = {"format_version": FORMAT_VERSION, "templates": entries}
            (root / INDEX_FILE).write_text(yaml.safe_dump(index, sort_keys=False, default_flow_style=False))

        self.root = root
        logger.info(f"Saved {len(entries)} template(s) to {root}")
        return root

    @classmethod
    def load(cls, root: Path | str) -> "TemplateStore":
        """
        Read a store directory, verifying every template's digest.

        Raises:
            StoreFormatError: If the index is missing or malformed, a file is
                missing or unparsable, or a digest does not match.
        """
        root = Path(root)
        index = _read_index(root)
        store = cls(root=root)
        for position, entry in enumerate(index["templates"]):
            template = _load_template(root, entry, position)
            if template.name in store:
                raise StoreFormatError(f"template #{position}: duplicate name {template.name!r}")
            store.add(template)
        logger.info(f"Loaded {len(store)} template(s) from {root}")
        return store


# =============================================================================
# Building
# =============================================================================

SampleInput = Union[TemplateSource, tuple]


def build_templates(
    samples: Iterable[SampleInput],
    root: Optional[Path] = None,
    libcall_as_call: bool = False,
) -> TemplateStore:
    """
    Lift samples into templates and (when ``root`` is given) persist them.

    Args:
        samples: TemplateSource objects or (name, disassembly text, arch)
            tuples, optionally with a fourth provenance element.
        root: Store directory to write.
        libcall_as_call: Compatibility tagging of library calls.

    Returns:
        The store. Samples that fail to parse or lift, and duplicate names,
        are logged and skipped.
    """
    store = TemplateStore()
    for item in samples:
        sample = item if isinstance(item, TemplateSource) else TemplateSource(*item)
        if sample.name in store:
            logger.warning(f"skipping sample {sample.name}: duplicate template name")
            continue
        try:
            graphs = prepare_sample(sample.name, sample.text, sample.arch, libcall_as_call)
            store.add(MalwareTemplate.from_graphs(graphs, source=sample.source))
        except (DisasmError, MailSyntaxError, ValueError) as e:
            logger.warning(f"skipping sample {sample.name}: {e}")
            continue
        logger.debug(f"template {sample.name}: {len(graphs.functions)} function ACFG(s)")

    if root is not None:
        store.save(root)
    return store


# =============================================================================
# Helpers
# =============================================================================

def _digest(files: dict[str, str]) -> str:
    h = hashlib.sha256()
    for name, text in files.items():
        h.update(name.encode())
        h.update(b"\0")
        h.update(text.encode())
        h.update(b"\0")
    return f"sha256:{h.hexdigest()}"


def _dir_name(name: str, used: set[str]) -> str:
    base = _DIR_RE.sub("_", name).strip("._") or "template"
    candidate, n = base, 1
    while candidate in used:
        n += 1
        candidate = f"{base}_{n}"
    used.add(candidate)
    return candidate


def _write_template_dir(directory: Path, files: dict[str, str]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for stale in directory.glob("*.acfg"):
        if stale.name not in files:
            stale.unlink()
    for name, text in files.items():
        path = directory / name
        if not path.exists() or path.read_text() != text:
            path.write_text(text)


def _read_index(root: Path) -> dict:
    path = root / INDEX_FILE
    if not path.exists():
        raise StoreFormatError(f"Template store index not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise StoreFormatError(f"Invalid YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise StoreFormatError(f"{path}: expected a mapping")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise StoreFormatError(f"{path}: unsupported format_version {version!r}, expected {FORMAT_VERSION}")
    templates = data.get("templates")
    if templates is None:
        templates = []
    if not isinstance(templates, list):
        raise StoreFormatError(f"{path}: 'templates' must be a list")
    data["templates"] = templates
    return data


def _previous_entries(root: Path) -> dict[str, dict]:
    if not (root / INDEX_FILE).exists():
        return {}
    try:
        index = _read_index(root)
    except StoreFormatError as e:
        logger.warning(f"Ignoring unreadable index while rebuilding: {e}")
        return {}
    return {e["name"]: e for e in index["templates"] if isinstance(e, dict) and "name" in e}


def _load_template(root: Path, entry: object, position: int) -> MalwareTemplate:
    if not isinstance(entry, dict):
        raise StoreFormatError(f"template #{position}: expected a mapping")
    missing = [k for k in ("name", "dir", "digest", "functions") if k not in entry]
    if missing:
        raise StoreFormatError(f"template #{position}: missing {', '.join(missing)}")

    directory = root / str(entry["dir"])
    names = list(entry["functions"] or [])
    if entry.get("program"):
        names.append(str(entry["program"]))

    files: dict[str, str] = {}
    for name in names:
        path = directory / name
        if not path.exists():
            raise StoreFormatError(f"template {entry['name']}: missing file {path}")
        files[name] = path.read_text()

    if _digest(files) != entry["digest"]:
        raise StoreFormatError(f"template {entry['name']}: digest mismatch, store was modified")

    graphs: dict[str, ACFG] = {}
    for name, text in files.items():
        try:
            graphs[name] = deserialize(text)
        except AcfgFormatError as e:
            raise StoreFormatError(f"{directory / name}: {e}") from e

    try:
        return MalwareTemplate(
            name=str(entry["name"]),
            acfgs=tuple(graphs[n] for n in entry["functions"] or []),
            program=graphs.get(str(entry["program"])) if entry.get("program") else None,
            arch=str(entry.get("arch", Arch.X86.value)),
            source=str(entry.get("source") or ""),
            created=str(entry.get("created") or ""),
        )
    except ValueError as e:
        raise StoreFormatError(f"template #{position}: {e}") from e
