"""
YAML-based table loader.

Loads the MAIL library registry and the per-architecture lifting tables from
YAML files, enabling:
- Auditing the ignore sets and mnemonic mappings without reading code
- Site-specific extensions via MAIL_TABLES_DIR
- Separation of lifting data from lifting logic

Thread-safe: Uses locks for lazy initialization of cached tables.
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

logger = logging.getLogger(__name__)

_library_lock = threading.Lock()
_lifting_lock = threading.Lock()


class TableError(Exception):
    """Raised when a table file is missing or malformed."""


# =============================================================================
# Data Classes
# =============================================================================

@dataclass(frozen=True)
class LibFunction:
    """A MAIL library function and the argument counts it accepts."""
    name: str
    arities: frozenset[int]
    description: str = ""


@dataclass
class LibraryRegistry:
    """All library functions, keyed by name."""
    functions: dict[str, LibFunction] = field(default_factory=dict)
    row_count: int = 0

    def get(self, name: str) -> Optional[LibFunction]:
        return self.functions.get(name)

    def accepts(self, name: str, argc: int) -> bool:
        fn = self.functions.get(name)
        return fn is not None and argc in fn.arities

    @property
    def names(self) -> list[str]:
        return sorted(self.functions)


@dataclass
class LiftingTable:
    """Mnemonic mappings for one architecture."""
    arch: str
    rules: dict[str, str] = field(default_factory=dict)
    families: dict[str, str] = field(default_factory=dict)
    conditions: dict[str, str] = field(default_factory=dict)
    predicates: dict[str, str] = field(default_factory=dict)
    ignore: frozenset[str] = frozenset()

    def is_ignored(self, mnemonic: str, operands: tuple[str, ...] = ()) -> bool:
        if mnemonic in self.ignore:
            return True
        if operands:
            return f"{mnemonic} {' '.join(operands)}" in self.ignore
        return False


# =============================================================================
# Configuration
# =============================================================================

def get_tables_dir() -> Path:
    """Get the tables directory from environment or default."""
    env_dir = os.environ.get("MAIL_TABLES_DIR")
    if env_dir:
        return Path(env_dir)

    # Default: tables/ next to the src package
    package_dir = Path(__file__).parent.parent.parent
    return package_dir / "tables"


# =============================================================================
# YAML Parsing
# =============================================================================

def _read_yaml(file_path: Path) -> dict:
    if not file_path.exists():
        raise TableError(f"Table file not found: {file_path}")
    try:
        with open(file_path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise TableError(f"Malformed table file {file_path}: {e}") from e
    if not isinstance(data, dict):
        raise TableError(f"Table file {file_path} must contain a mapping")
    return data


def _parse_library(data: dict, source: Path) -> LibraryRegistry:
    rows = data.get("functions") or []
    arities: dict[str, set[int]] = {}
    descriptions: dict[str, list[str]] = {}
    for row in rows:
        name = row.get("name")
        arity = row.get("arity")
        if not name or arity is None:
            raise TableError(f"{source}: library row needs name and arity: {row!r}")
        if isinstance(arity, list):
            if len(arity) != 2:
                raise TableError(f"{source}: arity range for {name} must be [min, max]")
            values = set(range(int(arity[0]), int(arity[1]) + 1))
        else:
            values = {int(arity)}
        arities.setdefault(name, set()).update(values)
        descriptions.setdefault(name, []).append(str(row.get("description", "")))

    functions = {
        name: LibFunction(name=name, arities=frozenset(values), description="; ".join(descriptions[name]))
        for name, values in arities.items()
    }
    return LibraryRegistry(functions=functions, row_count=len(rows))


def _parse_lifting(data: dict, source: Path) -> LiftingTable:
    arch = data.get("arch")
    if not arch:
        raise TableError(f"{source}: missing 'arch'")
    return LiftingTable(
        arch=str(arch),
        rules={str(k).upper(): str(v) for k, v in (data.get("rules") or {}).items()},
        families={str(k).upper(): str(v) for k, v in (data.get("families") or {}).items()},
        conditions={str(k).upper(): str(v) for k, v in (data.get("conditions") or {}).items()},
        predicates={str(k).upper(): str(v) for k, v in (data.get("predicates") or {}).items()},
        ignore=frozenset(str(m).upper() for m in (data.get("ignore") or [])),
    )


# =============================================================================
# Table Loading
# =============================================================================

# Cached tables (loaded once)
_library: Optional[LibraryRegistry] = None
_lifting: dict[str, LiftingTable] = {}


def load_library(force_reload: bool = False) -> LibraryRegistry:
    """
    Load the library registry from library.yaml.

    Cached after first load. Use force_reload=True to refresh.
    Thread-safe: Uses double-checked locking pattern.
    """
    global _library

    if _library is not None and not force_reload:
        return _library

    with _library_lock:
        if _library is not None and not force_reload:
            return _library

        source = get_tables_dir() / "library.yaml"
        registry = _parse_library(_read_yaml(source), source)
        _library = registry
        logger.debug(f"Loaded {len(registry.functions)} library functions from {source}")
        return _library


def load_lifting_table(arch: str, force_reload: bool = False) -> LiftingTable:
    """
    Load the lifting table for an architecture ("x86" or "arm").

    Cached per architecture. Use force_reload=True to refresh.
    Thread-safe: Uses double-checked locking pattern.
    """
    key = arch.lower()
    cached = _lifting.get(key)
    if cached is not None and not force_reload:
        return cached

    with _lifting_lock:
        cached = _lifting.get(key)
        if cached is not None and not force_reload:
            return cached

        source = get_tables_dir() / f"{key}.yaml"
        table = _parse_lifting(_read_yaml(source), source)
        if table.arch.lower() != key:
            raise TableError(f"{source}: declares arch {table.arch!r}, expected {key!r}")
        _lifting[key] = table
        logger.debug(
            f"Loaded {key} lifting table: {len(table.rules)} rules, {len(table.ignore)} ignored mnemonics"
        )
        return table
