"""Lifting tables and library registry, loaded from YAML data files."""

from .loader import (
    LibFunction,
    LibraryRegistry,
    LiftingTable,
    TableError,
    get_tables_dir,
    load_library,
    load_lifting_table,
)

__all__ = [
    "LibFunction",
    "LibraryRegistry",
    "LiftingTable",
    "TableError",
    "get_tables_dir",
    "load_library",
    "load_lifting_table",
]
