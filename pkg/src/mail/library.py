"""
MAIL library functions.

The registry itself is data (tables/library.yaml). Note that the prose
description of the language counts 22 library functions while the reference
table has 27 rows; every row is registered, together with the copy, load
and store calls the x86 lifter uses for string instructions.
"""

from __future__ import annotations

from ..tables import LibraryRegistry, load_library


def get_library() -> LibraryRegistry:
    return load_library()


def validate_libcall(name: str, argc: int) -> bool:
    """True iff ``name`` is a library function accepting ``argc`` arguments."""
    return load_library().accepts(name, argc)
