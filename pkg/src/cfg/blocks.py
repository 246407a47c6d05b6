"""
Basic blocks and annotated control flow graphs (ACFGs).

A function body is split at leaders: the entry, every constant branch target
inside the function, and every statement that follows a jump, a control
statement with a jump branch, or halt. Calls do not end a block.
"""

from __future__ import annotations

import logging
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import networkx as nx

from ..mail.classify import classified
from ..mail.nodes import Constant, Control, FunctionMarker, Halt, Jump, MailStatement, is_terminator
from ..mail.patterns import PatternTag
from ..mail.program import FunctionInfo, MailProgram

logger = logging.getLogger(__name__)

PROGRAM_GRAPH_NAME = "program"


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class BasicBlock:
    """
    A basic block.

    ``addresses[i]`` is the address of ``statements[i]``. ``jump_to`` is the
    block id a constant branch at the end of the block resolved to during
    partitioning; it only feeds build_cfg and is not part of equality.
    """
    id: int
    statements: tuple[MailStatement, ...] = ()
    addresses: tuple[int, ...] = ()
    pattern_seq: tuple[PatternTag, ...] = ()
    jump_to: Optional[int] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.addresses) != len(self.statements):
            raise ValueError(f"block {self.id}: {len(self.statements)} statements but {len(self.addresses)} addresses")

    @property
    def start_addr(self) -> Optional[int]:
        return self.addresses[0] if self.addresses else None

    @property
    def end_addr(self) -> Optional[int]:
        return self.addresses[-1] if self.addresses else None

    @property
    def last(self) -> Optional[MailStatement]:
        return self.statements[-1] if self.statements else None

    def __len__(self) -> int:
        return len(self.statements)


@dataclass(frozen=True)
class ACFG:
    """An annotated control flow graph of one function (or of a whole program)."""
    name: str
    blocks: tuple[BasicBlock, ...] = ()
    edges: tuple[tuple[int, int], ...] = ()
    entry: int = 0
    index: Optional[int] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for position, block in enumerate(self.blocks):
            if block.id != position:
                raise ValueError(f"ACFG {self.name}: block ids must be 0..n-1 in order, got {block.id} at {position}")
        n = len(self.blocks)
        for src, dst in self.edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"ACFG {self.name}: edge ({src}, {dst}) references a missing block")
        if n and not 0 <= self.entry < n:
            raise ValueError(f"ACFG {self.name}: entry {self.entry} is not a block")

    @property
    def size(self) -> tuple[int, int]:
        """(number of blocks, number of edges)."""
        return len(self.blocks), len(self.edges)

    def block(self, block_id: int) -> BasicBlock:
        return self.blocks[block_id]

    def successors(self, block_id: int) -> list[int]:
        return [d for s, d in self.edges if s == block_id]

    def predecessors(self, block_id: int) -> list[int]:
        return [s for s, d in self.edges if d == block_id]

    def to_digraph(self) -> nx.DiGraph:
        """A networkx view; nodes carry the block's ``patterns`` tuple."""
        g = nx.DiGraph(name=self.name)
        for block in self.blocks:
            g.add_node(block.id, patterns=block.pattern_seq)
        g.add_edges_from(self.edges)
        return g


# =============================================================================
# Partitioning
# =============================================================================

def _constant_target(stmt: MailStatement) -> Optional[int]:
    jump = stmt if isinstance(stmt, Jump) else stmt.jump if isinstance(stmt, Control) else None
    if jump is not None and isinstance(jump.target, Constant):
        return jump.target.value
    return None


def _partition(
    body: Sequence[tuple[int, MailStatement]],
    start: int,
    end: int,
    boundaries: frozenset[int],
    label: str,
) -> list[BasicBlock]:
    if not body:
        return []

    first_index: dict[int, int] = {}
    for i, (addr, _) in enumerate(body):
        first_index.setdefault(addr, i)
    ordered = sorted(first_index)
    boundaries = boundaries or frozenset(ordered)

    def resolve(target: int) -> Optional[int]:
        if target < start or target > end:
            logger.debug(f"{label}: branch to 0x{target:x} leaves the function, no edge")
            return None
        if target not in boundaries:
            logger.warning(
                f"{label}: branch target 0x{target:x} is not an instruction boundary, treated as unknown"
            )
            return None
        pos = bisect_left(ordered, target)
        if pos == len(ordered):
            return None
        return first_index[ordered[pos]]

    leaders = {0}
    targets: dict[int, Optional[int]] = {}
    for i, (_, stmt) in enumerate(body):
        target = _constant_target(stmt)
        if target is not None:
            resolved = resolve(target)
            targets[i] = resolved
            if resolved is not None:
                leaders.add(resolved)
        if is_terminator(stmt) and i + 1 < len(body):
            leaders.add(i + 1)

    starts = sorted(leaders)
    block_of = {pos: block_id for block_id, pos in enumerate(starts)}
    blocks: list[BasicBlock] = []
    for block_id, first in enumerate(starts):
        last = starts[block_id + 1] if block_id + 1 < len(starts) else len(body)
        chunk = body[first:last]
        resolved = targets.get(last - 1)
        blocks.append(BasicBlock(
            id=block_id,
            statements=tuple(s for _, s in chunk),
            addresses=tuple(a for a, _ in chunk),
            jump_to=block_of.get(resolved) if resolved is not None else None,
        ))
    return blocks


def partition_blocks(program: MailProgram, function: int | FunctionInfo) -> list[BasicBlock]:
    """
    Split one function of ``program`` into basic blocks numbered in address order.

    A branch target outside the function produces no block boundary; one
    inside the function but off an instruction boundary is logged and
    treated as unknown.
    """
    info = function if isinstance(function, FunctionInfo) else program.function(function)
    body = program.body(info.index)
    return _partition(body, info.start, info.end, info.boundaries, info.name or f"function_{info.index}")


# =============================================================================
# Graph construction
# =============================================================================

def _falls_through(block: BasicBlock) -> bool:
    return not isinstance(block.last, (Jump, Halt))


def build_cfg(blocks: Iterable[BasicBlock], name: str = "", index: Optional[int] = None) -> ACFG:
    """
    Connect partitioned blocks.

    Each block gets a fall-through edge to the next block unless it ends in
    a jump or halt, and a branch edge for a resolved constant target.
    Unknown targets produce no edge.
    """
    blocks = tuple(blocks)
    by_start: dict[int, int] = {}
    for block in blocks:
        if block.start_addr is not None:
            by_start.setdefault(block.start_addr, block.id)

    edges: set[tuple[int, int]] = set()
    for block in blocks:
        if block.id + 1 < len(blocks) and _falls_through(block):
            edges.add((block.id, block.id + 1))
        if block.last is None:
            continue
        dest = block.jump_to
        if dest is None:
            target = _constant_target(block.last)
            dest = by_start.get(target) if target is not None else None
        if dest is not None:
            edges.add((block.id, dest))
    return ACFG(name=_graph_name(name), blocks=blocks, edges=tuple(sorted(edges)), index=index)


def annotate(cfg: ACFG, libcall_as_call: bool = False) -> ACFG:
    """Fill every block's pattern_seq from its statements' tags. Idempotent."""
    blocks = []
    for block in cfg.blocks:
        statements = tuple(
            classified(s, libcall_as_call) if s.pattern == PatternTag.NOTDEFINED else s
            for s in block.statements
        )
        seq = tuple(s.pattern for s in statements if not isinstance(s, FunctionMarker))
        blocks.append(replace(block, statements=statements, pattern_seq=seq))
    return replace(cfg, blocks=tuple(blocks))


def _graph_name(name: str) -> str:
    cleaned = "_".join(name.split())
    return cleaned or "_"


# =============================================================================
# Program-level helpers
# =============================================================================

def function_acfgs(program: MailProgram, normalized: bool = True, libcall_as_call: bool = False) -> list[ACFG]:
    """One ACFG per function, in function-index order."""
    from .normalize import normalize

    graphs = []
    for info in sorted(program.functions, key=lambda f: f.index):
        blocks = partition_blocks(program, info)
        cfg = annotate(build_cfg(blocks, info.name or f"function_{info.index}", info.index), libcall_as_call)
        graphs.append(normalize(cfg) if normalized else cfg)
    return graphs


def program_acfg(program: MailProgram, normalized: bool = True, libcall_as_call: bool = False) -> ACFG:
    """
    The whole program as one graph.

    All functions form a single span, so jumps between functions become
    internal edges.
    """
    from .normalize import normalize

    body = sorted(program.without_markers(), key=lambda pair: pair[0])
    if not body:
        return ACFG(PROGRAM_GRAPH_NAME)
    boundaries = frozenset().union(*(f.boundaries for f in program.functions)) if program.functions else frozenset()
    if boundaries:
        boundaries = boundaries | {addr for addr, _ in body}
    blocks = _partition(body, body[0][0], body[-1][0], boundaries, PROGRAM_GRAPH_NAME)
    cfg = annotate(build_cfg(blocks, PROGRAM_GRAPH_NAME), libcall_as_call)
    return normalize(cfg) if normalized else cfg
