"""
ACFG text format and DOT rendering.

Format (one record per line)::

    ACFG <name> <n_blocks> <n_edges>
    B <id> <TAG>,<TAG>,...
    S <id> <MAIL statement> -- 0x<addr>
    E <src> <dst>

B lines appear in id order, each followed by the S lines of its
statements; E lines follow all blocks. S lines are optional: a graph
written without them still carries every block's pattern sequence.
Lines starting with "#" are comments. A file may hold several graphs,
each starting at its header line.
"""

from __future__ import annotations

import re
from typing import Optional

import graphviz

from ..mail.parser import MailSyntaxError, parse_statement
from ..mail.patterns import parse_tag
from ..mail.printer import format_statement
from .blocks import ACFG, BasicBlock

HEADER = "ACFG"

_STATEMENT_RE = re.compile(r"^(.*?)\s*--\s*0x([0-9a-fA-F]+)\s*$")


class AcfgFormatError(Exception):
    """Raised for malformed ACFG text."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def serialize(cfg: ACFG, statements: bool = True) -> str:
    """
    Render an ACFG in the line format.

    Args:
        cfg: The graph; its entry must be block 0.
        statements: Emit S lines with each block's MAIL statements.

    Returns:
        The text, ending with a newline.
    """
    if cfg.blocks and cfg.entry != 0:
        raise ValueError(f"ACFG {cfg.name}: only graphs with entry block 0 can be serialized")
    lines = [f"{HEADER} {cfg.name} {len(cfg.blocks)} {len(cfg.edges)}"]
    for block in cfg.blocks:
        tags = ",".join(str(t) for t in block.pattern_seq)
        lines.append(f"B {block.id} {tags}" if tags else f"B {block.id}")
        if statements:
            for addr, stmt in zip(block.addresses, block.statements):
                lines.append(f"S {block.id} {format_statement(stmt)} -- 0x{addr:x}")
    lines.extend(f"E {src} {dst}" for src, dst in cfg.edges)
    return "\n".join(lines) + "\n"


def _int(token: str, what: str, lineno: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise AcfgFormatError(f"{what} must be an integer, got {token!r}", lineno) from None
    if value < 0:
        raise AcfgFormatError(f"{what} must not be negative", lineno)
    return value


def deserialize(text: str) -> ACFG:
    """
    Parse the line format back into an ACFG.

    Edges are returned in sorted order.

    Raises:
        AcfgFormatError: On a missing or malformed header, counts that do not
            match, out-of-order block ids, dangling edge ids or unparsable
            statements.
    """
    records = [
        (n, line.strip()) for n, line in enumerate(text.splitlines(), 1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not records:
        raise AcfgFormatError("empty input")

    lineno, header = records[0]
    parts = header.split()
    if len(parts) != 4 or parts[0] != HEADER:
        raise AcfgFormatError(f"expected '{HEADER} <name> <n_blocks> <n_edges>', got {header!r}", lineno)
    name = parts[1]
    n_blocks = _int(parts[2], "block count", lineno)
    n_edges = _int(parts[3], "edge count", lineno)

    tags: list[tuple] = []
    stmts: list[list] = []
    addrs: list[list[int]] = []
    edges: set[tuple[int, int]] = set()

    for lineno, line in records[1:]:
        kind, _, rest = line.partition(" ")
        if kind == "B":
            fields = rest.split(None, 1)
            if not fields:
                raise AcfgFormatError("B line needs a block id", lineno)
            block_id = _int(fields[0], "block id", lineno)
            if block_id != len(tags):
                raise AcfgFormatError(f"block {block_id} out of order, expected {len(tags)}", lineno)
            try:
                seq = tuple(parse_tag(t.strip()) for t in fields[1].split(",")) if len(fields) > 1 else ()
            except ValueError as e:
                raise AcfgFormatError(str(e), lineno) from None
            tags.append(seq)
            stmts.append([])
            addrs.append([])
        elif kind == "S":
            fields = rest.split(None, 1)
            if len(fields) != 2:
                raise AcfgFormatError("S line needs a block id and a statement", lineno)
            block_id = _int(fields[0], "block id", lineno)
            if block_id >= len(tags):
                raise AcfgFormatError(f"statement for undeclared block {block_id}", lineno)
            m = _STATEMENT_RE.match(fields[1])
            source = m.group(1) if m else fields[1]
            if m:
                addr = int(m.group(2), 16)
            else:
                addr = addrs[block_id][-1] if addrs[block_id] else 0
            try:
                stmts[block_id].append(parse_statement(source))
            except MailSyntaxError as e:
                raise AcfgFormatError(f"bad statement: {e}", lineno) from None
            addrs[block_id].append(addr)
        elif kind == "E":
            fields = rest.split()
            if len(fields) != 2:
                raise AcfgFormatError("E line needs two block ids", lineno)
            src, dst = (_int(f, "edge endpoint", lineno) for f in fields)
            if src >= n_blocks or dst >= n_blocks:
                raise AcfgFormatError(f"dangling edge ({src}, {dst})", lineno)
            if (src, dst) in edges:
                raise AcfgFormatError(f"duplicate edge ({src}, {dst})", lineno)
            edges.add((src, dst))
        else:
            raise AcfgFormatError(f"unknown record {kind!r}", lineno)

    if len(tags) != n_blocks:
        raise AcfgFormatError(f"header declares {n_blocks} blocks, found {len(tags)}")
    if len(edges) != n_edges:
        raise AcfgFormatError(f"header declares {n_edges} edges, found {len(edges)}")

    blocks = tuple(
        BasicBlock(id=i, statements=tuple(stmts[i]), addresses=tuple(addrs[i]), pattern_seq=tags[i])
        for i in range(n_blocks)
    )
    return ACFG(name=name, blocks=blocks, edges=tuple(sorted(edges)))


def deserialize_all(text: str) -> list[ACFG]:
    """Parse every graph in a file that holds one or more serialized ACFGs."""
    lines = text.splitlines()
    starts = [i for i, line in enumerate(lines) if line.strip().split(" ", 1)[0] == HEADER]
    if not starts:
        raise AcfgFormatError("no ACFG header found")
    if any(line.strip() and not line.lstrip().startswith("#") for line in lines[:starts[0]]):
        raise AcfgFormatError("records before the first header")
    graphs = []
    for n, first in enumerate(starts):
        last = starts[n + 1] if n + 1 < len(starts) else len(lines)
        # leading blank lines keep the reported line numbers file-relative
        graphs.append(deserialize("\n" * first + "\n".join(lines[first:last])))
    return graphs


def render_dot(cfg: ACFG, statements: bool = False) -> str:
    """
    Graphviz DOT source for an ACFG.

    Node labels show the block id and its pattern tags; with ``statements``
    the MAIL text of the block follows.
    """
    dot = graphviz.Digraph(name=cfg.name, node_attr={"shape": "box", "fontname": "monospace"})
    for block in cfg.blocks:
        lines = [f"B{block.id}"]
        lines.extend(str(t) for t in block.pattern_seq)
        if statements:
            lines.extend(format_statement(s) for s in block.statements)
        label = "\\l".join(lines) + "\\l"
        attrs = {"peripheries": "2"} if block.id == cfg.entry else {}
        dot.node(str(block.id), label=label, **attrs)
    for src, dst in cfg.edges:
        dot.edge(str(src), str(dst))
    return dot.source
