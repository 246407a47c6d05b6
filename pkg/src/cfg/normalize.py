"""
ACFG normalization.

Three reductions are applied until none fires:

  (a) blocks unreachable from the entry are removed;
  (b) a block with exactly one successor is merged with that successor when
      the successor has exactly one predecessor, is not the entry, and the
      block does not end in a jump, halt or control statement;
  (c) empty blocks are bypassed (predecessors are connected to successors)
      when that does not increase the edge count.

Block ids are then renumbered: the entry becomes 0 and the other blocks
follow in address order. Merging concatenates statements and pattern
sequences.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import networkx as nx

from ..mail.nodes import Control, Halt, Jump
from ..mail.patterns import PatternTag
from .blocks import ACFG, BasicBlock

logger = logging.getLogger(__name__)

# Tags of statements that end a block's fall-through, for graphs stored without statements
_FLOW_TAGS = frozenset({
    PatternTag.CONTROL, PatternTag.CONTROL_CONSTANT, PatternTag.HALT,
    PatternTag.JUMP, PatternTag.JUMP_CONSTANT, PatternTag.JUMP_STACK,
})


def _ends_flow(block: BasicBlock) -> bool:
    if block.statements:
        return isinstance(block.last, (Control, Jump, Halt))
    return bool(block.pattern_seq) and block.pattern_seq[-1] in _FLOW_TAGS


def _is_empty(block: BasicBlock) -> bool:
    return not block.statements and not block.pattern_seq


def _bypass_empty(g: nx.DiGraph, blocks: dict[int, BasicBlock], entry: int) -> tuple[bool, int]:
    for node in sorted(g):
        if not _is_empty(blocks[node]):
            continue
        succs = [s for s in g.successors(node)]
        if node in succs:
            continue
        if node == entry:
            if len(succs) != 1:
                continue
            entry = succs[0]
        preds = [p for p in g.predecessors(node)]
        if len(preds) > 1 and len(succs) > 1:
            # would add edges
            continue
        g.remove_node(node)
        g.add_edges_from((p, s) for p in preds for s in succs)
        return True, entry
    return False, entry


def _merge_chain(g: nx.DiGraph, blocks: dict[int, BasicBlock], entry: int) -> bool:
    for u in sorted(g):
        if g.out_degree(u) != 1:
            continue
        (v,) = g.successors(u)
        if v == u or v == entry or g.in_degree(v) != 1 or _ends_flow(blocks[u]):
            continue
        a, b = blocks[u], blocks[v]
        blocks[u] = replace(
            a,
            statements=a.statements + b.statements,
            addresses=a.addresses + b.addresses,
            pattern_seq=a.pattern_seq + b.pattern_seq,
            jump_to=None,
        )
        succs = [s for s in g.successors(v)]
        g.remove_node(v)
        g.add_edges_from((u, u if s == v else s) for s in succs)
        return True
    return False


def normalize(cfg: ACFG) -> ACFG:
    """
    Reduce an ACFG to its normal form.

    The result never has more blocks or edges than the input, keeps the
    loop structure, and normalize(normalize(g)) == normalize(g).
    """
    if not cfg.blocks:
        return cfg

    g = cfg.to_digraph()
    blocks = {b.id: b for b in cfg.blocks}
    entry = cfg.entry

    reachable = nx.descendants(g, entry) | {entry}
    unreachable = [n for n in g if n not in reachable]
    if unreachable:
        logger.debug(f"{cfg.name}: removing unreachable blocks {sorted(unreachable)}")
        g.remove_nodes_from(unreachable)

    changed = True
    while changed:
        changed, entry = _bypass_empty(g, blocks, entry)
        if not changed:
            changed = _merge_chain(g, blocks, entry)

    def order(node: int) -> tuple:
        start = blocks[node].start_addr
        return (node != entry, start if start is not None else -1, node)

    renumber = {old: new for new, old in enumerate(sorted(g, key=order))}
    new_blocks = tuple(
        replace(blocks[old], id=new, jump_to=None)
        for old, new in sorted(renumber.items(), key=lambda kv: kv[1])
    )
    edges = tuple(sorted((renumber[s], renumber[d]) for s, d in g.edges))

    result = replace(cfg, blocks=new_blocks, edges=edges, entry=0)
    if result.size != cfg.size:
        logger.debug(f"{cfg.name}: normalized {cfg.size[0]}/{cfg.size[1]} -> {result.size[0]}/{result.size[1]} blocks/edges")
    return result
