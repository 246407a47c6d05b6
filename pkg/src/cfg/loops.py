"""
Loop detection on ACFGs.

Back edges are retreating edges (u, v) whose head v dominates the tail u.
Each header's natural loop is the header plus every block that reaches a back
edge tail without passing through the header. Retreating edges whose head
does not dominate the tail belong to irreducible regions and are reported
separately, without a loop body.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import networkx as nx

from .blocks import ACFG


@dataclass(frozen=True)
class Loop:
    header: int
    body: frozenset[int]
    back_edges: tuple[tuple[int, int], ...]
    parent: Optional[int] = None
    depth: int = 1

    @property
    def span(self) -> tuple[int, int]:
        """Lowest and highest block id in the body (the loop's layout extent)."""
        return min(self.body), max(self.body)


@dataclass(frozen=True)
class LoopInfo:
    """Loops of one ACFG. ``parent`` on each loop is the header of the enclosing loop."""
    back_edges: tuple[tuple[int, int], ...] = ()
    loops: tuple[Loop, ...] = ()
    irreducible: tuple[tuple[int, int], ...] = ()

    @property
    def outer(self) -> list[Loop]:
        return [loop for loop in self.loops if loop.parent is None]

    @property
    def inner(self) -> list[Loop]:
        return [loop for loop in self.loops if loop.parent is not None]

    @property
    def max_depth(self) -> int:
        return max((loop.depth for loop in self.loops), default=0)

    def loop(self, header: int) -> Loop:
        for loop in self.loops:
            if loop.header == header:
                return loop
        raise KeyError(f"No loop with header {header}")

    def children(self, header: int) -> list[Loop]:
        return [loop for loop in self.loops if loop.parent == header]

    def summary(self) -> str:
        text = f"{len(self.outer)} outer, {len(self.inner)} inner"
        if self.irreducible:
            text += f", {len(self.irreducible)} irreducible"
        return text


def _dominates(idom: dict[int, int], a: int, b: int) -> bool:
    node = b
    while True:
        if node == a:
            return True
        parent = idom.get(node)
        if parent is None or parent == node:
            return False
        node = parent


def _retreating_edges(g: nx.DiGraph, entry: int) -> list[tuple[int, int]]:
    pre = {n: i for i, n in enumerate(nx.dfs_preorder_nodes(g, entry))}
    post = {n: i for i, n in enumerate(nx.dfs_postorder_nodes(g, entry))}
    return [
        (u, v) for u, v in g.edges
        if u in pre and v in pre and pre[v] <= pre[u] and post[v] >= post[u]
    ]


def _natural_body(g: nx.DiGraph, header: int, tails: list[int]) -> frozenset[int]:
    body = {header}
    stack = [t for t in tails if t != header]
    while stack:
        node = stack.pop()
        if node in body:
            continue
        body.add(node)
        stack.extend(p for p in g.predecessors(node) if p not in body)
    return frozenset(body)


def find_loops(cfg: ACFG) -> LoopInfo:
    """Find back edges, natural loops and their nesting."""
    if not cfg.blocks:
        return LoopInfo()
    g = cfg.to_digraph()
    idom = nx.immediate_dominators(g, cfg.entry)

    back: list[tuple[int, int]] = []
    irreducible: list[tuple[int, int]] = []
    for u, v in sorted(_retreating_edges(g, cfg.entry)):
        (back if _dominates(idom, v, u) else irreducible).append((u, v))

    tails: dict[int, list[int]] = {}
    for u, v in back:
        tails.setdefault(v, []).append(u)
    bodies = {h: _natural_body(g, h, ts) for h, ts in tails.items()}

    parents: dict[int, Optional[int]] = {}
    for header, body in bodies.items():
        enclosing = [
            other for other, other_body in bodies.items()
            if other != header and body < other_body
        ]
        parents[header] = min(enclosing, key=lambda h: (len(bodies[h]), h)) if enclosing else None

    def depth(header: int) -> int:
        d, parent = 1, parents[header]
        while parent is not None:
            d, parent = d + 1, parents[parent]
        return d

    loops = tuple(
        Loop(
            header=h,
            body=bodies[h],
            back_edges=tuple((u, h) for u in sorted(tails[h])),
            parent=parents[h],
            depth=depth(h),
        )
        for h in sorted(bodies)
    )
    return LoopInfo(back_edges=tuple(back), loops=loops, irreducible=tuple(irreducible))
