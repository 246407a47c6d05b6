"""
Subgraph matching of ACFGs.

A template ACFG matches a target ACFG when some subgraph of the target is
isomorphic to the template: an injective block mapping that preserves every
template edge (extra target edges are allowed). With patterns enabled, mapped
blocks must also carry equal pattern sequences, compared in order.

The search is networkx's VF2 in monomorphism mode, extended with a
degree filter and an expansion budget. brute_force_match enumerates every
injection and serves as a test oracle for small graphs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import permutations
from typing import Optional

from networkx.algorithms.isomorphism import DiGraphMatcher

from .cfg.blocks import ACFG, BasicBlock

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 10 ** 7
BRUTE_FORCE_LIMIT = 8

Mapping = dict[int, int]


class MatchBudgetExceeded(Exception):
    """The search hit its expansion budget before reaching a decision."""

    def __init__(self, message: str, expansions: int):
        super().__init__(message)
        self.expansions = expansions


class MatchSizeError(ValueError):
    """A graph is too large for brute-force enumeration."""


class MatchStatus(str, Enum):
    MATCHED = "matched"
    NO_MATCH = "no_match"
    INCONCLUSIVE = "inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class MatchResult:
    """Outcome of one template/target search."""
    status: MatchStatus
    mapping: Optional[Mapping] = None
    expansions: int = field(default=0, compare=False)

    @property
    def matched(self) -> bool:
        return self.status == MatchStatus.MATCHED


def node_compatible(template_block: BasicBlock, target_block: BasicBlock) -> bool:
    """True iff both blocks have the same pattern sequence, in the same order."""
    return template_block.pattern_seq == target_block.pattern_seq


class _BudgetedMatcher(DiGraphMatcher):
    """
    VF2 with a cap on candidate pair expansions and a degree filter.

    G1 is the target and G2 the template, so every G2 node needs a G1 node
    with at least its in- and out-degree.
    """

    def __init__(self, target, template, node_match, budget: int):
        super().__init__(target, template, node_match=node_match)
        self.budget = budget
        self.expansions = 0

    def syntactic_feasibility(self, G1_node, G2_node):
        self.expansions += 1
        if self.expansions > self.budget:
            raise MatchBudgetExceeded(
                f"match search exceeded {self.budget} expansions", self.expansions
            )
        if self.G1.in_degree(G1_node) < self.G2.in_degree(G2_node):
            return False
        if self.G1.out_degree(G1_node) < self.G2.out_degree(G2_node):
            return False
        return super().syntactic_feasibility(G1_node, G2_node)


def _patterns_equal(target_attrs: dict, template_attrs: dict) -> bool:
    return target_attrs.get("patterns") == template_attrs.get("patterns")


def match_acfg(
    template: ACFG,
    target: ACFG,
    use_patterns: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> MatchResult:
    """
    Search for a subgraph of ``target`` isomorphic to ``template``.

    Returns a MatchResult whose status is MATCHED (with the template->target
    mapping), NO_MATCH, or INCONCLUSIVE when the expansion budget ran out.
    """
    if budget <= 0:
        raise ValueError("Match budget must be positive")
    if not template.blocks:
        return MatchResult(MatchStatus.MATCHED, {}, 0)
    if len(template.blocks) > len(target.blocks) or len(template.edges) > len(target.edges):
        return MatchResult(MatchStatus.NO_MATCH, None, 0)

    matcher = _BudgetedMatcher(
        target.to_digraph(),
        template.to_digraph(),
        node_match=_patterns_equal if use_patterns else None,
        budget=budget,
    )
    try:
        found = next(matcher.subgraph_monomorphisms_iter(), None)
    except MatchBudgetExceeded:
        logger.warning(
            f"match {template.name} -> {target.name}: inconclusive after {matcher.expansions} expansions"
        )
        return MatchResult(MatchStatus.INCONCLUSIVE, None, matcher.expansions)

    if found is None:
        return MatchResult(MatchStatus.NO_MATCH, None, matcher.expansions)
    mapping = {template_id: target_id for target_id, template_id in found.items()}
    return MatchResult(MatchStatus.MATCHED, dict(sorted(mapping.items())), matcher.expansions)


def subgraph_match(
    template: ACFG,
    target: ACFG,
    use_patterns: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> Optional[Mapping]:
    """
    The mapping witnessing a match, or None.

    Raises:
        MatchBudgetExceeded: If the search was cut off, so neither answer is known.
    """
    result = match_acfg(template, target, use_patterns, budget)
    if result.status == MatchStatus.INCONCLUSIVE:
        raise MatchBudgetExceeded(
            f"match {template.name} -> {target.name} exceeded {budget} expansions", result.expansions
        )
    return result.mapping


def verify_mapping(template: ACFG, target: ACFG, mapping: Mapping, use_patterns: bool = True) -> bool:
    """Check that ``mapping`` is total, injective, edge preserving and (optionally) pattern compatible."""
    if set(mapping) != {b.id for b in template.blocks}:
        return False
    if len(set(mapping.values())) != len(mapping):
        return False
    if any(not 0 <= t < len(target.blocks) for t in mapping.values()):
        return False
    target_edges = set(target.edges)
    if any((mapping[s], mapping[d]) not in target_edges for s, d in template.edges):
        return False
    if use_patterns:
        return all(node_compatible(template.blocks[t], target.blocks[g]) for t, g in mapping.items())
    return True


def brute_force_match(template: ACFG, target: ACFG, use_patterns: bool = True) -> Optional[Mapping]:
    """
    Exhaustive search over all injections, lowest target ids first.

    Raises:
        MatchSizeError: If either graph has more than 8 blocks.
    """
    for graph in (template, target):
        if len(graph.blocks) > BRUTE_FORCE_LIMIT:
            raise MatchSizeError(
                f"brute force matching supports at most {BRUTE_FORCE_LIMIT} blocks, "
                f"{graph.name} has {len(graph.blocks)}"
            )
    n = len(template.blocks)
    target_edges = set(target.edges)
    for image in permutations(range(len(target.blocks)), n):
        if use_patterns and not all(
            node_compatible(template.blocks[i], target.blocks[image[i]]) for i in range(n)
        ):
            continue
        if all((image[s], image[d]) in target_edges for s, d in template.edges):
            return dict(enumerate(image))
    return None
