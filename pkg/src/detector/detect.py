"""
Sample classification against a template store.

Exact mode flags a sample when any template graph embeds in one of the
sample's graphs. Threshold mode scores each template by the fraction of its
function graphs that embed in some sample function graph and flags the
sample when the best fraction reaches the threshold.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Optional, Sequence

from ..cfg import ACFG
from ..config import DetectionConfig, check_threshold
from ..logging_config import sample_context
from ..matcher import DEFAULT_BUDGET, MatchStatus, match_acfg
from .samples import SampleGraphs
from .store import MalwareTemplate, TemplateStore

logger = logging.getLogger(__name__)

# (position in the owner's function list or None for the whole-program graph, graph)
_Indexed = tuple[Optional[int], ACFG]


class Verdict(str, Enum):
    MALWARE = "malware"
    BENIGN = "benign"
    INCONCLUSIVE = "inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Witness:
    """
    One template graph embedded in one sample graph.

    Indices are positions in the function lists; None stands for the
    whole-program graph.
    """
    template_index: Optional[int]
    sample_index: Optional[int]
    mapping: dict[int, int]

    def describe(self) -> str:
        def label(i: Optional[int]) -> str:
            return "program" if i is None else f"fn{i}"
        pairs = ", ".join(f"{t}->{s}" for t, s in self.mapping.items())
        return f"{label(self.template_index)} in {label(self.sample_index)} [{pairs}]"


@dataclass(frozen=True)
class TemplateEvidence:
    """How much of one template was found in the sample."""
    template: str
    matched: int
    total: int
    inconclusive: int = 0
    witnesses: tuple[Witness, ...] = ()

    @property
    def fraction(self) -> float:
        return self.matched / self.total if self.total else 0.0

    @property
    def upper_fraction(self) -> float:
        """The fraction if every inconclusive search had matched."""
        return (self.matched + self.inconclusive) / self.total if self.total else 0.0


@dataclass(frozen=True)
class DetectionReport:
    """The verdict on one sample and the evidence behind it."""
    sample: str
    verdict: Verdict
    mode: str
    threshold: Optional[float] = None
    evidence: tuple[TemplateEvidence, ...] = ()
    elapsed: float = field(default=0.0, compare=False)

    @property
    def best(self) -> Optional[TemplateEvidence]:
        """Evidence with the highest matched fraction (earliest template on ties), if any matched."""
        best: Optional[TemplateEvidence] = None
        for ev in self.evidence:
            if ev.matched and (best is None or ev.fraction > best.fraction):
                best = ev
        return best

    @property
    def fraction(self) -> float:
        best = self.best
        return best.fraction if best is not None else 0.0

    def to_record(self) -> dict:
        """The machine-readable record: name, verdict, best template, fraction."""
        best = self.best
        return {
            "sample": self.sample,
            "verdict": self.verdict.value,
            "best_template": best.template if best is not None else None,
            "fraction": round(self.fraction, 6),
        }


# =============================================================================
# Matching helpers
# =============================================================================

def _search(
    template_graph: ACFG,
    targets: Sequence[_Indexed],
    use_patterns: bool,
    budget: int,
) -> tuple[MatchStatus, Optional[tuple[Optional[int], dict[int, int]]]]:
    inconclusive = False
    for index, target in targets:
        result = match_acfg(template_graph, target, use_patterns, budget)
        if result.matched:
            return MatchStatus.MATCHED, (index, result.mapping or {})
        if result.status == MatchStatus.INCONCLUSIVE:
            inconclusive = True
    return (MatchStatus.INCONCLUSIVE if inconclusive else MatchStatus.NO_MATCH), None


def _score(
    template: MalwareTemplate,
    graphs: Sequence[_Indexed],
    targets: Sequence[_Indexed],
    use_patterns: bool,
    budget: int,
) -> TemplateEvidence:
    matched = inconclusive = 0
    witnesses: list[Witness] = []
    for template_index, graph in graphs:
        status, found = _search(graph, targets, use_patterns, budget)
        if status == MatchStatus.MATCHED:
            matched += 1
            witnesses.append(Witness(template_index, found[0], found[1]))
        elif status == MatchStatus.INCONCLUSIVE:
            inconclusive += 1
    return TemplateEvidence(template.name, matched, len(graphs), inconclusive, tuple(witnesses))


def _template_graphs(template: MalwareTemplate, granularity: str) -> list[_Indexed]:
    if granularity == "program":
        graphs = [(None, template.program)] if template.program is not None else []
    else:
        graphs = list(enumerate(template.acfgs))
    non_empty = [(i, g) for i, g in graphs if g.blocks]
    if len(non_empty) < len(graphs):
        logger.debug(f"template {template.name}: ignoring {len(graphs) - len(non_empty)} empty graph(s)")
    return non_empty


def _scored_templates(store: TemplateStore, granularity: str):
    for template in store:
        graphs = _template_graphs(template, granularity)
        if not graphs:
            logger.warning(f"template {template.name}: no graphs to match, excluded from scoring")
            continue
        yield template, graphs


# =============================================================================
# Detection
# =============================================================================

def detect_exact(
    store: TemplateStore,
    sample: SampleGraphs,
    use_patterns: bool = True,
    budget: int = DEFAULT_BUDGET,
    granularity: str = "function",
) -> DetectionReport:
    """
    Flag ``sample`` if any template graph matches one of its graphs.

    Args:
        store: Templates to match.
        sample: The sample's normalized graphs.
        use_patterns: Require equal pattern sequences on mapped blocks.
        budget: Matcher expansion budget per pair.
        granularity: "function" matches each template function graph against
            the sample's whole-program graph and each of its function graphs;
            "program" matches the template's whole-program graph against the
            sample's whole-program graph.

    Returns:
        A report whose verdict is malware iff some template graph matched,
        inconclusive iff none matched and some search ran out of budget.
    """
    if granularity not in ("function", "program"):
        raise ValueError(f"Unknown granularity: {granularity!r}. Use 'function' or 'program'")
    start = time.perf_counter()
    targets: list[_Indexed] = [(None, sample.program)]
    if granularity == "function":
        targets.extend(enumerate(sample.functions))

    evidence = tuple(
        _score(template, graphs, targets, use_patterns, budget)
        for template, graphs in _scored_templates(store, granularity)
    )
    if any(ev.matched for ev in evidence):
        verdict = Verdict.MALWARE
    elif any(ev.inconclusive for ev in evidence):
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.BENIGN

    report = DetectionReport(sample.name, verdict, "exact", None, evidence, time.perf_counter() - start)
    logger.info(f"{sample.name}: {verdict} (exact, {len(evidence)} template(s))")
    return report


def detect_threshold(
    store: TemplateStore,
    sample: SampleGraphs,
    threshold: float = 0.25,
    use_patterns: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> DetectionReport:
    """
    Flag ``sample`` if, for some template, at least ``threshold`` of the
    template's function graphs match some sample function graph.

    A sample function may serve as the match for several template functions.
    The verdict is inconclusive when no template reaches the threshold but
    one would if its budget-exhausted searches had matched.

    Raises:
        ValueError: If threshold is outside (0, 1].
    """
    check_threshold(threshold)
    start = time.perf_counter()
    targets: list[_Indexed] = list(enumerate(sample.functions))

    evidence = tuple(
        _score(template, graphs, targets, use_patterns, budget)
        for template, graphs in _scored_templates(store, "function")
    )
    if any(ev.fraction >= threshold for ev in evidence):
        verdict = Verdict.MALWARE
    elif any(ev.inconclusive and ev.upper_fraction >= threshold for ev in evidence):
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.BENIGN

    report = DetectionReport(sample.name, verdict, "threshold", threshold, evidence, time.perf_counter() - start)
    logger.info(f"{sample.name}: {verdict} (threshold {threshold}, best {report.fraction:.2f})")
    return report


def detect(store: TemplateStore, sample: SampleGraphs, config: Optional[DetectionConfig] = None) -> DetectionReport:
    """Run the detection mode named by ``config``."""
    config = config or DetectionConfig()
    with sample_context(sample.name):
        if config.mode == "exact":
            return detect_exact(store, sample, config.use_patterns, config.budget, config.granularity)
        return detect_threshold(store, sample, config.threshold, config.use_patterns, config.budget)


def scan_corpus(
    store: TemplateStore,
    samples: Sequence[SampleGraphs],
    config: Optional[DetectionConfig] = None,
) -> list[DetectionReport]:
    """
    Classify many samples, in parallel when ``config.workers`` > 1.

    Reports come back in input order. The store is only read.
    """
    config = config or DetectionConfig(workers=1)
    worker = partial(detect, store, config=config)
    if config.workers > 1 and len(samples) > 1:
        workers = min(config.workers, len(samples))
        logger.info(f"Scanning {len(samples)} samples with {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(worker, samples))
    return [worker(sample) for sample in samples]
