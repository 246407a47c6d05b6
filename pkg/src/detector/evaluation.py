"""
Evaluation harness: k-round cross-validation and threshold sweeps.

Each cross-validation round trains a store on a seeded random selection of
malware samples, disjoint from the other rounds' selections, and scores
every remaining sample. Rates are None when a round has no sample of the
relevant class.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from statistics import mean
from typing import Optional, Sequence

from ..config import check_threshold
from ..matcher import DEFAULT_BUDGET
from .detect import DetectionReport, Verdict, detect_exact, detect_threshold
from .samples import LABELS, SampleGraphs
from .store import MalwareTemplate, TemplateStore

logger = logging.getLogger(__name__)


def _rate(hits: int, total: int) -> Optional[float]:
    return hits / total if total else None


def _fmt(rate: Optional[float]) -> str:
    return "n/a" if rate is None else f"{rate:.4f}"


@dataclass(frozen=True)
class FoldResult:
    """Counts and rates for one training/testing round."""
    fold: int
    templates: tuple[str, ...]
    malware_tested: int
    detected: int
    benign_tested: int
    false_positives: int
    inconclusive: int = 0

    @property
    def detection_rate(self) -> Optional[float]:
        return _rate(self.detected, self.malware_tested)

    @property
    def fp_rate(self) -> Optional[float]:
        return _rate(self.false_positives, self.benign_tested)


@dataclass(frozen=True)
class CVReport:
    """Per-round and aggregate results of a cross-validation run."""
    folds: int
    train_size: int
    threshold: float
    seed: int
    mode: str
    use_patterns: bool
    rounds: tuple[FoldResult, ...]

    @property
    def detection_rate(self) -> Optional[float]:
        rates = [r.detection_rate for r in self.rounds if r.detection_rate is not None]
        return mean(rates) if rates else None

    @property
    def fp_rate(self) -> Optional[float]:
        rates = [r.fp_rate for r in self.rounds if r.fp_rate is not None]
        return mean(rates) if rates else None

    def to_text(self) -> str:
        lines = [
            f"folds={self.folds} train_size={self.train_size} mode={self.mode} "
            f"threshold={self.threshold} patterns={'on' if self.use_patterns else 'off'} seed={self.seed}",
            "fold\tdetected\tmalware\tdetection_rate\tfalse_pos\tbenign\tfp_rate\tinconclusive",
        ]
        for r in self.rounds:
            lines.append(
                f"{r.fold}\t{r.detected}\t{r.malware_tested}\t{_fmt(r.detection_rate)}\t"
                f"{r.false_positives}\t{r.benign_tested}\t{_fmt(r.fp_rate)}\t{r.inconclusive}"
            )
        lines.append(f"mean\t\t\t{_fmt(self.detection_rate)}\t\t\t{_fmt(self.fp_rate)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "train_size": self.train_size,
            "threshold": self.threshold,
            "seed": self.seed,
            "mode": self.mode,
            "use_patterns": self.use_patterns,
            "detection_rate": self.detection_rate,
            "fp_rate": self.fp_rate,
            "rounds": [
                {
                    "fold": r.fold,
                    "templates": list(r.templates),
                    "detected": r.detected,
                    "malware_tested": r.malware_tested,
                    "detection_rate": r.detection_rate,
                    "false_positives": r.false_positives,
                    "benign_tested": r.benign_tested,
                    "fp_rate": r.fp_rate,
                    "inconclusive": r.inconclusive,
                }
                for r in self.rounds
            ],
        }


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    detection_rate: Optional[float]
    fp_rate: Optional[float]


def _check_labels(samples: Sequence[SampleGraphs], labels: Sequence[str]) -> None:
    if len(samples) != len(labels):
        raise ValueError(f"{len(samples)} samples but {len(labels)} labels")
    bad = sorted({label for label in labels if label not in LABELS})
    if bad:
        raise ValueError(f"Unknown label(s): {', '.join(bad)}. Use 'malware' or 'benign'")


def _classify(
    store: TemplateStore,
    sample: SampleGraphs,
    mode: str,
    threshold: float,
    use_patterns: bool,
    budget: int,
) -> DetectionReport:
    if mode == "exact":
        return detect_exact(store, sample, use_patterns, budget)
    return detect_threshold(store, sample, threshold, use_patterns, budget)


def cross_validate(
    samples: Sequence[SampleGraphs],
    labels: Sequence[str],
    k: int = 10,
    train_size: int = 25,
    threshold: float = 0.25,
    seed: int = 0,
    use_patterns: bool = True,
    budget: int = DEFAULT_BUDGET,
    mode: str = "threshold",
) -> CVReport:
    """
    Run ``k`` rounds of train-on-malware, test-on-the-rest.

    Round i trains on the i-th block of ``train_size`` malware samples of a
    seeded shuffle, so training sets are disjoint and reruns with the same
    seed are identical.

    Raises:
        ValueError: If k < 2, the labels do not line up with the samples,
            or k * train_size exceeds the number of malware samples.
    """
    if k < 2:
        raise ValueError(f"Cross-validation needs at least 2 folds, got {k}")
    if train_size < 0:
        raise ValueError(f"Training size must not be negative, got {train_size}")
    if mode not in ("exact", "threshold"):
        raise ValueError(f"Unknown detection mode: {mode!r}. Use 'exact' or 'threshold'")
    check_threshold(threshold)
    _check_labels(samples, labels)

    malware = [i for i, label in enumerate(labels) if label == "malware"]
    if k * train_size > len(malware):
        raise ValueError(
            f"Insufficient samples: {k} folds of {train_size} need {k * train_size} "
            f"malware samples, have {len(malware)}"
        )

    order = list(malware)
    random.Random(seed).shuffle(order)

    rounds = []
    for fold in range(k):
        train = set(order[fold * train_size:(fold + 1) * train_size])
        store = TemplateStore(MalwareTemplate.from_graphs(samples[i]) for i in sorted(train))
        detected = false_positives = inconclusive = malware_tested = benign_tested = 0
        for i, sample in enumerate(samples):
            if i in train:
                continue
            verdict = _classify(store, sample, mode, threshold, use_patterns, budget).verdict
            if verdict == Verdict.INCONCLUSIVE:
                inconclusive += 1
            if labels[i] == "malware":
                malware_tested += 1
                detected += verdict == Verdict.MALWARE
            else:
                benign_tested += 1
                false_positives += verdict == Verdict.MALWARE
        result = FoldResult(
            fold=fold,
            templates=tuple(samples[i].name for i in sorted(train)),
            malware_tested=malware_tested,
            detected=detected,
            benign_tested=benign_tested,
            false_positives=false_positives,
            inconclusive=inconclusive,
        )
        logger.info(
            f"fold {fold}: detection {_fmt(result.detection_rate)}, false positives {_fmt(result.fp_rate)}"
        )
        rounds.append(result)

    return CVReport(
        folds=k,
        train_size=train_size,
        threshold=threshold,
        seed=seed,
        mode=mode,
        use_patterns=use_patterns,
        rounds=tuple(rounds),
    )


def sweep_threshold(
    store: TemplateStore,
    samples: Sequence[SampleGraphs],
    labels: Sequence[str],
    thresholds: Sequence[float],
    use_patterns: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> list[SweepRow]:
    """
    Detection and false-positive rates of threshold mode at each threshold.

    Every sample is matched once; its best template fraction is then
    compared with each threshold, so the detection-rate column cannot
    increase with the threshold.

    Raises:
        ValueError: If a threshold lies outside (0, 1] or labels do not line up.
    """
    for t in thresholds:
        check_threshold(t)
    _check_labels(samples, labels)

    fractions = [
        detect_threshold(store, sample, 1.0, use_patterns, budget).fraction
        for sample in samples
    ]
    malware = [f for f, label in zip(fractions, labels) if label == "malware"]
    benign = [f for f, label in zip(fractions, labels) if label == "benign"]

    rows = []
    for t in thresholds:
        rows.append(SweepRow(
            threshold=t,
            detection_rate=_rate(sum(f >= t for f in malware), len(malware)),
            fp_rate=_rate(sum(f >= t for f in benign), len(benign)),
        ))
    return rows


def render_sweep(rows: Sequence[SweepRow]) -> str:
    lines = ["threshold\tdetection_rate\tfp_rate"]
    lines.extend(f"{r.threshold}\t{_fmt(r.detection_rate)}\t{_fmt(r.fp_rate)}" for r in rows)
    return "\n".join(lines) + "\n"
