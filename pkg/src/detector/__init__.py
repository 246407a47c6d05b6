"""
Malware detection by ACFG matching.

Template store, exact and threshold classification, and the evaluation
harness.
"""

from .detect import (
    DetectionReport,
    TemplateEvidence,
    Verdict,
    Witness,
    detect,
    detect_exact,
    detect_threshold,
    scan_corpus,
)
from .evaluation import CVReport, FoldResult, SweepRow, cross_validate, render_sweep, sweep_threshold
from .report import render_records, render_text
from .samples import (
    CorpusEntry,
    ManifestError,
    SampleGraphs,
    graphs_from_program,
    load_corpus,
    load_corpus_manifest,
    prepare_sample,
)
from .store import (
    MalwareTemplate,
    StoreFormatError,
    TemplateSource,
    TemplateStore,
    build_templates,
)

__all__ = [
    "CVReport",
    "CorpusEntry",
    "DetectionReport",
    "FoldResult",
    "MalwareTemplate",
    "ManifestError",
    "SampleGraphs",
    "StoreFormatError",
    "SweepRow",
    "TemplateEvidence",
    "TemplateSource",
    "TemplateStore",
    "Verdict",
    "Witness",
    "build_templates",
    "cross_validate",
    "detect",
    "detect_exact",
    "detect_threshold",
    "graphs_from_program",
    "load_corpus",
    "load_corpus_manifest",
    "prepare_sample",
    "render_records",
    "render_sweep",
    "render_text",
    "scan_corpus",
    "sweep_threshold",
]
