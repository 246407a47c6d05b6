"""
Detection report rendering: aligned text lines or a JSON-lines record stream.
"""

from __future__ import annotations

import json
from typing import Sequence

from .detect import DetectionReport


def render_text(reports: Sequence[DetectionReport], witnesses: bool = False) -> str:
    """One line per sample: name, verdict, best template, matched fraction."""
    lines = []
    for report in reports:
        best = report.best
        lines.append(
            f"{report.sample}\t{report.verdict}\t{best.template if best else '-'}\t{report.fraction:.4f}"
        )
        if witnesses:
            for ev in report.evidence:
                for w in ev.witnesses:
                    lines.append(f"  {ev.template}: {w.describe()}")
    return "\n".join(lines) + ("\n" if lines else "")


def render_records(reports: Sequence[DetectionReport]) -> str:
    """One JSON object per line, keys sorted."""
    return "".join(json.dumps(r.to_record(), sort_keys=True) + "\n" for r in reports)
