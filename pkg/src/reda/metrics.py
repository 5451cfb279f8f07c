"""Evaluation: windowed tonal similarity, one-sample t statistics for the
discrimination test, and survey mean aggregation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RedaError
from .midi import Score

WINDOW_BEATS = 2
HOP_BEATS = 1
T_THRESHOLD = 1.67  # one-tailed, alpha = 0.05, df = 60


@dataclass(frozen=True)
class SimilarityReport:
    window_values: tuple
    aggregate: float
    skipped_windows: int
    window_beats: int = WINDOW_BEATS
    hop_beats: int = HOP_BEATS

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate,
            "windows": list(self.window_values),
            "skipped_windows": self.skipped_windows,
            "window_beats": self.window_beats,
            "hop_beats": self.hop_beats,
        }


@dataclass(frozen=True)
class TTestResult:
    n: int
    mean: float
    sd: float
    t_value: float
    df: int
    threshold: float
    rejected: bool

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "sd": self.sd,
                "t_value": self.t_value, "df": self.df,
                "threshold": self.threshold, "rejected": self.rejected}


def _window_histogram(notes, start: int, end: int) -> np.ndarray:
    hist = np.zeros(12)
    for n in notes:
        overlap = min(n.offset, end) - max(n.onset, start)
        if overlap > 0:
            hist[n.pitch % 12] += overlap
    return hist


def tonal_similarity(original: Score, reduced: Score) -> SimilarityReport:
    """Mean cosine similarity of duration-weighted pitch-class histograms
    over sliding two-beat windows (hop one beat).

    Windows empty in both scores are skipped; a window empty in exactly
    one score counts as 0.
    """
    if original.ppq != reduced.ppq:
        raise RedaError("scores must share a tick base")
    beat = original.ppq
    notes_a = original.all_notes()
    notes_b = reduced.all_notes()
    last = max([n.offset for n in notes_a + notes_b], default=0)
    if last == 0:
        raise RedaError("both scores are empty; no windows to compare")
    values = []
    skipped = 0
    start = 0
    while start < last:
        end = start + WINDOW_BEATS * beat
        ha = _window_histogram(notes_a, start, end)
        hb = _window_histogram(notes_b, start, end)
        na, nb = np.linalg.norm(ha), np.linalg.norm(hb)
        if na == 0 and nb == 0:
            skipped += 1
        elif na == 0 or nb == 0:
            values.append(0.0)
        else:
            values.append(float(np.dot(ha, hb) / (na * nb)))
        start += HOP_BEATS * beat
    if not values:
        raise RedaError("no non-empty windows to compare")
    return SimilarityReport(tuple(values), float(np.mean(values)), skipped)


def one_sample_ttest(samples: Sequence[int], null_mean: float = 0.5,
                     threshold: float = T_THRESHOLD) -> TTestResult:
    """One-tailed one-sample t statistic with Bessel-corrected sd."""
    n = len(samples)
    if n < 2:
        raise RedaError("need at least two samples")
    arr = np.asarray(samples, dtype=float)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    if sd == 0.0:
        raise RedaError("zero variance: t statistic undefined")
    t = (mean - null_mean) / (sd / math.sqrt(n))
    return TTestResult(n=n, mean=mean, sd=sd, t_value=t, df=n - 1,
                       threshold=threshold, rejected=t > threshold)


def survey_means(responses: Sequence[Sequence[float]]) -> list[float]:
    """Per-criterion means of a (respondent x criterion) rating matrix."""
    if not responses:
        raise RedaError("empty response set")
    arr = np.asarray(responses, dtype=float)
    if arr.ndim != 2:
        raise RedaError("responses must form a rectangular matrix")
    if np.any(arr < 1) or np.any(arr > 5):
        raise RedaError("ratings must lie in [1, 5]")
    return [float(v) for v in arr.mean(axis=0)]
