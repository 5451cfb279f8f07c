"""Melody channel selection and skyline melody/bass extraction.

skyline_top keeps, at every instant, the highest sounding pitch (the
improved variant: an interrupted lower note is cut at the interrupting
note's onset and resumes only via a new segment when it is the highest
line again). skyline_bottom is the mirror for the bass.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .errors import RedaError
from .midi import Note, Score, PERCUSSION_CHANNEL

MELODY_WEIGHTS = (0.5, 0.3, 0.2)  # mean pitch, bar coverage, pitch variety


def _merge_same_pitch(notes: Sequence[Note]) -> list[Note]:
    """Union overlapping (or touching) intervals of equal pitch."""
    by_pitch: dict[int, list[Note]] = {}
    for n in notes:
        by_pitch.setdefault(n.pitch, []).append(n)
    merged: list[Note] = []
    for pitch, group in by_pitch.items():
        group.sort(key=lambda n: n.onset)
        cur = group[0]
        for n in group[1:]:
            if n.onset <= cur.offset:
                if n.offset > cur.offset:
                    cur = replace(cur, duration=n.offset - cur.onset)
            else:
                merged.append(cur)
                cur = n
        merged.append(cur)
    merged.sort(key=lambda n: (n.onset, n.pitch))
    return merged


def _skyline(notes: Sequence[Note], top: bool) -> list[Note]:
    notes = _merge_same_pitch(notes)
    if not notes:
        return []
    boundaries = sorted({t for n in notes for t in (n.onset, n.offset)})
    pick = max if top else min
    segments: list[tuple[int, int, Note]] = []  # (start, end, source note)
    idx = 0
    active: list[Note] = []
    for start, end in zip(boundaries, boundaries[1:]):
        while idx < len(notes) and notes[idx].onset <= start:
            active.append(notes[idx])
            idx += 1
        active = [n for n in active if n.offset > start]
        if active:
            best = pick(active, key=lambda n: n.pitch)
            segments.append((start, end, best))
    # merge contiguous segments stemming from the same source note
    out: list[Note] = []
    merged: list[list] = []
    for start, end, src in segments:
        if merged and merged[-1][2] is src and merged[-1][1] == start:
            merged[-1][1] = end
        else:
            merged.append([start, end, src])
    for start, end, src in merged:
        out.append(replace(src, onset=start, duration=end - start, track_index=0))
    return out


def skyline_top(notes: Sequence[Note]) -> list[Note]:
    """Monophonic top line: at every sounding tick, the maximum pitch."""
    return _skyline(notes, top=True)


def skyline_bottom(notes: Sequence[Note]) -> list[Note]:
    """Monophonic bottom line: at every sounding tick, the minimum pitch."""
    return _skyline(notes, top=False)


def select_melody_track(score: Score, weights: Sequence[float] = MELODY_WEIGHTS) -> int:
    """Pick the most melody-like track.

    Track score = w0 * normalized mean pitch + w1 * normalized bar
    coverage + w2 * normalized pitch variety; components are normalized
    by their maximum over candidate tracks. Ties break to the lowest
    track index.
    """
    candidates = []
    for i, track in enumerate(score.tracks):
        pitched = [n for n in track if n.channel != PERCUSSION_CHANNEL]
        if pitched:
            candidates.append((i, pitched))
    if not candidates:
        raise RedaError("score has no pitched tracks")
    total_bars = max(score.num_bars(), 1)
    bar_ticks = score.bar_ticks
    stats = []
    for i, pitched in candidates:
        mean_pitch = sum(n.pitch for n in pitched) / len(pitched)
        coverage = len({n.onset // bar_ticks for n in pitched}) / total_bars
        variety = len({n.pitch for n in pitched})
        stats.append((i, mean_pitch, coverage, variety))
    maxes = [max(s[d + 1] for s in stats) or 1 for d in range(3)]
    best_index, best_score = None, None
    for i, *components in stats:
        value = sum(w * c / m for w, c, m in zip(weights, components, maxes))
        if best_score is None or value > best_score + 1e-12:
            best_index, best_score = i, value
    return best_index
