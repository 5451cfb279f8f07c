"""Iterative cleanup of two-hand scores: per-beat KDE hand clustering,
duration/voicing simplification and octave transposition, run to fixpoint."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .midi import Note, Score

KDE_GRID_STEP = 0.1
KDE_INITIAL_BANDWIDTH = 32.0
KDE_DECAY = 0.9
KDE_BANDWIDTH_FLOOR = 0.5
FAR_THRESHOLD = 12          # semitones from the hand centre before moving
HAND_GAP_LIMIT = 18         # max single-linkage gap between hands
MAX_SIMULTANEOUS = 4
MAX_DURATION_BEATS = 4
SPLIT_PITCH = 60            # single-cluster beats below this go to the left hand


@dataclass(frozen=True)
class BeatAssignment:
    left_centre: Optional[float]
    right_centre: Optional[float]
    tags: tuple  # 'L' | 'R' per input pitch

    def centre(self, hand: str) -> Optional[float]:
        return self.left_centre if hand == "L" else self.right_centre


def _kde(pitches: np.ndarray, bandwidth: float, grid: np.ndarray) -> np.ndarray:
    z = (grid[:, None] - pitches[None, :]) / bandwidth
    return np.exp(-0.5 * z * z).sum(axis=1)


def _strict_peaks(density: np.ndarray) -> np.ndarray:
    interior = (density[1:-1] > density[:-2]) & (density[1:-1] > density[2:])
    return np.nonzero(interior)[0] + 1


def cluster_beat(pitches: Sequence[int],
                 initial_bandwidth: float = KDE_INITIAL_BANDWIDTH,
                 decay: float = KDE_DECAY,
                 floor: float = KDE_BANDWIDTH_FLOOR) -> BeatAssignment:
    """Split one beat's pitches into left/right hands.

    A Gaussian KDE on a 0.1-semitone grid is evaluated with a shrinking
    bandwidth until exactly two strict local maxima appear; the lower
    peak is the left hand's centre. If two peaks never appear, the beat
    forms one cluster (left if its peak is below middle C's 60).
    """
    if not pitches:
        raise ValueError("cluster_beat needs at least one pitch")
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must lie in (0, 1)")
    arr = np.asarray(pitches, dtype=float)
    grid = np.arange(0.0, 127.0 + KDE_GRID_STEP, KDE_GRID_STEP)
    bandwidth = initial_bandwidth
    while bandwidth >= floor:
        peaks = _strict_peaks(_kde(arr, bandwidth, grid))
        if len(peaks) == 2:
            lo, hi = sorted(grid[peaks])
            mid = (lo + hi) / 2.0
            tags = tuple("L" if p <= mid else "R" for p in pitches)
            return BeatAssignment(lo, hi, tags)
        bandwidth *= decay
    # never split: one cluster on the fallback side
    peak = float(np.median(arr))
    if peak < SPLIT_PITCH:
        return BeatAssignment(peak, None, tuple("L" for _ in pitches))
    return BeatAssignment(None, peak, tuple("R" for _ in pitches))


def assign_hands(score: Score, initial_bandwidth: float = KDE_INITIAL_BANDWIDTH,
                 decay: float = KDE_DECAY):
    """Cluster every beat of the score.

    Every note *sounding* during a beat enters that beat's density, so a
    sustained melody note keeps pulling later onsets toward the correct
    cluster; each note's own tag is decided at its onset beat.

    Returns (rh_notes, lh_notes, beat_assignments) where the note lists
    carry track_index 0/1 and beat_assignments maps beat index ->
    BeatAssignment.
    """
    notes = sorted(score.all_notes(), key=lambda n: (n.onset, n.pitch))
    beats: dict[int, list[Note]] = {}
    for n in notes:
        for beat in range(n.onset // score.ppq,
                          (n.offset - 1) // score.ppq + 1):
            beats.setdefault(beat, []).append(n)
    rh, lh, assignments = [], [], {}
    for beat, group in sorted(beats.items()):
        assignment = cluster_beat([n.pitch for n in group],
                                  initial_bandwidth, decay)
        assignments[beat] = assignment
        for n, tag in zip(group, assignment.tags):
            if n.onset // score.ppq != beat:
                continue
            if tag == "L":
                lh.append(replace(n, track_index=1))
            else:
                rh.append(replace(n, track_index=0))
    return rh, lh, assignments


def _sounding(notes: list[Note], tick: int) -> list[Note]:
    return [n for n in notes if n.onset <= tick < n.offset]


def _thin_hand(notes: list[Note], hand: str, ppq: int) -> list[Note]:
    """Delete doubled notes wherever more than four notes sound at once."""
    notes = list(notes)
    changed = True
    while changed:
        changed = False
        for tick in sorted({n.onset for n in notes}):
            while True:
                sounding = _sounding(notes, tick)
                if len(sounding) <= MAX_SIMULTANEOUS:
                    break
                doubled = [
                    a for a in sounding
                    if any(b is not a and b.onset == a.onset
                           and b.pitch % 12 == a.pitch % 12 for b in sounding)
                ]
                if not doubled:
                    break
                # keep the outer voice: drop the lowest doubled note on the
                # right hand, the highest on the left
                victim = min(doubled, key=lambda n: n.pitch) if hand == "R" \
                    else max(doubled, key=lambda n: n.pitch)
                notes.remove(victim)
                changed = True
    return notes


def simplify(rh: Sequence[Note], lh: Sequence[Note], ppq: int):
    """Trim durations to four beats, then thin out doubled notes in
    over-dense moments of each hand."""
    max_dur = MAX_DURATION_BEATS * ppq
    rh = [replace(n, duration=min(n.duration, max_dur)) for n in rh]
    lh = [replace(n, duration=min(n.duration, max_dur)) for n in lh]
    return _thin_hand(rh, "R", ppq), _thin_hand(lh, "L", ppq)


def transpose(rh: Sequence[Note], lh: Sequence[Note], assignments: dict,
              ppq: int, far_threshold: int = FAR_THRESHOLD):
    """Move far-from-centre notes one octave toward their hand's centre.

    Right-hand notes never move down and left-hand notes never move up,
    and no move may leave the original global pitch bounds. If the two
    hands then sit more than 18 semitones apart (single linkage), the
    whole left hand moves up an octave.
    """
    all_pitches = [n.pitch for n in rh] + [n.pitch for n in lh]
    if not all_pitches:
        return list(rh), list(lh)
    lo, hi = min(all_pitches), max(all_pitches)

    def move(notes, hand):
        out = []
        for n in notes:
            assignment = assignments.get(n.onset // ppq)
            centre = assignment.centre(hand) if assignment else None
            pitch = n.pitch
            if centre is not None and abs(pitch - centre) > far_threshold:
                step = 12 if centre > pitch else -12
                allowed = (step > 0) if hand == "R" else (step < 0)
                if allowed and lo <= pitch + step <= hi:
                    pitch += step
            out.append(replace(n, pitch=pitch))
        return out

    rh2, lh2 = move(rh, "R"), move(lh, "L")
    if rh2 and lh2:
        gap = min(abs(l.pitch - r.pitch) for l in lh2 for r in rh2)
        if gap > HAND_GAP_LIMIT:
            lh2 = [replace(n, pitch=n.pitch + 12) for n in lh2]
    return rh2, lh2


@dataclass(frozen=True)
class PostprocessReport:
    iterations: int
    fixpoint: bool
    log: tuple  # "iter=<n> changed=<bool>" lines


def postprocess(score: Score, max_iters: int = 10,
                far_threshold: int = FAR_THRESHOLD,
                kde_bandwidth: float = KDE_INITIAL_BANDWIDTH,
                kde_decay: float = KDE_DECAY) -> tuple[Score, PostprocessReport]:
    """Run cluster -> simplify -> transpose until a pass changes nothing."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    current = score
    log = []
    fixpoint = False
    iterations = 0
    for i in range(1, max_iters + 1):
        iterations = i
        rh, lh, assignments = assign_hands(current, kde_bandwidth, kde_decay)
        rh, lh = simplify(rh, lh, current.ppq)
        rh, lh = transpose(rh, lh, assignments, current.ppq, far_threshold)
        rh.sort(key=lambda n: (n.onset, n.pitch))
        lh.sort(key=lambda n: (n.onset, n.pitch))
        nxt = Score(ppq=current.ppq, tracks=(tuple(rh), tuple(lh)),
                    time_signature=current.time_signature)
        changed = nxt.tracks != current.tracks
        log.append(f"iter={i} changed={changed}")
        current = nxt
        if not changed:
            fixpoint = True
            break
    return current, PostprocessReport(iterations, fixpoint, tuple(log))
