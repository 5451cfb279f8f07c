"""Rule-based reduction baseline: skyline melody for the right hand and
an accompaniment database mined from hand-separated piano scores for the
left hand."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import RedaError
from .midi import (Note, Score, SUBBEATS_PER_BAR, DEFAULT_PPQ,
                   merge_to_single_channel, quantize)
from .skyline import select_melody_track, skyline_top

PIANO_LOW = 21
PIANO_HIGH = 108
CHORD_MASS_THRESHOLD = 0.20
ROOT_OCTAVE_LOW = 36  # realized roots sit in MIDI [36, 47]

# match_accompaniment weights: pcs hit reward, pcs miss penalty, density penalty
MATCH_WEIGHTS = (2.0, 1.0, 0.5)


@dataclass(frozen=True)
class AccompanimentEntry:
    rhythm: tuple            # sorted ((position, duration_subbeats), ...)
    degrees: tuple           # per-slot semitone offsets from the bar root
    pitch_classes: frozenset  # classes present in the source bar
    density: int
    count: int = 1
    source_id: str = ""

    def realized_classes(self, root_pc: int) -> frozenset:
        return frozenset((root_pc + d) % 12 for d in self.degrees)


@dataclass(frozen=True)
class AccompanimentDB:
    entries: tuple = ()
    index: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_entries(cls, entries: Sequence[AccompanimentEntry]) -> "AccompanimentDB":
        index: dict = {}
        for e in entries:
            key = (min(e.density, 8), hash(e.pitch_classes))
            index.setdefault(key, []).append(e)
        return cls(entries=tuple(entries), index=index)


def _left_hand_track(score: Score) -> Optional[int]:
    tracks = [(i, t) for i, t in enumerate(score.tracks) if t]
    if len(tracks) < 2:
        return None
    means = [(sum(n.pitch for n in t) / len(t), i) for i, t in tracks]
    return min(means)[1]


def build_accomp_db(pianos: Iterable[tuple[str, Score]]):
    """Mine one entry per non-empty left-hand bar; duplicates are counted.

    Returns (AccompanimentDB, skipped) where skipped lists (id, reason)
    for scores without two usable tracks.
    """
    raw: dict[tuple, list] = {}  # (rhythm, degrees) -> [count, entry fields]
    skipped: list[tuple[str, str]] = []
    for piece_id, score in pianos:
        lh = _left_hand_track(score)
        if lh is None:
            skipped.append((piece_id, "needs two non-empty tracks for hand separation"))
            continue
        lh_score = Score(ppq=score.ppq, tracks=(score.tracks[lh],),
                         time_signature=score.time_signature)
        q = quantize(lh_score)
        for bar in q.bars:
            if not bar:
                continue
            root = min(n.pitch for n in bar)
            # slots sorted jointly so rhythm[i] stays paired with degrees[i]
            slots = sorted((n.position, n.duration, n.pitch - root) for n in bar)
            rhythm = tuple((p, d) for p, d, _ in slots)
            degrees = tuple(g for _, _, g in slots)
            key = (rhythm, degrees)
            if key in raw:
                raw[key][0] += 1
            else:
                pcs = frozenset(n.pitch % 12 for n in bar)
                raw[key] = [1, pcs, len(bar), piece_id]
    entries = [
        AccompanimentEntry(rhythm=rhythm, degrees=degrees, pitch_classes=pcs,
                           density=density, count=count, source_id=src)
        for (rhythm, degrees), (count, pcs, density, src) in raw.items()
    ]
    entries.sort(key=lambda e: (-e.count, e.source_id, e.rhythm, e.degrees))
    return AccompanimentDB.from_entries(entries), skipped


def detect_bar_chord(bar_notes: Sequence) -> tuple[Optional[int], frozenset]:
    """Duration-weighted chord estimate for one quantized bar.

    Returns (root pitch class or None, pitch-class set with >= 20% of the
    bar's duration mass).
    """
    if not bar_notes:
        return None, frozenset()
    mass: dict[int, float] = {}
    total = 0.0
    for n in bar_notes:
        mass[n.pitch % 12] = mass.get(n.pitch % 12, 0.0) + n.duration
        total += n.duration
    pcs = frozenset(pc for pc, m in mass.items() if m / total >= CHORD_MASS_THRESHOLD)
    downbeat = [n for n in bar_notes if n.position == 0]
    root_note = min(downbeat, key=lambda n: n.pitch) if downbeat \
        else min(bar_notes, key=lambda n: n.pitch)
    return root_note.pitch % 12, pcs


def match_accompaniment(db: AccompanimentDB, bar_chord: tuple,
                        target_density: int,
                        weights: Sequence[float] = MATCH_WEIGHTS) -> AccompanimentEntry:
    """Best entry for a bar: reward realized pitch classes inside the bar's
    chord, penalize extraneous classes and density mismatch."""
    if not db.entries:
        raise RedaError("accompaniment database is empty")
    root, pcs = bar_chord
    w_hit, w_miss, w_density = weights
    best, best_key = None, None
    for e in db.entries:
        if root is None:
            value = -w_density * abs(e.density - target_density)
        else:
            realized = e.realized_classes(root)
            value = (w_hit * len(realized & pcs)
                     - w_miss * len(realized - pcs)
                     - w_density * abs(e.density - target_density))
        key = (value, e.count, e.source_id)
        if best_key is None or key > best_key:
            best, best_key = e, key
    return best


def realize_entry(entry: AccompanimentEntry, root_pc: int, bar_index: int,
                  ppq: int = DEFAULT_PPQ) -> list[Note]:
    """Place an entry at the bar's root, root pitch in MIDI [36, 47]."""
    subbeat = ppq // 4
    root_pitch = ROOT_OCTAVE_LOW + (root_pc % 12)
    bar_start = bar_index * SUBBEATS_PER_BAR * subbeat
    notes = []
    for (position, duration), degree in zip(entry.rhythm, entry.degrees):
        pitch = min(max(root_pitch + degree, PIANO_LOW), PIANO_HIGH)
        notes.append(Note(pitch, bar_start + position * subbeat,
                          duration * subbeat, track_index=1))
    return notes


def reduce_dbm(orchestra: Score, db: AccompanimentDB,
               ppq: int = DEFAULT_PPQ) -> Score:
    """Two-track piano reduction: RH = skyline melody, LH = matched
    accompaniment bars."""
    melody_idx = select_melody_track(orchestra)
    melody = skyline_top(orchestra.tracks[melody_idx])
    merged = merge_to_single_channel(orchestra)
    q = quantize(merged)

    subbeat_src = orchestra.ppq / 4.0
    scale = (ppq // 4) / subbeat_src
    rh = []
    for n in melody:
        pitch = min(max(n.pitch, PIANO_LOW), PIANO_HIGH)
        rh.append(Note(pitch, round(n.onset * scale), max(round(n.duration * scale), 1)))
    rh.sort(key=lambda n: (n.onset, n.pitch))

    lh: list[Note] = []
    for bar_index, bar in enumerate(q.bars):
        if not bar:
            continue
        root, pcs = detect_bar_chord(bar)
        entry = match_accompaniment(db, (root, pcs), target_density=min(len(bar), 8))
        lh.extend(realize_entry(entry, root if root is not None else 0, bar_index, ppq))
    lh.sort(key=lambda n: (n.onset, n.pitch))

    return Score(ppq=ppq, tracks=(tuple(rh), tuple(lh)),
                 time_signature=((0, 4, 4),))


# ---------------------------------------------------------------------------
# Persistence

def save_db(db: AccompanimentDB, path) -> None:
    doc = {"entries": [
        {"rhythm": [list(s) for s in e.rhythm], "degrees": list(e.degrees),
         "pcs": sorted(e.pitch_classes), "count": e.count, "source": e.source_id}
        for e in db.entries
    ]}
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_db(path) -> AccompanimentDB:
    with open(path) as fh:
        doc = json.load(fh)
    entries = [
        AccompanimentEntry(
            rhythm=tuple(tuple(s) for s in item["rhythm"]),
            degrees=tuple(item["degrees"]),
            pitch_classes=frozenset(item["pcs"]),
            density=len(item["rhythm"]),
            count=item.get("count", 1),
            source_id=item.get("source", ""),
        )
        for item in doc["entries"]
    ]
    return AccompanimentDB.from_entries(entries)
