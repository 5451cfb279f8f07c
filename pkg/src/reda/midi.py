"""Standard MIDI File parsing/writing, grid quantization and corpus filtering.

Scores are immutable; every function here is pure. Only SMF types 0 and 1
are accepted; output files are always written as type 1.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Optional, Sequence

from .errors import MidiParseError, QuantizeError

PERCUSSION_CHANNEL = 9  # MIDI channel 10, zero-based
SUBBEATS_PER_BAR = 16
MAX_DURATION_SUBBEATS = 64
DEFAULT_PPQ = 480
DEFAULT_VELOCITY = 64


@dataclass(frozen=True, order=True)
class Note:
    pitch: int
    onset: int
    duration: int
    velocity: int = DEFAULT_VELOCITY
    track_index: int = 0
    channel: int = 0

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} out of MIDI range")
        if self.duration <= 0:
            raise ValueError("note duration must be positive")

    @property
    def offset(self) -> int:
        return self.onset + self.duration


@dataclass(frozen=True)
class Score:
    ppq: int
    tracks: tuple[tuple[Note, ...], ...]
    time_signature: tuple[tuple[int, int, int], ...] = ()  # (tick, num, den)
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def all_notes(self) -> list[Note]:
        return [n for track in self.tracks for n in track]

    @property
    def note_count(self) -> int:
        return sum(len(t) for t in self.tracks)

    @property
    def bar_ticks(self) -> int:
        return 4 * self.ppq

    def num_bars(self) -> int:
        notes = self.all_notes()
        if not notes:
            return 0
        last = max(n.offset for n in notes)
        return -(-last // self.bar_ticks)


@dataclass(frozen=True)
class QNote:
    position: int
    pitch: int
    duration: int  # sub-beats, 1..64
    tag: Any = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 <= self.position < SUBBEATS_PER_BAR:
            raise ValueError(f"position {self.position} outside bar grid")
        if not 1 <= self.duration <= MAX_DURATION_SUBBEATS:
            raise ValueError(f"duration {self.duration} sub-beats out of range")


@dataclass(frozen=True)
class QuantizedScore:
    bars: tuple[tuple[QNote, ...], ...]
    subbeats_per_bar: int = SUBBEATS_PER_BAR

    @property
    def num_bars(self) -> int:
        return len(self.bars)

    @property
    def note_count(self) -> int:
        return sum(len(b) for b in self.bars)


# ---------------------------------------------------------------------------
# SMF parsing

def _read_varlen(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise MidiParseError("truncated variable-length quantity", offset=pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity too long", offset=pos)


def _encode_varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def parse_midi(data: bytes) -> Score:
    """Parse an SMF type-0/1 file into a Score.

    Dangling note-ons are closed at track end and flagged in
    ``score.warnings``; overlapping same-pitch notes are paired
    first-in-first-closed.
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", offset=0)
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len < 6:
        raise MidiParseError("MThd chunk too short", offset=4)
    fmt, ntrks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported SMF format {fmt}", offset=8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", offset=12)
    if division == 0:
        raise MidiParseError("ticks-per-quarter must be positive", offset=12)

    pos = 8 + header_len
    tracks: list[tuple[Note, ...]] = []
    time_sigs: list[tuple[int, int, int]] = []
    warnings: list[str] = []

    for track_index in range(ntrks):
        if pos + 8 > len(data):
            raise MidiParseError("truncated track chunk header", offset=pos)
        if data[pos:pos + 4] != b"MTrk":
            raise MidiParseError("expected MTrk chunk", offset=pos)
        length = struct.unpack(">I", data[pos + 4:pos + 8])[0]
        start, end = pos + 8, pos + 8 + length
        if end > len(data):
            raise MidiParseError("truncated track chunk", offset=pos)
        notes, sigs, dangling = _parse_track(data, start, end, track_index)
        tracks.append(tuple(sorted(notes, key=lambda n: (n.onset, n.pitch))))
        time_sigs.extend(sigs)
        if dangling:
            warnings.append(f"track {track_index}: {dangling} dangling note-on(s) closed at track end")
        pos = end

    time_sigs.sort()
    return Score(ppq=division, tracks=tuple(tracks),
                 time_signature=tuple(time_sigs), warnings=tuple(warnings))


def _parse_track(data: bytes, pos: int, end: int, track_index: int):
    tick = 0
    running_status = None
    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}  # (ch, pitch) -> [(onset, vel)]
    notes: list[Note] = []
    time_sigs: list[tuple[int, int, int]] = []

    def close(channel: int, pitch: int, off_tick: int) -> bool:
        queue = open_notes.get((channel, pitch))
        if not queue:
            return False
        onset, vel = queue.pop(0)
        duration = max(off_tick - onset, 1)
        notes.append(Note(pitch, onset, duration, vel, track_index, channel))
        return True

    while pos < end:
        delta, pos = _read_varlen(data, pos)
        tick += delta
        if pos >= end:
            raise MidiParseError("event truncated", offset=pos)
        status = data[pos]
        if status & 0x80:
            pos += 1
            if status < 0xF0:
                running_status = status
        else:
            if running_status is None:
                raise MidiParseError("data byte without running status", offset=pos)
            status = running_status

        if status == 0xFF:
            meta_type = data[pos]
            length, pos = _read_varlen(data, pos + 1)
            payload = data[pos:pos + length]
            pos += length
            if meta_type == 0x58 and length >= 2:
                time_sigs.append((tick, payload[0], 1 << payload[1]))
            elif meta_type == 0x2F:
                break
        elif status in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos)
            pos += length
        else:
            kind = status & 0xF0
            channel = status & 0x0F
            if kind in (0x80, 0x90, 0xA0, 0xB0, 0xE0):
                if pos + 2 > end:
                    raise MidiParseError("truncated channel event", offset=pos)
                d1, d2 = data[pos], data[pos + 1]
                pos += 2
                if kind == 0x90 and d2 > 0:
                    open_notes.setdefault((channel, d1), []).append((tick, d2))
                elif kind == 0x80 or (kind == 0x90 and d2 == 0):
                    close(channel, d1, tick)
            elif kind in (0xC0, 0xD0):
                pos += 1
            else:
                raise MidiParseError(f"unexpected status byte 0x{status:02x}", offset=pos)

    dangling = sum(len(q) for q in open_notes.values())
    for (channel, pitch), queue in open_notes.items():
        for onset, vel in queue:
            notes.append(Note(pitch, onset, max(tick - onset, 1), vel, track_index, channel))
    return notes, time_sigs, dangling


# ---------------------------------------------------------------------------
# SMF writing

def write_midi(score: Score) -> bytes:
    """Serialize a Score as SMF type 1 at the score's PPQ.

    Round-trips: parse_midi(write_midi(s)) == s up to event order within
    a tick.
    """
    chunks = [struct.pack(">4sIHHH", b"MThd", 6, 1, len(score.tracks) or 1, score.ppq)]
    for i, track in enumerate(score.tracks or ((),)):
        events: list[tuple[int, int, bytes]] = []
        if i == 0:
            for tick, num, den in score.time_signature:
                events.append((tick, 0, bytes([0xFF, 0x58, 0x04, num, den.bit_length() - 1, 24, 8])))
        for note in track:
            on = bytes([0x90 | note.channel, note.pitch, note.velocity])
            off = bytes([0x80 | note.channel, note.pitch, 0])
            events.append((note.onset, 2, on))
            events.append((note.offset, 1, off))
        # note-offs sort before note-ons at the same tick so back-to-back
        # same-pitch notes re-pair correctly on parse
        events.sort(key=lambda e: (e[0], e[1]))
        body = bytearray()
        prev = 0
        for tick, _, payload in events:
            body += _encode_varlen(tick - prev)
            body += payload
            prev = tick
        body += _encode_varlen(0) + bytes([0xFF, 0x2F, 0x00])
        chunks.append(struct.pack(">4sI", b"MTrk", len(body)) + bytes(body))
    return b"".join(chunks)


# ---------------------------------------------------------------------------
# Quantization

def _check_four_four(score: Score) -> None:
    for tick, num, den in score.time_signature:
        if (num, den) != (4, 4):
            raise QuantizeError(f"time signature {num}/{den} at tick {tick}: only 4/4 is supported")


def quantize(score: Score, tags: Optional[Sequence[Any]] = None,
             num_bars: Optional[int] = None) -> QuantizedScore:
    """Snap a 4/4 score onto the 16-sub-beat-per-bar grid.

    ``tags`` (optional) is parallel to ``score.all_notes()`` and is carried
    onto the resulting QNotes. Empty bars are kept so the bar list is
    contiguous.
    """
    _check_four_four(score)
    subbeat = score.ppq / 4.0
    placed: dict[int, list[QNote]] = {}
    notes = score.all_notes()
    if tags is not None and len(tags) != len(notes):
        raise ValueError("tags must parallel the score's notes")
    max_bar = -1
    for i, note in enumerate(notes):
        total_pos = round(note.onset / subbeat)
        bar, position = divmod(total_pos, SUBBEATS_PER_BAR)
        duration = min(max(round(note.duration / subbeat), 1), MAX_DURATION_SUBBEATS)
        tag = tags[i] if tags is not None else None
        placed.setdefault(bar, []).append(QNote(position, note.pitch, duration, tag))
        max_bar = max(max_bar, bar)
    if num_bars is None:
        num_bars = max_bar + 1
    bars = tuple(
        tuple(sorted(placed.get(b, []), key=lambda n: (n.position, n.pitch)))
        for b in range(num_bars)
    )
    return QuantizedScore(bars=bars)


def dequantize(q: QuantizedScore, ppq: int = DEFAULT_PPQ) -> Score:
    """Inverse of quantize onto a concrete tick base (single track, 4/4)."""
    subbeat = ppq // 4
    notes = []
    for bar_index, bar in enumerate(q.bars):
        for qn in bar:
            onset = (bar_index * SUBBEATS_PER_BAR + qn.position) * subbeat
            notes.append(Note(qn.pitch, onset, qn.duration * subbeat))
    notes.sort(key=lambda n: (n.onset, n.pitch))
    return Score(ppq=ppq, tracks=(tuple(notes),), time_signature=((0, 4, 4),))


# ---------------------------------------------------------------------------
# Corpus operations

def merge_to_single_channel(score: Score) -> Score:
    """Collapse all pitched tracks into one; percussion-channel notes dropped."""
    merged = [
        replace(n, track_index=0, channel=0)
        for n in score.all_notes()
        if n.channel != PERCUSSION_CHANNEL
    ]
    merged.sort(key=lambda n: (n.onset, n.pitch))
    return Score(ppq=score.ppq, tracks=(tuple(merged),),
                 time_signature=score.time_signature, warnings=score.warnings)


def filter_corpus(files: Iterable[tuple[str, str, Score]]):
    """Apply the track-count corpus filters.

    ``files`` yields (path, role, score) with role in {"piano",
    "orchestra"}. Returns (kept, rejections) where rejections are
    (path, reason) pairs.
    """
    kept = []
    rejections = []
    for path, role, score in files:
        n = len(score.tracks)
        if role == "piano" and n > 3:
            rejections.append((path, f"piano file has {n} tracks (> 3)"))
        elif role == "orchestra" and n < 4:
            rejections.append((path, f"orchestra file has {n} tracks (< 4)"))
        elif role not in ("piano", "orchestra"):
            raise ValueError(f"unknown corpus role {role!r}")
        else:
            kept.append((path, role, score))
    return kept, rejections


def format_rejections(rejections: Iterable[tuple[str, str]]) -> str:
    return "".join(f"{path}\t{reason}\n" for path, reason in rejections)
