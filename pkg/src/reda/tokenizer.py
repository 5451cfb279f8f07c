"""Compound-Word tokenization of quantized scores.

Each note becomes a 4-field token (same-bar flag, position, pitch index,
duration index). Empty bars are represented by an ABS token so no bar is
lost on reconstruction. Five special ids (BOS, EOS, PAD, MASK, ABS) are
appended after each dimension's regular range; a special token holds its
reserved id in all four dimensions.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .errors import StructuralError
from .midi import QNote, QuantizedScore, SUBBEATS_PER_BAR

PITCH_LOW = 22
PITCH_HIGH = 107

SPECIALS = ("BOS", "EOS", "PAD", "MASK", "ABS")
REGULAR_SIZES = {"bar": 2, "position": 16, "pitch": 86, "duration": 64}
DIMENSIONS = ("bar", "position", "pitch", "duration")


def special_id(dim: str, name: str) -> int:
    return REGULAR_SIZES[dim] + SPECIALS.index(name)


@dataclass(frozen=True)
class CPToken:
    bar: int
    position: int
    pitch: int
    duration: int
    special: Optional[str] = None
    tag: Any = field(default=None, compare=False)

    @classmethod
    def note(cls, same_bar_flag: int, position: int, pitch_index: int,
             duration_index: int, tag: Any = None) -> "CPToken":
        if same_bar_flag not in (0, 1):
            raise ValueError("same_bar_flag must be 0 or 1")
        if not 0 <= position < SUBBEATS_PER_BAR:
            raise ValueError(f"position {position} out of range")
        if not 0 <= pitch_index < REGULAR_SIZES["pitch"]:
            raise ValueError(f"pitch index {pitch_index} out of range")
        if not 0 <= duration_index < REGULAR_SIZES["duration"]:
            raise ValueError(f"duration index {duration_index} out of range")
        return cls(same_bar_flag, position, pitch_index, duration_index, tag=tag)

    @classmethod
    def make_special(cls, name: str) -> "CPToken":
        if name not in SPECIALS:
            raise ValueError(f"unknown special token {name!r}")
        return cls(*(special_id(d, name) for d in DIMENSIONS), special=name)

    @property
    def is_note(self) -> bool:
        return self.special is None

    def to_ids(self) -> tuple[int, int, int, int]:
        return (self.bar, self.position, self.pitch, self.duration)

    @classmethod
    def from_ids(cls, ids) -> "CPToken":
        b, pos, pitch, dur = (int(v) for v in ids)
        if b < REGULAR_SIZES["bar"]:
            return cls.note(b, pos, pitch, dur)
        name = SPECIALS[b - REGULAR_SIZES["bar"]]
        if (b, pos, pitch, dur) != tuple(special_id(d, name) for d in DIMENSIONS):
            raise ValueError(f"inconsistent special token ids {ids}")
        return cls.make_special(name)


BOS = CPToken.make_special("BOS")
EOS = CPToken.make_special("EOS")
PAD = CPToken.make_special("PAD")
MASK = CPToken.make_special("MASK")
ABS = CPToken.make_special("ABS")

TokenStream = list  # list[CPToken]


def vocab_spec() -> dict:
    """Per-dimension vocabulary layout, with a fingerprint for checkpoints."""
    dims = {}
    for dim in DIMENSIONS:
        regular = REGULAR_SIZES[dim]
        dims[dim] = {
            "regular": regular,
            "specials": {name: regular + i for i, name in enumerate(SPECIALS)},
            "size": regular + len(SPECIALS),
        }
    blob = json.dumps(dims, sort_keys=True).encode()
    dims_with_fp = dict(dims)
    dims_with_fp["fingerprint"] = hashlib.sha256(blob).hexdigest()[:16]
    return dims_with_fp


def pitch_to_index(midi_pitch: int) -> int:
    return min(max(midi_pitch, PITCH_LOW), PITCH_HIGH) - PITCH_LOW


def tokenize(q: QuantizedScore) -> TokenStream:
    """Emit CP tokens bar by bar; empty bars yield exactly one ABS token."""
    stream: TokenStream = []
    for bar in q.bars:
        if not bar:
            stream.append(ABS)
            continue
        for i, qn in enumerate(bar):
            stream.append(CPToken.note(
                0 if i == 0 else 1,
                qn.position,
                pitch_to_index(qn.pitch),
                qn.duration - 1,
                tag=qn.tag,
            ))
    return stream


def detokenize(stream: Iterable[CPToken]) -> QuantizedScore:
    """Exact inverse of tokenize; PAD/BOS/EOS/MASK tokens are skipped.

    Raises StructuralError (with the first offending index) when the
    stream violates sortedness or starts a bar with flag 1.
    """
    bars: list[list[QNote]] = []
    last_key: Optional[tuple[int, int]] = None
    bar_open = False  # current bar accepts flag-1 notes
    for i, tok in enumerate(stream):
        if tok.special in ("PAD", "BOS", "EOS", "MASK"):
            continue
        if tok.special == "ABS":
            bars.append([])
            last_key = None
            bar_open = False
            continue
        if tok.bar == 0:
            bars.append([])
            last_key = None
            bar_open = True
        elif not bar_open:
            raise StructuralError("same_bar_flag=1 token without an open bar", index=i)
        key = (tok.position, tok.pitch)
        if tok.bar == 1 and last_key is not None and key < last_key:
            raise StructuralError("tokens out of (position, pitch) order", index=i)
        last_key = key
        bars[-1].append(QNote(tok.position, tok.pitch + PITCH_LOW,
                              tok.duration + 1, tag=tok.tag))
    return QuantizedScore(bars=tuple(tuple(b) for b in bars))


def stream_to_obj(piece_id: str, stream: Iterable[CPToken]) -> dict:
    return {"id": piece_id, "tokens": [list(t.to_ids()) for t in stream]}


def stream_from_obj(obj: dict) -> tuple[str, TokenStream]:
    return obj["id"], [CPToken.from_ids(ids) for ids in obj["tokens"]]


def write_streams_jsonl(path, items: Iterable[tuple[str, TokenStream]]) -> None:
    with open(path, "w") as fh:
        for piece_id, stream in items:
            fh.write(json.dumps(stream_to_obj(piece_id, stream)) + "\n")


def read_streams_jsonl(path) -> list[tuple[str, TokenStream]]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(stream_from_obj(json.loads(line)))
    return out
