"""Applying model outputs to scores: keep-mask application for note
reduction and the iterative greedy decoding loop for reduced-to-full
generation. Predictors are pluggable so everything runs without the
trainer in-process."""
from __future__ import annotations

import json
from typing import Iterable, Protocol, Sequence

from .errors import RedaError
from .midi import Score, QNote, QuantizedScore, dequantize, merge_to_single_channel, quantize
from .dataset import SEQ_LEN, R2F_MAX_INPUT, TokenSequence, pad_to_sequence
from .tokenizer import BOS, EOS, PAD, CPToken, PITCH_LOW, TokenStream

DEFAULT_CUTOFF = 0.5


class Predictor(Protocol):
    """Greedy next-token oracle for the decoding loop."""

    def predict(self, encoder_input: TokenSequence,
                partial_output: TokenSequence) -> CPToken: ...


class ScriptedPredictor:
    """Replays a fixed token list, then EOS (or keeps emitting the last
    token when constructed with emit_eos=False)."""

    def __init__(self, tokens: Sequence[CPToken], emit_eos: bool = True):
        self.tokens = list(tokens)
        self.emit_eos = emit_eos
        self.calls = 0

    def predict(self, encoder_input, partial_output) -> CPToken:
        i = self.calls
        self.calls += 1
        if i < len(self.tokens):
            return self.tokens[i]
        if self.emit_eos:
            return EOS
        return self.tokens[-1] if self.tokens else EOS


class FileReplayPredictor:
    """Replays a trainer prediction file (JSONL, id -> token list)."""

    def __init__(self, path):
        self.streams: dict[str, list[CPToken]] = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self.streams[obj["id"]] = [CPToken.from_ids(t) for t in obj["tokens"]]

    def for_sequence(self, seq_id: str) -> ScriptedPredictor:
        if seq_id not in self.streams:
            raise RedaError(f"no prediction stream for sequence id {seq_id!r}")
        return ScriptedPredictor(self.streams[seq_id])


def decode_r2f(encoder_input: TokenSequence, predictor: Predictor,
               max_len: int = SEQ_LEN) -> TokenStream:
    """Greedy decoding loop.

    Starts from a lone BOS, pads the partial output to 512 before every
    predictor call, and stops on EOS or when the output (including BOS)
    reaches ``max_len``. Returns generated tokens without BOS/EOS.
    """
    if encoder_input.non_pad_count > R2F_MAX_INPUT:
        raise RedaError(
            f"encoder input has {encoder_input.non_pad_count} non-PAD tokens (> {R2F_MAX_INPUT})")
    partial: list[CPToken] = [BOS]
    rounds = 0
    while len(partial) < max_len:
        padded = pad_to_sequence(encoder_input.id, partial)
        try:
            tok = predictor.predict(encoder_input, padded)
        except Exception as exc:  # annotate which round died
            raise RedaError(f"predictor failed at round {rounds}: {exc}") from exc
        rounds += 1
        if tok.special == "EOS":
            break
        partial.append(tok)
    return partial[1:]


def read_keep_masks(path) -> dict[str, list[float]]:
    masks: dict[str, list[float]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            keep = [float(p) for p in obj["keep"]]
            if len(keep) != SEQ_LEN:
                raise RedaError(
                    f"keep mask for {obj['id']!r} has {len(keep)} entries, expected {SEQ_LEN}")
            masks[obj["id"]] = keep
    return masks


def apply_keep_mask_quantized(orchestra: Score, sequences: Sequence[TokenSequence],
                              masks: dict[str, Sequence[float]],
                              cutoff: float = DEFAULT_CUTOFF) -> QuantizedScore:
    """Drop orchestra notes whose keep probability falls below ``cutoff``.

    ``sequences`` must be the NR chunks produced from this score; bar
    structure is preserved (bars that lose all notes stay as empty bars).
    """
    if not 0.0 < cutoff < 1.0:
        raise RedaError("cutoff must lie in (0, 1)")
    q = quantize(merge_to_single_channel(orchestra))
    keep_flags: list[bool] = []
    for seq in sequences:
        if seq.id not in masks:
            raise RedaError(f"no keep mask for sequence id {seq.id!r}")
        probs = masks[seq.id]
        for tok, p in zip(seq.tokens, probs):
            if tok.is_note:
                keep_flags.append(p >= cutoff)
    if len(keep_flags) != q.note_count:
        raise RedaError(
            f"sequences carry {len(keep_flags)} note tokens but the score has {q.note_count} notes")
    it = iter(keep_flags)
    bars = tuple(
        tuple(n for n in bar if next(it))
        for bar in q.bars
    )
    return QuantizedScore(bars=bars)


def apply_keep_mask(orchestra: Score, sequences: Sequence[TokenSequence],
                    masks: dict[str, Sequence[float]],
                    cutoff: float = DEFAULT_CUTOFF) -> Score:
    """Tick-level counterpart of apply_keep_mask_quantized (PPQ 480)."""
    return dequantize(apply_keep_mask_quantized(orchestra, sequences, masks, cutoff))


def r2f_to_score(generated: Iterable[CPToken]) -> tuple[Score, int]:
    """Lenient reconstruction of generated token streams.

    Structurally invalid tokens are dropped (and counted) instead of
    failing, since model output may be malformed. Returns (score,
    dropped_count).
    """
    bars: list[list[QNote]] = []
    last_key = None
    bar_open = False
    dropped = 0
    for tok in generated:
        if tok.special in ("PAD", "BOS", "EOS", "MASK"):
            continue
        if tok.special == "ABS":
            bars.append([])
            last_key = None
            bar_open = False
            continue
        if not tok.is_note:
            dropped += 1
            continue
        if tok.bar == 0:
            bars.append([])
            last_key = None
            bar_open = True
        elif not bar_open:
            dropped += 1
            continue
        key = (tok.position, tok.pitch)
        if last_key is not None and key < last_key:
            dropped += 1
            continue
        last_key = key
        bars[-1].append(QNote(tok.position, tok.pitch + PITCH_LOW, tok.duration + 1))
    q = QuantizedScore(bars=tuple(tuple(b) for b in bars))
    return dequantize(q), dropped
