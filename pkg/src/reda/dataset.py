"""Training-set construction: pre-training chunks with MLM masking,
note-reduction keep labels, and reduced-to-full sequence pairs."""
from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .midi import Score, QuantizedScore, merge_to_single_channel, quantize
from .skyline import skyline_top, skyline_bottom
from . import tokenizer as tk
from .tokenizer import CPToken, TokenStream, BOS, EOS, PAD

SEQ_LEN = 512
R2F_MAX_INPUT = 90
DEFAULT_MASK_PROB = 0.15
IGNORE = -1  # serialized ignore marker for labels/targets


@dataclass(frozen=True)
class TokenSequence:
    id: str
    tokens: tuple  # 512 CPTokens, PAD only as a contiguous suffix

    def __post_init__(self):
        if len(self.tokens) != SEQ_LEN:
            raise ValueError(f"sequence must have {SEQ_LEN} tokens, got {len(self.tokens)}")

    @property
    def non_pad_count(self) -> int:
        return sum(1 for t in self.tokens if t.special != "PAD")

    @property
    def attention_mask(self) -> list[bool]:
        return [t.special != "PAD" for t in self.tokens]


def pad_to_sequence(seq_id: str, tokens: Sequence[CPToken]) -> TokenSequence:
    if len(tokens) > SEQ_LEN:
        raise ValueError("token list longer than one sequence")
    return TokenSequence(seq_id, tuple(tokens) + (PAD,) * (SEQ_LEN - len(tokens)))


def build_pretrain_sequences(streams: Iterable[tuple[str, TokenStream]],
                             seed: int = 0) -> list[TokenSequence]:
    """Chunk each piece into consecutive 512-token windows (PAD-suffixed
    final chunk); chunks never mix pieces."""
    sequences = []
    for piece_id, stream in streams:
        for k in range(0, len(stream), SEQ_LEN):
            chunk = stream[k:k + SEQ_LEN]
            sequences.append(pad_to_sequence(f"{piece_id}#{k // SEQ_LEN}", chunk))
    return sequences


def apply_mlm_masking(seq: TokenSequence, mask_prob: float = DEFAULT_MASK_PROB,
                      seed: int = 0):
    """BERT-style masking over note tokens.

    Each non-special position is selected with probability mask_prob;
    selected positions become MASK (80%), a random regular token (10%),
    or stay unchanged (10%). Returns (masked TokenSequence, targets)
    where targets[i] is the original token at selected positions and
    None elsewhere. Bit-reproducible for a fixed seed.
    """
    if not 0.0 <= mask_prob <= 1.0:
        raise ValueError("mask_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    masked = list(seq.tokens)
    targets: list[Optional[CPToken]] = [None] * SEQ_LEN
    for i, tok in enumerate(seq.tokens):
        if not tok.is_note:
            continue
        if rng.random() >= mask_prob:
            continue
        targets[i] = tok
        r = rng.random()
        if r < 0.8:
            masked[i] = tk.MASK
        elif r < 0.9:
            masked[i] = CPToken.note(
                int(rng.integers(0, 2)),
                int(rng.integers(0, 16)),
                int(rng.integers(0, tk.REGULAR_SIZES["pitch"])),
                int(rng.integers(0, tk.REGULAR_SIZES["duration"])),
            )
        # else: leave unchanged
    return TokenSequence(seq.id, tuple(masked)), targets


# ---------------------------------------------------------------------------
# MB-NR labels

def label_keep(orchestra: Score, piano: Score) -> list[int]:
    """Per-note keep labels for the orchestra notes (score order).

    A note is kept (1) iff some piano note of identical pitch overlaps it
    on half-open tick intervals, else 0.
    """
    by_pitch: dict[int, list[tuple[int, int]]] = {}
    for n in piano.all_notes():
        by_pitch.setdefault(n.pitch, []).append((n.onset, n.offset))
    starts: dict[int, list[int]] = {}
    for pitch, ivals in by_pitch.items():
        ivals.sort()
        starts[pitch] = [s for s, _ in ivals]
    labels = []
    for n in orchestra.all_notes():
        ivals = by_pitch.get(n.pitch)
        hit = 0
        if ivals:
            # any interval starting before our offset that ends after our onset
            j = bisect_right(starts[n.pitch], n.offset - 1)
            for s, e in ivals[:j]:
                if e > n.onset:
                    hit = 1
                    break
        labels.append(hit)
    return labels


def build_nr_dataset(pairs: Iterable[tuple[str, Score, Score]]):
    """Tokenize orchestra scores with positionally aligned keep labels.

    Yields (TokenSequence, labels) where labels is a 512-list over
    {0, 1, None}; None marks PAD/special positions.
    """
    out = []
    for pair_id, orchestra, piano in pairs:
        om = merge_to_single_channel(orchestra)
        pm = merge_to_single_channel(piano)
        labels = label_keep(om, pm)
        q = quantize(om, tags=labels)
        stream = tk.tokenize(q)
        for k in range(0, len(stream), SEQ_LEN):
            chunk = stream[k:k + SEQ_LEN]
            seq = pad_to_sequence(f"{pair_id}#{k // SEQ_LEN}", chunk)
            seq_labels = [t.tag if t.is_note else None for t in seq.tokens]
            assert len(seq_labels) == SEQ_LEN
            out.append((seq, seq_labels))
    return out


# ---------------------------------------------------------------------------
# MB-R2F pairs

@dataclass(frozen=True)
class R2FPair:
    id: str
    input: TokenSequence          # <= 90 non-PAD tokens
    output: tuple                 # BOS ... EOS, length <= 512
    bar_range: tuple[int, int]    # [start, end) in the source piece

    def __post_init__(self):
        if self.input.non_pad_count > R2F_MAX_INPUT:
            raise ValueError("R2F input exceeds 90 non-PAD tokens")
        if len(self.output) > SEQ_LEN:
            raise ValueError("R2F output exceeds 512 tokens")


def extract_reduced(score: Score) -> Score:
    """Melody + bass skeleton of a piano score via both skylines."""
    merged = merge_to_single_channel(score)
    notes = merged.tracks[0] if merged.tracks else ()
    top = skyline_top(notes)
    bottom = skyline_bottom(notes)
    combined = sorted(set(top) | set(bottom), key=lambda n: (n.onset, n.pitch))
    return Score(ppq=score.ppq, tracks=(tuple(combined),),
                 time_signature=score.time_signature)


def build_r2f_dataset(pianos: Iterable[tuple[str, Score]],
                      max_input: int = R2F_MAX_INPUT,
                      max_output: int = SEQ_LEN):
    """Build reduced-to-full pairs.

    Bar ranges grow greedily until the reduced tokenization would exceed
    ``max_input`` tokens; a pair whose full-score tokenization (with BOS
    and EOS) exceeds ``max_output`` is discarded and counted.
    Returns (pairs, discarded_count).
    """
    pairs: list[R2FPair] = []
    discarded = 0
    for piece_id, piano in pianos:
        full = merge_to_single_channel(piano)
        reduced = extract_reduced(piano)
        n_bars = max(full.num_bars(), reduced.num_bars())
        if n_bars == 0:
            continue
        qf = quantize(full, num_bars=n_bars)
        qr = quantize(reduced, num_bars=n_bars)
        costs = [max(len(bar), 1) for bar in qr.bars]  # empty bar = one ABS token
        start = 0
        seg = 0
        while start < n_bars:
            end = start
            total = 0
            while end < n_bars and total + costs[end] <= max_input:
                total += costs[end]
                end += 1
            if end == start:  # single bar too dense for one input
                discarded += 1
                start += 1
                continue
            in_stream = tk.tokenize(QuantizedScore(bars=qr.bars[start:end]))
            out_stream = [BOS] + tk.tokenize(QuantizedScore(bars=qf.bars[start:end])) + [EOS]
            if len(out_stream) > max_output:
                discarded += 1
            else:
                pairs.append(R2FPair(
                    id=f"{piece_id}#{seg}",
                    input=pad_to_sequence(f"{piece_id}#{seg}", in_stream),
                    output=tuple(out_stream),
                    bar_range=(start, end),
                ))
                seg += 1
            start = end
    return pairs, discarded


# ---------------------------------------------------------------------------
# JSONL serialization (the contract with the trainer component)

def _ids(tokens: Iterable[CPToken]) -> list[list[int]]:
    return [list(t.to_ids()) for t in tokens]


def write_pretrain_jsonl(path, sequences: Iterable[TokenSequence],
                         mask_prob: float, seed: int) -> int:
    count = 0
    with open(path, "w") as fh:
        for i, seq in enumerate(sequences):
            masked, targets = apply_mlm_masking(seq, mask_prob, seed=seed + i)
            target_ids = [list(t.to_ids()) if t is not None else [IGNORE] * 4
                          for t in targets]
            fh.write(json.dumps({"id": seq.id, "masked": _ids(masked.tokens),
                                 "target": target_ids}) + "\n")
            count += 1
    return count


def write_nr_jsonl(path, examples) -> int:
    count = 0
    with open(path, "w") as fh:
        for seq, labels in examples:
            lab = [IGNORE if v is None else int(v) for v in labels]
            fh.write(json.dumps({"id": seq.id, "tokens": _ids(seq.tokens),
                                 "labels": lab}) + "\n")
            count += 1
    return count


def write_r2f_jsonl(path, pairs: Iterable[R2FPair]) -> int:
    count = 0
    with open(path, "w") as fh:
        for pair in pairs:
            fh.write(json.dumps({"id": pair.id, "input": _ids(pair.input.tokens),
                                 "output": _ids(pair.output)}) + "\n")
            count += 1
    return count


def write_manifest(path, **fields) -> None:
    with open(path, "w") as fh:
        json.dump(fields, fh, indent=2)
        fh.write("\n")
