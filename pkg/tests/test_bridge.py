import json

import pytest

from reda.bridge import (FileReplayPredictor, ScriptedPredictor, apply_keep_mask,
                         apply_keep_mask_quantized, decode_r2f, r2f_to_score,
                         read_keep_masks)
from reda.dataset import SEQ_LEN, build_nr_dataset, pad_to_sequence
from reda.errors import RedaError
from reda.midi import merge_to_single_channel, quantize
from reda.tokenizer import ABS, CPToken, EOS, tokenize
from synth import synth_piano


def nr_setup(seed=1):
    score = synth_piano(seed)
    examples = build_nr_dataset([("p", score, score)])
    seqs = [seq for seq, _ in examples]
    return score, seqs


def uniform_masks(seqs, value):
    return {seq.id: [value] * SEQ_LEN for seq in seqs}


class TestKeepMask:
    def test_all_ones_identity(self):
        score, seqs = nr_setup()
        q = apply_keep_mask_quantized(score, seqs, uniform_masks(seqs, 1.0))
        assert q == quantize(merge_to_single_channel(score))

    def test_all_zeros_empty_bars_kept(self):
        score, seqs = nr_setup()
        q0 = quantize(merge_to_single_channel(score))
        q = apply_keep_mask_quantized(score, seqs, uniform_masks(seqs, 0.0))
        assert q.num_bars == q0.num_bars
        assert q.note_count == 0

    def test_mixed_mask_exact_selection(self):
        score, seqs = nr_setup()
        q0 = quantize(merge_to_single_channel(score))
        masks = {}
        flag = True
        note_flags = []
        for seq in seqs:
            probs = []
            for tok in seq.tokens:
                if tok.is_note:
                    probs.append(0.9 if flag else 0.1)
                    note_flags.append(flag)
                    flag = not flag
                else:
                    probs.append(0.0)
            masks[seq.id] = probs
        q = apply_keep_mask_quantized(score, seqs, masks, cutoff=0.5)
        expected = [n for keep, n in
                    zip(note_flags, (n for bar in q0.bars for n in bar)) if keep]
        got = [n for bar in q.bars for n in bar]
        assert got == expected

    def test_monotone_in_cutoff(self):
        score, seqs = nr_setup()
        import numpy as np
        rng = np.random.default_rng(0)
        masks = {seq.id: [float(rng.random()) for _ in range(SEQ_LEN)]
                 for seq in seqs}
        low = apply_keep_mask_quantized(score, seqs, masks, cutoff=0.3)
        high = apply_keep_mask_quantized(score, seqs, masks, cutoff=0.7)
        low_notes = {(i, n) for i, bar in enumerate(low.bars) for n in bar}
        high_notes = {(i, n) for i, bar in enumerate(high.bars) for n in bar}
        assert high_notes <= low_notes

    def test_missing_id_error(self):
        score, seqs = nr_setup()
        with pytest.raises(RedaError):
            apply_keep_mask(score, seqs, {}, 0.5)

    def test_keep_mask_file_validation(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text(json.dumps({"id": "a", "keep": [0.5] * 10}) + "\n")
        with pytest.raises(RedaError):
            read_keep_masks(path)


def note_tokens(n):
    out = []
    for i in range(n):
        pos = i % 16
        out.append(CPToken.note(0 if pos == 0 else 1, pos, 40 + (i % 5), 3))
    return out


def empty_input(seq_id="in"):
    return pad_to_sequence(seq_id, note_tokens(10))


class TestDecode:
    def test_immediate_eos(self):
        assert decode_r2f(empty_input(), ScriptedPredictor([])) == []

    def test_cap_at_511_generated(self):
        pred = ScriptedPredictor(note_tokens(2000), emit_eos=False)
        out = decode_r2f(empty_input(), pred)
        assert len(out) == 511  # 512 including BOS, never 513

    def test_scripted_three_tokens(self):
        toks = note_tokens(3)
        assert decode_r2f(empty_input(), ScriptedPredictor(toks)) == toks

    def test_rejects_over_90_inputs(self):
        seq = pad_to_sequence("big", note_tokens(91))
        with pytest.raises(RedaError):
            decode_r2f(seq, ScriptedPredictor([]))

    def test_partial_never_contains_future(self):
        seen = []

        class Spy:
            def __init__(self):
                self.script = note_tokens(5)
                self.i = 0

            def predict(self, enc, partial):
                seen.append([t for t in partial.tokens if t.special != "PAD"])
                tok = self.script[self.i] if self.i < 5 else EOS
                self.i += 1
                return tok

        decode_r2f(empty_input(), Spy())
        for k, partial in enumerate(seen):
            assert len(partial) == k + 1  # BOS + k generated

    def test_predictor_failure_annotated(self):
        class Boom:
            def predict(self, enc, partial):
                raise RuntimeError("nope")

        with pytest.raises(RedaError, match="round 0"):
            decode_r2f(empty_input(), Boom())

    def test_file_replay_verbatim(self, tmp_path):
        toks = note_tokens(20)
        path = tmp_path / "preds.jsonl"
        path.write_text(json.dumps(
            {"id": "in", "tokens": [list(t.to_ids()) for t in toks]}) + "\n")
        replay = FileReplayPredictor(path)
        out = decode_r2f(empty_input("in"), replay.for_sequence("in"))
        assert out == toks


class TestR2FToScore:
    def test_well_formed_stream(self):
        from synth import random_quantized
        import numpy as np
        q = random_quantized(np.random.default_rng(5))
        score, dropped = r2f_to_score(tokenize(q))
        assert dropped == 0
        from reda.midi import dequantize
        assert score == dequantize(q)

    def test_out_of_order_token_dropped(self):
        good = [CPToken.note(0, 0, 40, 3), CPToken.note(1, 4, 50, 3)]
        bad = good[:1] + [CPToken.note(1, 4, 50, 3), CPToken.note(1, 2, 30, 3)]
        score, dropped = r2f_to_score(bad)
        assert dropped == 1
        assert score.note_count == 2

    def test_only_specials(self):
        score, dropped = r2f_to_score([ABS, EOS, ABS])
        assert score.note_count == 0
        assert dropped == 0

    def test_leading_continuation_dropped(self):
        score, dropped = r2f_to_score([CPToken.note(1, 0, 40, 3)])
        assert dropped == 1
        assert score.note_count == 0
