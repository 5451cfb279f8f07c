import struct

import numpy as np
import pytest

from reda.errors import MidiParseError, QuantizeError
from reda.midi import (Note, Score, QNote, QuantizedScore, dequantize,
                       filter_corpus, format_rejections, merge_to_single_channel,
                       parse_midi, quantize, write_midi)
from synth import make_score, random_quantized, random_score, synth_orchestra


def varlen(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def build_smf(events_per_track, ppq=480, fmt=1):
    """Hand-roll an SMF independently of write_midi. events: (delta, bytes)."""
    out = struct.pack(">4sIHHH", b"MThd", 6, fmt, len(events_per_track), ppq)
    for events in events_per_track:
        body = b""
        for delta, payload in events:
            body += varlen(delta) + payload
        body += b"\x00\xff\x2f\x00"
        out += struct.pack(">4sI", b"MTrk", len(body)) + body
    return out


class TestParse:
    def test_minimal_single_note(self):
        data = build_smf([[(0, b"\x90\x3c\x40"), (480, b"\x80\x3c\x00")]])
        score = parse_midi(data)
        assert score.ppq == 480
        assert score.all_notes() == [Note(60, 0, 480, velocity=0x40)]

    def test_overlapping_same_pitch_fifo(self):
        # two note-ons for pitch 60 at ticks 0 and 60, offs at 120 and 240:
        # first on pairs with first off
        events = [(0, b"\x90\x3c\x50"), (60, b"\x90\x3c\x50"),
                  (60, b"\x80\x3c\x00"), (120, b"\x80\x3c\x00")]
        score = parse_midi(build_smf([events]))
        notes = score.all_notes()
        assert [(n.onset, n.duration) for n in notes] == [(0, 120), (60, 180)]

    def test_running_status_and_vel0_off(self):
        events = [(0, b"\x90\x3c\x50"), (100, b"\x3c\x00")]  # running status off
        score = parse_midi(build_smf([events]))
        assert score.all_notes() == [Note(60, 0, 100, velocity=0x50)]

    def test_truncated_chunk(self):
        data = build_smf([[(0, b"\x90\x3c\x40")]])
        with pytest.raises(MidiParseError):
            parse_midi(data[:-6])

    def test_bad_header(self):
        with pytest.raises(MidiParseError):
            parse_midi(b"NOPE" + b"\x00" * 20)

    def test_dangling_note_on_closed_with_warning(self):
        events = [(0, b"\x90\x3c\x40"), (100, b"\x90\x40\x40"),
                  (20, b"\x80\x40\x00")]
        score = parse_midi(build_smf([events]))
        assert len(score.warnings) == 1
        dangling = [n for n in score.all_notes() if n.pitch == 60]
        assert dangling[0].duration == 120  # closed at track end

    def test_time_signature_meta(self):
        events = [(0, b"\xff\x58\x04\x03\x02\x18\x08"), (0, b"\x90\x3c\x40"),
                  (100, b"\x80\x3c\x00")]
        score = parse_midi(build_smf([events]))
        assert score.time_signature == ((0, 3, 4),)


class TestRoundTrip:
    def test_write_then_parse_identity(self, rng):
        for seed in range(20):
            s = random_score(np.random.default_rng(seed))
            assert parse_midi(write_midi(s)) == s

    def test_empty_score(self):
        s = Score(ppq=480, tracks=((),), time_signature=((0, 4, 4),))
        assert parse_midi(write_midi(s)) == s

    def test_back_to_back_same_pitch(self):
        s = make_score([(60, 0, 480), (60, 480, 480)], n_tracks=1)
        assert parse_midi(write_midi(s)) == s


class TestQuantize:
    def test_near_grid_onset_snaps_to_zero(self):
        s = make_score([(60, 15, 480)])
        q = quantize(s)
        assert q.bars[0][0].position == 0

    def test_long_duration_clamped(self):
        s = make_score([(60, 0, 9000)])  # 75 sub-beats
        assert quantize(s).bars[0][0].duration == 64

    def test_grid_aligned_is_fixpoint(self, rng):
        q = random_quantized(rng)
        assert quantize(dequantize(q)) == q

    def test_zero_length_promoted(self):
        s = make_score([(60, 0, 20)])  # < half a sub-beat
        assert quantize(s).bars[0][0].duration == 1

    def test_non_four_four_rejected(self):
        s = Score(ppq=480, tracks=((Note(60, 0, 480),),),
                  time_signature=((0, 3, 4),))
        with pytest.raises(QuantizeError):
            quantize(s)

    def test_position_carry_into_next_bar(self):
        # onset just before bar 1 rounds up to position 0 of bar 1
        s = make_score([(60, 4 * 480 - 10, 480)])
        q = quantize(s)
        assert len(q.bars) == 2
        assert q.bars[1][0].position == 0


class TestFilterMerge:
    def test_filter_rules(self):
        piano4 = make_score([(60, 0, 480, 64, i) for i in range(4)], n_tracks=4)
        orch3 = make_score([(60, 0, 480, 64, i) for i in range(3)], n_tracks=3)
        orch6 = make_score([(60, 0, 480, 64, i) for i in range(6)], n_tracks=6)
        kept, rejected = filter_corpus([
            ("p4.mid", "piano", piano4),
            ("o3.mid", "orchestra", orch3),
            ("o6.mid", "orchestra", orch6),
        ])
        assert [k[0] for k in kept] == ["o6.mid"]
        assert {r[0] for r in rejected} == {"p4.mid", "o3.mid"}
        assert len(kept) + len(rejected) == 3
        report = format_rejections(rejected)
        assert "p4.mid\t" in report

    def test_merge_preserves_count_and_fields(self, rng):
        s = random_score(rng, n_tracks=6, n_notes=120)
        merged = merge_to_single_channel(s)
        assert len(merged.tracks) == 1
        assert merged.note_count == s.note_count
        orig = sorted((n.pitch, n.onset, n.duration) for n in s.all_notes())
        new = sorted((n.pitch, n.onset, n.duration) for n in merged.all_notes())
        assert orig == new

    def test_merge_drops_percussion(self):
        s = make_score([(60, 0, 480, 64, 0, 0), (40, 0, 480, 64, 1, 9)],
                       n_tracks=2)
        merged = merge_to_single_channel(s)
        assert [n.pitch for n in merged.all_notes()] == [60]

    def test_merge_single_track_sorted(self):
        s = make_score([(64, 0, 480), (60, 0, 480)], n_tracks=1)
        merged = merge_to_single_channel(s)
        assert [n.pitch for n in merged.all_notes()] == [60, 64]

    def test_merge_orchestra_fixture(self):
        s = synth_orchestra(0)
        merged = merge_to_single_channel(s)
        assert merged.note_count == s.note_count


class TestValidation:
    def test_note_invariants(self):
        with pytest.raises(ValueError):
            Note(200, 0, 480)
        with pytest.raises(ValueError):
            Note(60, 0, 0)

    def test_qnote_invariants(self):
        with pytest.raises(ValueError):
            QNote(16, 60, 4)
        with pytest.raises(ValueError):
            QNote(0, 60, 65)
