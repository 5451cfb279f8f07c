import pytest

from reda.errors import RedaError
from reda.dbm import (AccompanimentDB, AccompanimentEntry, build_accomp_db,
                      detect_bar_chord, load_db, match_accompaniment,
                      realize_entry, reduce_dbm, save_db)
from reda.midi import QNote, Score
from synth import make_score, synth_orchestra, synth_piano


def lh_piano(bars, ppq=480):
    """Two-track score: RH drone at 84, LH per-bar note specs
    (pitch, position, duration_subbeats)."""
    sb = ppq // 4
    notes = []
    for bar_index, bar in enumerate(bars):
        notes.append((84, bar_index * 4 * ppq, ppq, 64, 0))
        for pitch, pos, dur in bar:
            notes.append((pitch, bar_index * 4 * ppq + pos * sb, dur * sb, 64, 1))
    return make_score(notes, n_tracks=2)


class TestBuildDB:
    def test_entry_fields(self):
        # C2, G2, C3 at positions 0/4/8, 4 sub-beats each
        s = lh_piano([[(36, 0, 4), (43, 4, 4), (48, 8, 4)]])
        db, skipped = build_accomp_db([("p", s)])
        assert not skipped
        assert len(db) == 1
        e = db.entries[0]
        assert set(e.rhythm) == {(0, 4), (4, 4), (8, 4)}
        assert set(e.degrees) == {0, 7, 12}
        assert e.pitch_classes == frozenset({0, 7})
        assert e.density == 3
        assert 0 in e.degrees

    def test_empty_bar_no_entry(self):
        s = lh_piano([[(36, 0, 4)], []])
        db, _ = build_accomp_db([("p", s)])
        assert len(db) == 1

    def test_duplicate_bars_deduplicated(self):
        bar = [(36, 0, 4), (43, 4, 4), (40, 8, 4), (43, 12, 4)]
        s = lh_piano([bar, bar])
        db, _ = build_accomp_db([("p", s)])
        assert len(db) == 1
        assert db.entries[0].count == 2

    def test_single_track_skipped(self):
        s = make_score([(60, 0, 480)], n_tracks=1)
        db, skipped = build_accomp_db([("solo", s)])
        assert len(db) == 0
        assert skipped and skipped[0][0] == "solo"

    def test_degrees_always_include_root(self):
        db, _ = build_accomp_db([(f"p{i}", synth_piano(i)) for i in range(5)])
        assert len(db) > 0
        assert all(0 in e.degrees for e in db.entries)


class TestDetectChord:
    def test_major_triad(self):
        bar = [QNote(0, 48, 4), QNote(4, 52, 4), QNote(8, 55, 4)]
        root, pcs = detect_bar_chord(bar)
        assert root == 0
        assert pcs == frozenset({0, 4, 7})

    def test_empty_bar(self):
        assert detect_bar_chord([]) == (None, frozenset())

    def test_chromatic_run_below_threshold(self):
        bar = [QNote(p, 48 + p, 1) for p in range(12)]
        root, pcs = detect_bar_chord(bar)
        assert pcs == frozenset()
        assert root == 0  # lowest note at the downbeat

    def test_downbeat_root_preferred(self):
        bar = [QNote(0, 55, 8), QNote(4, 48, 8)]
        root, _ = detect_bar_chord(bar)
        assert root == 55 % 12


def entry(degrees, density=None, count=1, source="s"):
    degrees = tuple(sorted(degrees))
    rhythm = tuple((4 * i % 16, 4) for i in range(len(degrees)))
    return AccompanimentEntry(rhythm=rhythm, degrees=degrees,
                              pitch_classes=frozenset(d % 12 for d in degrees),
                              density=density or len(degrees),
                              count=count, source_id=source)


class TestMatch:
    def test_triad_beats_drone(self):
        triad = entry([0, 4, 7], source="triad")
        drone = entry([0, 7, 12], source="drone")  # classes {0, 7}
        db = AccompanimentDB.from_entries([triad, drone])
        best = match_accompaniment(db, (0, frozenset({0, 4, 7})), target_density=3)
        assert best is triad

    def test_single_entry_db(self):
        e = entry([0, 7])
        db = AccompanimentDB.from_entries([e])
        assert match_accompaniment(db, (5, frozenset({5})), 4) is e

    def test_empty_chord_prefers_density_match(self):
        sparse = entry([0], source="sparse")
        busy = entry([0, 4, 7, 12, 16], source="busy")
        db = AccompanimentDB.from_entries([busy, sparse])
        assert match_accompaniment(db, (None, frozenset()), 1) is sparse

    def test_empty_db_error(self):
        with pytest.raises(RedaError):
            match_accompaniment(AccompanimentDB.from_entries([]), (0, frozenset()), 1)

    def test_deterministic(self):
        db = AccompanimentDB.from_entries([entry([0, 4, 7]), entry([0, 7])])
        chord = (2, frozenset({2, 6, 9}))
        results = {id(match_accompaniment(db, chord, 3)) for _ in range(5)}
        assert len(results) == 1


class TestRealizeReduce:
    def test_realized_root_octave(self):
        e = entry([0, 7, 12])
        for pc in range(12):
            notes = realize_entry(e, pc, bar_index=0)
            root_note = min(notes, key=lambda n: n.pitch)
            assert 36 <= root_note.pitch <= 47
            assert root_note.pitch % 12 == pc

    def test_reduce_two_tracks_and_ranges(self):
        db, _ = build_accomp_db([(f"p{i}", synth_piano(i)) for i in range(5)])
        for seed in range(3):
            orch = synth_orchestra(seed)
            reduced = reduce_dbm(orch, db)
            assert len(reduced.tracks) == 2
            rh, lh = reduced.tracks
            for a, b in zip(rh, rh[1:]):
                assert a.offset <= b.onset  # RH monophonic
            for n in rh + lh:
                assert 21 <= n.pitch <= 108

    def test_empty_orchestra(self):
        db, _ = build_accomp_db([("p", synth_piano(0))])
        empty = Score(ppq=480, tracks=((), (), (), ()),
                      time_signature=((0, 4, 4),))
        with pytest.raises(RedaError):
            reduce_dbm(empty, db)  # no pitched tracks to pick a melody from


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        db, _ = build_accomp_db([(f"p{i}", synth_piano(i)) for i in range(4)])
        path = tmp_path / "db.json"
        save_db(db, path)
        back = load_db(path)
        assert back.entries == db.entries
