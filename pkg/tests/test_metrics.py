import math

import numpy as np
import pytest

from reda.errors import RedaError
from reda.metrics import one_sample_ttest, survey_means, tonal_similarity
from synth import make_score, random_score

PPQ = 480

# Table-style reference cases: (success count out of 61, reported t, rejected)
DISCRIMINATION_CASES = [
    (22, -2.229, False),
    (27, -0.887, False),
    (45, 4.151, True),
    (33, 0.632, False),
    (26, -1.146, False),
    (37, 1.676, True),
]


def responses(successes, n=61):
    return [1] * successes + [0] * (n - successes)


class TestTonalSimilarity:
    def test_identical_scores(self):
        s = make_score([(60, 0, PPQ), (64, PPQ, PPQ), (67, 2 * PPQ, PPQ)])
        report = tonal_similarity(s, s)
        assert abs(report.aggregate - 1.0) < 1e-9
        assert all(abs(v - 1.0) < 1e-9 for v in report.window_values)

    def test_disjoint_pitch_classes(self):
        a = make_score([(60, 0, PPQ), (64, PPQ, PPQ), (67, 2 * PPQ, PPQ)])
        b = make_score([(66, 0, PPQ), (70, PPQ, PPQ), (61, 2 * PPQ, PPQ)])
        report = tonal_similarity(a, b)
        assert abs(report.aggregate) < 1e-9

    def test_subset_histogram_cosine(self):
        # window with {C:1, E:1} vs {C:1} -> 1/sqrt(2)
        a = make_score([(60, 0, PPQ), (64, 0, PPQ)])
        b = make_score([(60, 0, PPQ)])
        report = tonal_similarity(a, b)
        assert abs(report.window_values[0] - 1 / math.sqrt(2)) < 1e-9

    def test_one_empty_window_scores_zero(self):
        a = make_score([(60, 0, PPQ), (62, 8 * PPQ, PPQ)])
        b = make_score([(60, 0, PPQ)])
        report = tonal_similarity(a, b)
        assert 0.0 in report.window_values

    def test_both_empty_window_skipped(self):
        a = make_score([(60, 0, PPQ), (62, 8 * PPQ, PPQ)])
        report = tonal_similarity(a, a)
        assert report.skipped_windows > 0
        assert abs(report.aggregate - 1.0) < 1e-9

    def test_symmetry_and_range(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            a = random_score(rng, n_notes=25)
            b = random_score(rng, n_notes=20)
            r1 = tonal_similarity(a, b)
            r2 = tonal_similarity(b, a)
            assert abs(r1.aggregate - r2.aggregate) <= 1e-12
            assert all(0.0 <= v <= 1.0 + 1e-12 for v in r1.window_values)

    def test_invariant_under_joint_octave_shift(self):
        rng = np.random.default_rng(4)
        a = random_score(rng, n_notes=20, pitch_lo=40, pitch_hi=80)
        b = random_score(rng, n_notes=20, pitch_lo=40, pitch_hi=80)
        from dataclasses import replace
        shift = lambda s: type(s)(ppq=s.ppq, tracks=tuple(
            tuple(replace(n, pitch=n.pitch + 12) for n in t) for t in s.tracks),
            time_signature=s.time_signature)
        r1 = tonal_similarity(a, b)
        r2 = tonal_similarity(shift(a), shift(b))
        assert abs(r1.aggregate - r2.aggregate) < 1e-9

    def test_empty_scores_error(self):
        from reda.midi import Score
        empty = Score(ppq=480, tracks=((),))
        with pytest.raises(RedaError):
            tonal_similarity(empty, empty)


class TestTTest:
    @pytest.mark.parametrize("successes,reported_t,rejected", DISCRIMINATION_CASES)
    def test_reference_cases(self, successes, reported_t, rejected):
        result = one_sample_ttest(responses(successes), 0.5, 1.67)
        assert abs(result.t_value - reported_t) <= 0.05
        assert result.rejected == rejected
        assert result.df == 60

    def test_mean_equals_null(self):
        result = one_sample_ttest([1, 0] * 10, 0.5, 1.67)
        assert result.t_value == 0.0
        assert not result.rejected

    def test_bernoulli_sd_formula(self):
        samples = responses(45)
        result = one_sample_ttest(samples)
        n, p = len(samples), 45 / 61
        expect = math.sqrt(p * (1 - p) * n / (n - 1))
        assert abs(result.sd - expect) < 1e-12

    def test_zero_variance_error(self):
        with pytest.raises(RedaError):
            one_sample_ttest([1, 1, 1])

    def test_too_few_samples(self):
        with pytest.raises(RedaError):
            one_sample_ttest([1])

    def test_threshold_only_changes_decision(self):
        a = one_sample_ttest(responses(37), 0.5, 1.67)
        b = one_sample_ttest(responses(37), 0.5, 2.0)
        assert a.t_value == b.t_value
        assert a.rejected and not b.rejected


class TestSurvey:
    def test_identical_ratings(self):
        assert survey_means([[4]] * 10) == [4.0]

    def test_two_ratings(self):
        assert survey_means([[3], [4]]) == [3.5]

    def test_per_criterion(self):
        means = survey_means([[4, 3, 4, 4], [4, 3, 3, 3], [3, 3, 4, 4],
                              [4, 3, 4, 4], [4, 2, 3, 3]])
        assert len(means) == 4
        assert abs(means[0] - 3.8) < 1e-12

    def test_empty_error(self):
        with pytest.raises(RedaError):
            survey_means([])

    def test_out_of_range_error(self):
        with pytest.raises(RedaError):
            survey_means([[0, 3]])
