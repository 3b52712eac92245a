"""Metric checks against an independent O(n^2) brute-force threshold sweep.

The oracle below recounts misses and false alarms with plain Python
loops at every candidate threshold (each distinct score, plus one
reject-everything point), so it shares no code with the vectorized
implementation it verifies.
"""

import numpy as np
import pytest
from scipy.special import expit

from svbackend.errors import DegenerateInputError
from svbackend.metrics import DAY, NIGHT, DcfParams, dcf_c, eer, min_dcf, roc

from oracles import brute_eer, brute_min_dcf, brute_points


def random_instance(rng, max_trials=500):
    n = int(rng.integers(10, max_trials + 1))
    labels = np.zeros(n, dtype=bool)
    labels[: int(rng.integers(1, n))] = True
    rng.shuffle(labels)
    sep = rng.uniform(0.0, 1.5)
    scores = np.where(
        labels,
        rng.normal(sep, 1.0, size=n),
        rng.normal(0.0, 1.0, size=n),
    )
    if rng.random() < 0.3:  # force score ties across classes
        scores = np.round(scores, 1)
    return scores, labels


# ---------------------------------------------------------------------------
# roc

def test_roc_separable_covers_corners():
    thresholds, p_miss, p_fa = roc([1.0, 0.0], [True, False])
    assert list(zip(p_miss, p_fa)) == [(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)]
    assert thresholds[0] == 0.0 and thresholds[1] == 1.0 and np.isinf(thresholds[2])


def test_roc_all_scores_identical_two_points():
    thresholds, p_miss, p_fa = roc([0.3, 0.3, 0.3], [True, False, True])
    assert len(thresholds) == 2
    assert (p_miss[0], p_fa[0]) == (0.0, 1.0)  # accept everything
    assert (p_miss[1], p_fa[1]) == (1.0, 0.0)  # reject everything


def test_roc_matches_brute_force_counts():
    rng = np.random.default_rng(7)
    scores, labels = random_instance(rng, max_trials=1000)
    thresholds, p_miss, p_fa = roc(scores, labels)
    points = brute_points(scores.tolist(), labels.tolist())
    assert len(points) == thresholds.size
    for (t, miss, fa), ti, mi, fi in zip(points, thresholds, p_miss, p_fa):
        assert t == ti
        assert miss == mi
        assert fa == fi


def test_roc_monotone_rates():
    rng = np.random.default_rng(8)
    for _ in range(20):
        scores, labels = random_instance(rng)
        _, p_miss, p_fa = roc(scores, labels)
        assert np.all(np.diff(p_miss) >= 0)
        assert np.all(np.diff(p_fa) <= 0)


def test_roc_single_class_raises():
    with pytest.raises(DegenerateInputError):
        roc([0.1, 0.2], [True, True])


# ---------------------------------------------------------------------------
# eer

def test_eer_separable_is_zero():
    value, _ = eer([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
    assert value == 0.0


def test_eer_interleaved_half():
    # brute-force sweep confirms the crossing at p_miss = p_fa = 0.5
    scores = [0.8, 0.4, 0.6, 0.2]
    labels = [True, True, False, False]
    value, threshold = eer(scores, labels)
    ref_value, ref_threshold = brute_eer(scores, labels)
    assert value == 0.5 == ref_value
    assert threshold == ref_threshold


def test_eer_all_equal_scores():
    value, _ = eer([0.5, 0.5, 0.5], [True, False, True])
    assert value == 0.5


def test_eer_single_class_raises():
    with pytest.raises(DegenerateInputError):
        eer([0.1, 0.2], [False, False])


# ---------------------------------------------------------------------------
# min_dcf / dcf_c

def test_min_dcf_separable_is_zero():
    scores = [0.9, 0.8, 0.2, 0.1]
    labels = [True, True, False, False]
    for params in (DAY, NIGHT, DcfParams(1.0, 1.0, 0.5)):
        value, _ = min_dcf(scores, labels, params)
        assert value == 0.0


def test_min_dcf_matches_brute_force_both_param_sets():
    rng = np.random.default_rng(99)
    scores, labels = random_instance(rng)
    for params in (DAY, NIGHT):
        value, threshold = min_dcf(scores, labels, params)
        ref_value, ref_threshold = brute_min_dcf(scores.tolist(), labels.tolist(), params)
        assert value == ref_value
        assert threshold == ref_threshold


def test_min_dcf_unnormalized_flag():
    rng = np.random.default_rng(100)
    scores, labels = random_instance(rng)
    raw, _ = min_dcf(scores, labels, DAY, normalize=False)
    ref, _ = brute_min_dcf(scores.tolist(), labels.tolist(), DAY, normalize=False)
    assert raw == ref


def test_min_dcf_normalized_within_unit_interval():
    rng = np.random.default_rng(101)
    for _ in range(50):
        scores, labels = random_instance(rng)
        for params in (DAY, NIGHT):
            value, _ = min_dcf(scores, labels, params)
            assert 0.0 <= value <= 1.0


def test_dcf_c_is_mean_of_day_and_night():
    rng = np.random.default_rng(102)
    scores, labels = random_instance(rng)
    day, _ = min_dcf(scores, labels, DAY)
    night, _ = min_dcf(scores, labels, NIGHT)
    assert dcf_c(scores, labels) == (day + night) / 2.0


def test_dcf_params_validation():
    with pytest.raises(ValueError):
        DcfParams(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        DcfParams(1.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# invariances

def test_metrics_invariant_under_monotone_transforms():
    rng = np.random.default_rng(103)
    for _ in range(10):
        scores, labels = random_instance(rng)
        base = (
            eer(scores, labels)[0],
            min_dcf(scores, labels, DAY)[0],
            min_dcf(scores, labels, NIGHT)[0],
            dcf_c(scores, labels),
        )
        for transformed in (2.0 * scores + 3.0, expit(scores)):
            got = (
                eer(transformed, labels)[0],
                min_dcf(transformed, labels, DAY)[0],
                min_dcf(transformed, labels, NIGHT)[0],
                dcf_c(transformed, labels),
            )
            assert got == base
