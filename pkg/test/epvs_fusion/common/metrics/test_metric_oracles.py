"""
Tests the detection, ranking, distance and agreement metrics against direct formulas
"""
import itertools
import math

import numpy as np
import pytest

from epvs_fusion.common.data_types.exceptions import DomainException, UndefinedMetricException
from epvs_fusion.common.data_types.lesion_data import MatchCounts
from epvs_fusion.common.data_types.volume import Volume
from epvs_fusion.common.metrics.agreement import LIMITS_OF_AGREEMENT, bland_altman, icc, scatter_and_correlation
from epvs_fusion.common.metrics.consistency import average_lesion_voxels, is_magnitude_consistent
from epvs_fusion.common.metrics.detection import detection_metrics, magnitude_accuracy, volumetric_similarity
from epvs_fusion.common.metrics.distances import hausdorff, mahalanobis
from epvs_fusion.common.metrics.ranking import auc_from_scores, roc_auc

# (sensitivity, precision, magnitude accuracy) rounded to two decimals, one row per sequence combination
ROUNDED_ROWS = {
    "T2w": (0.81, 0.83, 1.16),
    "T2w+FLAIR": (0.82, 0.82, 1.16),
    "T2w+FLAIR+T1w": (0.82, 0.83, 1.17),
    "T2w+FLAIR+T1w+SWI": (0.82, 0.83, 1.17),
    "T2w+T1w": (0.80, 0.84, 1.16),
    "T1w": (0.63, 0.77, 1.00),
    "FLAIR": (0.47, 0.73, 0.88),
    "T1w+FLAIR": (0.68, 0.75, 1.02),
}

# (count, total voxels, average voxels) per participant of the expert labelled cohort
LESION_BURDEN = [
    (554, 2840, 5.13),
    (522, 3641, 6.98),
    (318, 2741, 8.62),
    (825, 5982, 7.25),
    (536, 2286, 4.26),
    (1072, 8735, 8.15),
    (794, 7357, 9.27),
    (1144, 7303, 6.38),
    (863, 5643, 6.54),
    (560, 3020, 5.39),
    (596, 3261, 5.47),
    (1187, 13880, 11.69),
    (597, 5232, 8.76),
    (521, 2608, 5.01),
    (566, 5819, 10.28),
    (664, 7354, 11.08),
    (1039, 12219, 11.76),
    (567, 3448, 6.08),
    (519, 2893, 5.57),
    (536, 3019, 5.63),
    (361, 1616, 4.48),
]


def pairwise_auc(scores, labels):
    positives = [score for score, label in zip(scores, labels) if label]
    negatives = [score for score, label in zip(scores, labels) if not label]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in positives for n in negatives)
    return wins / (len(positives) * len(negatives))


def brute_hausdorff(points_a, points_b):
    def directed(source, target):
        return max(min(math.dist(a, b) for b in target) for a in source)

    return max(directed(points_a, points_b), directed(points_b, points_a))


def explicit_mahalanobis(pred, gt, ridge):
    center = sum(gt) / len(gt)
    covariance = sum(np.outer(point - center, point - center) for point in gt) / len(gt) + ridge * np.eye(3)
    rows = covariance
    determinant = rows[0] @ np.cross(rows[1], rows[2])
    inverse = np.column_stack([np.cross(rows[1], rows[2]), np.cross(rows[2], rows[0]), np.cross(rows[0], rows[1])])
    inverse = inverse / determinant
    return sum(math.sqrt((x - center) @ inverse @ (x - center)) for x in pred) / len(pred)


def anova_icc(series_a, series_b):
    n = len(series_a)
    grand = (sum(series_a) + sum(series_b)) / (2 * n)
    bss = sum(2 * ((a + b) / 2 - grand) ** 2 for a, b in zip(series_a, series_b))
    wss = sum((a - (a + b) / 2) ** 2 + (b - (a + b) / 2) ** 2 for a, b in zip(series_a, series_b))
    bms, wms = bss / (n - 1), wss / n
    return (bms - wms) / (bms + wms)


def test_detection_examples():
    scores = detection_metrics(MatchCounts(tp=81, fp=17, fn=19))
    assert scores.sensitivity == pytest.approx(0.81)
    assert scores.precision == pytest.approx(81 / 98)
    assert scores.magnitude_accuracy == pytest.approx(1.157, abs=5e-4)
    assert scores.magnitude_accuracy == math.sqrt(scores.sensitivity ** 2 + scores.precision ** 2)

    empty_prediction = detection_metrics(MatchCounts(tp=0, fp=0, fn=5))
    assert empty_prediction.sensitivity == 0.0 and empty_prediction.precision is None
    assert empty_prediction.magnitude_accuracy is None
    with pytest.raises(UndefinedMetricException):
        detection_metrics(MatchCounts(0, 0, 0))
    with pytest.raises(DomainException):
        MatchCounts(-1, 0, 0)


def test_magnitude_accuracy_within_rounding():
    assert round(magnitude_accuracy(0.81, 0.83), 2) == 1.16
    assert round(magnitude_accuracy(0.82, 0.83), 2) == 1.17
    for combo, (sensitivity, precision, reported) in ROUNDED_ROWS.items():
        assert is_magnitude_consistent(sensitivity, precision, reported), f"FAIL: {combo} row is inconsistent"
    assert not is_magnitude_consistent(0.81, 0.83, 1.20)


def test_lesion_burden_averages_round():
    for index, (count, total, average) in enumerate(LESION_BURDEN, start=1):
        assert average_lesion_voxels(total, count) == pytest.approx(average, abs=0.005), f"FAIL: participant {index}"
    assert average_lesion_voxels(2840, 554) == 5.13
    assert average_lesion_voxels(0, 0) is None
    with pytest.raises(DomainException):
        average_lesion_voxels(-1, 2)


def test_volumetric_similarity():
    assert volumetric_similarity(2840, 2840) == 1.0
    assert volumetric_similarity(100, 300) == 0.5
    assert volumetric_similarity(0, 500) == 0.0
    assert volumetric_similarity(0, 0) == 1.0
    assert volumetric_similarity(120, 45) == volumetric_similarity(45, 120)
    with pytest.raises(DomainException):
        volumetric_similarity(-1, 3)


def test_auc_matches_pairwise_ranking():
    rng = np.random.default_rng(21)
    for _ in range(100):
        labels = np.zeros(50, dtype=bool)
        labels[rng.choice(50, size=rng.integers(1, 50), replace=False)] = True
        scores = np.round(rng.random(50), 1)
        assert auc_from_scores(scores, labels) == pytest.approx(pairwise_auc(scores, labels), abs=1e-9)
        distinct = rng.random(50)
        assert auc_from_scores(1.0 - distinct, labels) == pytest.approx(1.0 - auc_from_scores(distinct, labels))
    with pytest.raises(UndefinedMetricException):
        auc_from_scores([0.1, 0.2], [False, False])


def test_roc_auc_volumes():
    gt = np.zeros((4, 4, 2))
    gt[1:3, 1:3, 0] = 1
    gt_volume = Volume.from_array(gt)
    assert roc_auc(gt_volume, gt_volume) == 1.0
    assert roc_auc(Volume.from_array(np.full(gt.shape, 0.3)), gt_volume) == 0.5
    inside = np.zeros(gt.shape)
    inside[:, :, 1] = 1
    with pytest.raises(UndefinedMetricException):
        roc_auc(gt_volume, gt_volume, Volume.from_array(inside))


def test_hausdorff_matches_brute_force():
    assert hausdorff([(0, 0, 0)], [(3, 4, 0)]) == 5.0
    rng = np.random.default_rng(5)
    for _ in range(100):
        points_a = rng.uniform(-20, 20, size=(rng.integers(1, 40), 3))
        points_b = rng.uniform(-20, 20, size=(rng.integers(1, 40), 3))
        expected = brute_hausdorff(points_a.tolist(), points_b.tolist())
        assert hausdorff(points_a, points_b) == pytest.approx(expected, rel=1e-12)
        assert hausdorff(points_b, points_a) == hausdorff(points_a, points_b)
        assert hausdorff(points_a, points_a) == 0.0
        points_c = rng.uniform(-20, 20, size=(5, 3))
        assert hausdorff(points_a, points_c) <= hausdorff(points_a, points_b) + hausdorff(points_b, points_c) + 1e-9
    with pytest.raises(UndefinedMetricException):
        hausdorff([], [(1, 2, 3)])


def test_mahalanobis():
    rng = np.random.default_rng(12)
    for _ in range(10):
        gt = rng.normal(scale=4.0, size=(10, 3))
        pred = rng.normal(scale=4.0, size=(10, 3))
        assert mahalanobis(pred, gt) == pytest.approx(explicit_mahalanobis(pred, gt, 1e-6), abs=1e-9)

    cube = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))
    assert mahalanobis(np.zeros((3, 3)), cube) == pytest.approx(0.0)
    pred = rng.normal(size=(6, 3))
    euclidean = np.linalg.norm(pred, axis=1).mean()
    assert mahalanobis(pred, cube, ridge=0.0) == pytest.approx(euclidean, abs=1e-6), "FAIL: unit covariance"
    with pytest.raises(UndefinedMetricException):
        mahalanobis(pred, cube[:3])
    with pytest.raises(UndefinedMetricException):
        mahalanobis([], cube)


def test_icc():
    rng = np.random.default_rng(30)
    series = rng.normal(50.0, 10.0, size=21)
    assert icc(series, series) == pytest.approx(1.0, abs=1e-12)
    for _ in range(100):
        series_a = rng.normal(50.0, 10.0, size=rng.integers(3, 30))
        series_b = series_a + rng.normal(3.0, 4.0, size=series_a.size)
        expected = anova_icc(series_a.tolist(), series_b.tolist())
        assert icc(series_a, series_b) == pytest.approx(expected, abs=1e-9)
        assert icc(2.5 * series_a + 7.0, 2.5 * series_b + 7.0) == pytest.approx(icc(series_a, series_b), abs=1e-9)
    assert icc(series, series + 5.0) < 1.0
    independent = rng.normal(size=(2, 1000))
    assert abs(icc(*independent)) < 0.1
    with pytest.raises(UndefinedMetricException):
        icc([2, 2, 2], [2, 2, 2])
    with pytest.raises(DomainException):
        icc([1, 2], [1, 2])


def test_bland_altman():
    summary = bland_altman([5, 7, 4], [3, 8, 4])
    sd = math.sqrt(7.0 / 3.0)
    assert summary.mean_diff == pytest.approx(1.0 / 3.0)
    assert summary.sd_diff == pytest.approx(sd)
    assert summary.loa_low == pytest.approx(1.0 / 3.0 - LIMITS_OF_AGREEMENT * sd)
    assert summary.loa_high == pytest.approx(1.0 / 3.0 + LIMITS_OF_AGREEMENT * sd)
    assert summary.points == [(4.0, 2.0), (7.5, -1.0), (4.0, 0.0)]

    same = bland_altman([1, 5, 9], [1, 5, 9])
    assert same.mean_diff == 0.0 and same.loa_high - same.loa_low == 0.0
    shifted = bland_altman([4, 8, 12], [1, 5, 9])
    assert shifted.mean_diff == 3.0 and shifted.sd_diff == 0.0
    with pytest.raises(DomainException):
        bland_altman([1], [1])


def test_scatter_and_correlation():
    values = [3.0, 1.0, 4.0, 1.5, 9.0]
    assert scatter_and_correlation(values, values).pearson_r == pytest.approx(1.0)
    assert scatter_and_correlation(values, [-value for value in values]).pearson_r == pytest.approx(-1.0)
    rng = np.random.default_rng(4)
    series_a, series_b = rng.normal(size=20), rng.normal(size=20)
    centered_a, centered_b = series_a - series_a.mean(), series_b - series_b.mean()
    expected = (centered_a @ centered_b) / math.sqrt((centered_a @ centered_a) * (centered_b @ centered_b))
    summary = scatter_and_correlation(series_a, series_b)
    assert summary.pearson_r == pytest.approx(expected, abs=1e-12)
    assert summary.points[0] == (series_a[0], series_b[0])
    with pytest.raises(UndefinedMetricException):
        scatter_and_correlation([1, 1, 1], [1, 2, 3])
