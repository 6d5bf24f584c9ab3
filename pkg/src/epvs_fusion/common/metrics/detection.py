"""
detection.py:

Lesion level detection scores and volumetric similarity.
"""
import math

from epvs_fusion.common.data_types.exceptions import DomainException, UndefinedMetricException
from epvs_fusion.common.data_types.lesion_data import MatchCounts
from epvs_fusion.common.data_types.report_data import DetectionScores


def magnitude_accuracy(sensitivity, precision):
    """sqrt(S^2 + P^2), None unless both are defined"""
    if sensitivity is None or precision is None:
        return None
    return math.sqrt(sensitivity * sensitivity + precision * precision)


def detection_metrics(counts: MatchCounts) -> DetectionScores:
    """
    Sensitivity TP / (TP + FN), precision TP / (TP + FP) and magnitude accuracy. A score whose denominator is zero is
    None; when both are zero nothing is defined and UndefinedMetricException is raised.
    """
    if counts.tp + counts.fn == 0 and counts.tp + counts.fp == 0:
        raise UndefinedMetricException("no predicted and no ground-truth lesions")
    sensitivity = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    return DetectionScores(sensitivity, precision, magnitude_accuracy(sensitivity, precision))


def volumetric_similarity(vol_pred, vol_gt):
    """
    1 - |Vp - Vg| / (Vp + Vg), 1 when both volumes are empty.
    """
    if vol_pred < 0 or vol_gt < 0:
        raise DomainException(f"volumes must be non-negative, got ({vol_pred}, {vol_gt})")
    if vol_pred + vol_gt == 0:
        return 1.0
    return 1.0 - abs(vol_pred - vol_gt) / (vol_pred + vol_gt)
