"""
distances.py:

Point set distances in millimetres: symmetric Hausdorff distance and the mean Mahalanobis distance of predicted lesion
centers to the distribution of ground-truth lesion centers.
"""
import numpy as np
from scipy.spatial.distance import directed_hausdorff

from epvs_fusion.common.data_types.exceptions import UndefinedMetricException

MIN_DISTRIBUTION_POINTS = 4


def _points(values):
    points = np.asarray(values, dtype=np.float64)
    return points.reshape(-1, 3) if points.size else np.empty((0, 3))


def hausdorff(points_a, points_b):
    """
    max(sup_a inf_b d(a, b), sup_b inf_a d(a, b)) between two non-empty (N, 3) point sets.
    """
    points_a, points_b = _points(points_a), _points(points_b)
    if not len(points_a) or not len(points_b):
        raise UndefinedMetricException("Hausdorff distance of an empty point set")
    return float(max(directed_hausdorff(points_a, points_b)[0], directed_hausdorff(points_b, points_a)[0]))


def mahalanobis(pred_coms, gt_coms, ridge=1e-6):
    """
    Mean over predicted points of sqrt((x - mu)^T S^-1 (x - mu)), with mu and S the mean and population covariance
    (plus ridge * I) of the ground-truth points.
    """
    pred_coms, gt_coms = _points(pred_coms), _points(gt_coms)
    if len(gt_coms) < MIN_DISTRIBUTION_POINTS:
        raise UndefinedMetricException(f"Mahalanobis distance needs {MIN_DISTRIBUTION_POINTS} ground-truth points")
    if not len(pred_coms):
        raise UndefinedMetricException("Mahalanobis distance without predicted points")
    center = gt_coms.mean(axis=0)
    covariance = np.cov(gt_coms, rowvar=False, bias=True) + ridge * np.eye(3)
    try:
        precision = np.linalg.inv(covariance)
    except np.linalg.LinAlgError as exc:
        raise UndefinedMetricException("ground-truth covariance is singular") from exc
    offsets = pred_coms - center
    squared = np.einsum("ni,ij,nj->n", offsets, precision, offsets)
    return float(np.sqrt(np.maximum(squared, 0.0)).mean())
