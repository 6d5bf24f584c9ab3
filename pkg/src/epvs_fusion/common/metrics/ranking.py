"""
ranking.py:

Voxel level area under the ROC curve as the Mann-Whitney statistic: the chance that a random foreground voxel scores
higher than a random background voxel, ties counting one half. Computed from midranks, no curve is drawn.
"""
import numpy as np
from scipy.stats import rankdata

from epvs_fusion.common.data_types.exceptions import UndefinedMetricException
from epvs_fusion.common.data_types.volume import Volume, require_same_geometry


def auc_from_scores(scores, labels):
    """
    :param scores: 1D scores
    :param labels: 1D booleans, True for the positive class
    :return: AUC in [0, 1]
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    positives = int(labels.sum())
    negatives = labels.size - positives
    if positives == 0 or negatives == 0:
        raise UndefinedMetricException("AUC needs both classes")
    ranks = rankdata(scores)
    u_statistic = ranks[labels].sum() - positives * (positives + 1) / 2.0
    return float(u_statistic / (positives * negatives))


def roc_auc(prob: Volume, gt: Volume, eval_mask: Volume = None):
    """
    AUC of a probability (or any score) volume against a binary ground truth, optionally within a mask.
    """
    volumes = (prob, gt) if eval_mask is None else (prob, gt, eval_mask)
    require_same_geometry(*volumes, what="score, ground truth and mask volumes")
    inside = np.ones(gt.dims, dtype=bool) if eval_mask is None else eval_mask.data > 0
    return auc_from_scores(prob.data[inside], gt.data[inside] > 0)
