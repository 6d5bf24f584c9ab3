"""
matching.py:

One-to-one matching of predicted lesions to ground-truth lesions by center of mass distance. Every pair within the
distance gate is a candidate; candidates are taken nearest first (ties by predicted id, then ground-truth id) and
accepted while both lesions are still free.
"""
import logging

import numpy as np
from scipy.spatial.distance import cdist

from epvs_fusion.common.data_types.exceptions import DomainException
from epvs_fusion.common.data_types.lesion_data import LesionSet, MatchResult

LOGGER = logging.getLogger("matching")

DEFAULT_MAX_DIST_MM = 3.0


def match_lesions(pred: LesionSet, gt: LesionSet, max_dist_mm=DEFAULT_MAX_DIST_MM) -> MatchResult:
    """
    Greedy nearest-first matching.

    :param pred: predicted lesions
    :param gt: ground-truth lesions with the same geometry
    :param max_dist_mm: distance gate between centers of mass
    :return: pairs and unmatched ids
    """
    pred.require_same_geometry(gt)
    if max_dist_mm < 0:
        raise DomainException(f"matching distance must be non-negative, got {max_dist_mm}")
    pred_ids, gt_ids = np.array(pred.ids(), dtype=np.int64), np.array(gt.ids(), dtype=np.int64)
    pairs = []
    if len(pred_ids) and len(gt_ids):
        distances = cdist(pred.coms_mm(), gt.coms_mm())
        rows, columns = np.nonzero(distances <= max_dist_mm)
        candidate_distances = distances[rows, columns]
        order = np.lexsort((gt_ids[columns], pred_ids[rows], candidate_distances))
        claimed_pred, claimed_gt = set(), set()
        for index in order:
            pred_id, gt_id = int(pred_ids[rows[index]]), int(gt_ids[columns[index]])
            if pred_id in claimed_pred or gt_id in claimed_gt:
                continue
            claimed_pred.add(pred_id)
            claimed_gt.add(gt_id)
            pairs.append((pred_id, gt_id, float(candidate_distances[index])))
    matched_pred = {pair[0] for pair in pairs}
    matched_gt = {pair[1] for pair in pairs}
    return MatchResult(
        tuple(pairs),
        tuple(int(lesion_id) for lesion_id in pred_ids if lesion_id not in matched_pred),
        tuple(int(lesion_id) for lesion_id in gt_ids if lesion_id not in matched_gt),
    )
