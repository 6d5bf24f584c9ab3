"""
evaluation.py:

Builds the per-subject metric report from a predicted mask, the ground-truth mask and optionally a probability map and
a region label volume. Region reports assign every lesion to the region holding its rounded center of mass and
recompute matching and metrics on those lesion subsets.
"""
import dataclasses
import logging
from typing import Dict, Optional

import numpy as np

from epvs_fusion.common.data_types.exceptions import ConfigException, ShapeException, UndefinedMetricException
from epvs_fusion.common.data_types.lesion_data import LesionSet
from epvs_fusion.common.data_types.report_data import MetricsReport
from epvs_fusion.common.data_types.volume import (
    AFFINE_TOLERANCE,
    LabelVolume,
    Volume,
    require_same_geometry,
    world_coordinates,
)
from epvs_fusion.common.lesions.components import connected_components
from epvs_fusion.common.lesions.matching import DEFAULT_MAX_DIST_MM, match_lesions
from epvs_fusion.common.metrics.detection import detection_metrics, volumetric_similarity
from epvs_fusion.common.metrics.distances import hausdorff, mahalanobis
from epvs_fusion.common.metrics.ranking import auc_from_scores

LOGGER = logging.getLogger("evaluation")

UNASSIGNED = "unassigned"
HAUSDORFF_POINT_MODES = ("coms", "voxels")


@dataclasses.dataclass(frozen=True)
class EvaluationConfig:
    connectivity: int = 26
    max_dist_mm: float = DEFAULT_MAX_DIST_MM
    hausdorff_points: str = "coms"
    mahalanobis_ridge: float = 1e-6

    def __post_init__(self):
        if self.connectivity not in (6, 18, 26):
            raise ConfigException(f"evaluation.connectivity must be 6, 18 or 26, got {self.connectivity}")
        if self.hausdorff_points not in HAUSDORFF_POINT_MODES:
            raise ConfigException(f"evaluation.hausdorff_points must be one of {HAUSDORFF_POINT_MODES}")
        if self.max_dist_mm < 0 or self.mahalanobis_ridge < 0:
            raise ConfigException("evaluation distances must be non-negative")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values):
        fields = {field.name for field in dataclasses.fields(cls)}
        unknown = set(values) - fields
        if unknown:
            raise ConfigException(f"unknown evaluation settings {sorted(unknown)}")
        return cls(**values)


def _guarded(subject_id, metric, function, *args, **kwargs):
    """Evaluates a metric, turning an undefined value into None"""
    try:
        return function(*args, **kwargs)
    except UndefinedMetricException as exc:
        LOGGER.warning("Subject %s: %s is undefined (%s)", subject_id or "?", metric, exc.getMsg())
        return None


def _hausdorff_points(lesion_set: LesionSet, mode):
    if mode == "coms":
        return lesion_set.coms_mm()
    return world_coordinates(lesion_set.affine, lesion_set.voxel_indices())


def _report(pred_set, gt_set, scores, gt_mask, eval_mask, config, subject_id):
    match = match_lesions(pred_set, gt_set, config.max_dist_mm)
    counts = match.counts
    detection = _guarded(subject_id, "detection scores", detection_metrics, counts)
    sensitivity, precision, magnitude = detection if detection is not None else (None, None, None)
    inside = np.ones(gt_mask.dims, dtype=bool) if eval_mask is None else eval_mask
    return MetricsReport(
        subject_id=subject_id,
        sensitivity=sensitivity,
        precision=precision,
        magnitude_accuracy=magnitude,
        volumetric_similarity=volumetric_similarity(pred_set.total_voxels, gt_set.total_voxels),
        auc=_guarded(subject_id, "auc", auc_from_scores, scores[inside], gt_mask.data[inside] > 0),
        hausdorff_mm=_guarded(
            subject_id,
            "hausdorff",
            hausdorff,
            _hausdorff_points(pred_set, config.hausdorff_points),
            _hausdorff_points(gt_set, config.hausdorff_points),
        ),
        mahalanobis=_guarded(
            subject_id, "mahalanobis", mahalanobis, pred_set.coms_mm(), gt_set.coms_mm(), config.mahalanobis_ridge
        ),
        lesion_count_pred=pred_set.count,
        lesion_count_gt=gt_set.count,
        volume_pred_vox=pred_set.total_voxels,
        volume_gt_vox=gt_set.total_voxels,
        counts=counts,
    )


def lesion_regions(lesion_set: LesionSet, regions: LabelVolume) -> Dict[int, int]:
    """
    Region label at each lesion's rounded center of mass, keyed by lesion id.
    """
    labels = regions.labels()
    upper = np.array(regions.dims) - 1
    assignment = {}
    for lesion in lesion_set:
        voxel = np.clip(np.rint(lesion.com_vox).astype(np.int64), 0, upper)
        assignment[lesion.id] = int(labels[tuple(voxel)])
    return assignment


def regional_breakdown(
    pred_set: LesionSet,
    gt_set: LesionSet,
    regions: LabelVolume,
    prob: Optional[Volume] = None,
    gt_mask: Optional[Volume] = None,
    config: EvaluationConfig = EvaluationConfig(),
    subject_id="",
) -> Dict[str, MetricsReport]:
    """
    Per-region reports. Every named region gets a report; lesions whose center falls on label 0 go to an
    "unassigned" report, present only when such lesions exist. AUC is restricted to the region's voxels.

    :param pred_set: predicted lesions
    :param gt_set: ground-truth lesions
    :param regions: label volume with region names
    :param prob: score volume for AUC, the predicted mask when absent
    :param gt_mask: ground-truth mask for AUC, rebuilt from gt_set when absent
    :return: region name to report
    """
    pred_set.require_same_geometry(gt_set)
    if regions.dims != gt_set.dims or not np.allclose(regions.affine, gt_set.affine, atol=AFFINE_TOLERANCE):
        raise ShapeException(f"regions {regions.dims} do not match lesion geometry {gt_set.dims}")
    if gt_mask is None:
        gt_mask = Volume(gt_set.dims, gt_set.spacing, gt_set.affine, "uint8", gt_set.to_mask())
    scores = prob.data if prob is not None else pred_set.to_mask().astype(np.float64)
    pred_regions = lesion_regions(pred_set, regions)
    gt_regions = lesion_regions(gt_set, regions)
    labels = regions.labels()
    names = dict(sorted(regions.label_names.items()))
    for label in sorted(set(np.unique(labels).tolist()) - {0} - set(names)):
        names[label] = regions.name_of(label)
    if 0 in set(pred_regions.values()) | set(gt_regions.values()):
        names[0] = UNASSIGNED
    reports = {}
    for label, name in names.items():
        region_pred = pred_set.subset([lesion_id for lesion_id, owner in pred_regions.items() if owner == label])
        region_gt = gt_set.subset([lesion_id for lesion_id, owner in gt_regions.items() if owner == label])
        reports[name] = _report(region_pred, region_gt, scores, gt_mask, labels == label, config, subject_id)
    return reports


def evaluate_subject(
    pred_mask: Volume,
    gt_mask: Volume,
    prob: Optional[Volume] = None,
    regions: Optional[LabelVolume] = None,
    config: EvaluationConfig = EvaluationConfig(),
    subject_id="",
) -> MetricsReport:
    """
    Full report of one subject: lesion extraction, matching, every metric and the regional breakdown.

    :param pred_mask: predicted binary mask
    :param gt_mask: ground-truth binary mask
    :param prob: probability map used for AUC, the binary prediction when absent
    :param regions: optional region labels
    :param config: evaluation settings
    :param subject_id: id written into the report
    """
    volumes = [pred_mask, gt_mask] + [volume for volume in (prob, regions) if volume is not None]
    require_same_geometry(*volumes, what="evaluation volumes")
    pred_set = connected_components(pred_mask, config.connectivity)
    gt_set = connected_components(gt_mask, config.connectivity)
    scores = prob.data if prob is not None else pred_mask.data
    report = _report(pred_set, gt_set, scores, gt_mask, None, config, subject_id)
    if regions is not None:
        scored = prob if prob is not None else pred_mask
        report.regions = regional_breakdown(pred_set, gt_set, regions, scored, gt_mask, config, subject_id)
    return report
