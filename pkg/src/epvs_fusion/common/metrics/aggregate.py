"""
aggregate.py:

Reduces per-subject reports to cohort level summaries. Every metric is averaged over the subjects where it is defined;
undefined entries are excluded per metric and counted, never replaced by zero.
"""
import logging
import math
from typing import List, Sequence

import numpy as np

from epvs_fusion.common.data_types.exceptions import ConfigException, DomainException, UndefinedMetricException
from epvs_fusion.common.data_types.report_data import METRIC_FIELDS, AggregateReport, MetricSummary, MetricsReport
from epvs_fusion.common.metrics.agreement import bland_altman, icc, scatter_and_correlation
from epvs_fusion.common.metrics.detection import magnitude_accuracy

LOGGER = logging.getLogger("aggregate")


def summarize(values) -> MetricSummary:
    """
    Mean and standard error (sample sd / sqrt(n)) of the defined values. SE is 0 for a single value.
    """
    defined = np.array([value for value in values if value is not None], dtype=np.float64)
    excluded = len(values) - defined.size
    if defined.size == 0:
        return MetricSummary(None, None, 0, excluded)
    se = float(defined.std(ddof=1) / math.sqrt(defined.size)) if defined.size > 1 else 0.0
    return MetricSummary(float(defined.mean()), se, int(defined.size), excluded)


def _series_statistic(name, function, series_a, series_b):
    try:
        return function(series_a, series_b)
    except (UndefinedMetricException, DomainException) as exc:
        LOGGER.warning("Cohort %s is undefined (%s)", name, exc.getMsg())
        return None


def sensitivity_precision_points(reports: Sequence[MetricsReport]):
    """
    Per-subject (subject id, sensitivity, precision) points and the medians of the defined values.

    :return: (points, median sensitivity, median precision)
    """
    points = [(report.subject_id, report.sensitivity, report.precision) for report in reports]

    def median(index):
        defined = [point[index] for point in points if point[index] is not None]
        return float(np.median(defined)) if defined else None

    return points, median(1), median(2)


def aggregate_subjects(reports: Sequence[MetricsReport]) -> AggregateReport:
    """
    Cohort summary of per-subject reports, regions included.

    :param reports: one report per subject
    :return: aggregate report
    """
    reports = list(reports)
    if not reports:
        raise ConfigException("cannot aggregate an empty list of reports")
    summaries = {name: summarize([report.metric(name) for report in reports]) for name in METRIC_FIELDS}
    for name, summary in summaries.items():
        if summary.n_excluded:
            LOGGER.info("%s undefined for %d of %d subjects", name, summary.n_excluded, len(reports))

    counts_pred = [report.lesion_count_pred for report in reports]
    counts_gt = [report.lesion_count_gt for report in reports]
    volumes_pred = [report.volume_pred_vox for report in reports]
    volumes_gt = [report.volume_gt_vox for report in reports]
    points, median_sensitivity, median_precision = sensitivity_precision_points(reports)

    return AggregateReport(
        n_subjects=len(reports),
        summaries=summaries,
        magnitude_accuracy_of_means=magnitude_accuracy(summaries["sensitivity"].mean, summaries["precision"].mean),
        icc_lesions=_series_statistic("lesion count ICC", icc, counts_pred, counts_gt),
        icc_volume=_series_statistic("volume ICC", icc, volumes_pred, volumes_gt),
        bland_altman_counts=_series_statistic("lesion count Bland-Altman", bland_altman, counts_pred, counts_gt),
        bland_altman_volumes=_series_statistic("volume Bland-Altman", bland_altman, volumes_pred, volumes_gt),
        scatter_counts=_series_statistic("lesion count correlation", scatter_and_correlation, counts_pred, counts_gt),
        scatter_volumes=_series_statistic("volume correlation", scatter_and_correlation, volumes_pred, volumes_gt),
        sensitivity_precision=points,
        median_sensitivity=median_sensitivity,
        median_precision=median_precision,
        regions=_aggregate_regions(reports),
    )


def _aggregate_regions(reports: List[MetricsReport]):
    names = []
    for report in reports:
        names.extend(name for name in report.regions if name not in names)
    return {
        name: aggregate_subjects([report.regions[name] for report in reports if name in report.regions])
        for name in names
    }
