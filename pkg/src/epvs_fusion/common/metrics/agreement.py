"""
agreement.py:

Agreement statistics between two per-subject measurement series (predicted and ground-truth lesion counts or
volumes): one-way random effects ICC(1,1), Bland-Altman limits and Pearson correlation.
"""
import numpy as np
from scipy.stats import pearsonr

from epvs_fusion.common.data_types.exceptions import DomainException, UndefinedMetricException
from epvs_fusion.common.data_types.report_data import AgreementSummary, ScatterSummary

LIMITS_OF_AGREEMENT = 1.96


def _series(series_a, series_b, minimum):
    series_a = np.asarray(series_a, dtype=np.float64).ravel()
    series_b = np.asarray(series_b, dtype=np.float64).ravel()
    if series_a.shape != series_b.shape:
        raise DomainException(f"series lengths differ: {series_a.size} vs {series_b.size}")
    if series_a.size < minimum:
        raise DomainException(f"need at least {minimum} paired values, got {series_a.size}")
    return series_a, series_b


def icc(series_a, series_b):
    """
    ICC(1,1) = (BMS - WMS) / (BMS + (k - 1) WMS) with k = 2 ratings per subject.
    """
    ratings = np.column_stack(_series(series_a, series_b, 3))
    subjects, raters = ratings.shape
    subject_means = ratings.mean(axis=1)
    between = raters * ((subject_means - ratings.mean()) ** 2).sum() / (subjects - 1)
    within = ((ratings - subject_means[:, None]) ** 2).sum() / (subjects * (raters - 1))
    if between + (raters - 1) * within == 0:
        raise UndefinedMetricException("ICC of series without variance")
    return float((between - within) / (between + (raters - 1) * within))


def bland_altman(series_a, series_b) -> AgreementSummary:
    """
    Differences a - b: mean, sample standard deviation, 1.96 sd limits and the plotted ((a + b) / 2, a - b) points.
    """
    series_a, series_b = _series(series_a, series_b, 2)
    differences = series_a - series_b
    mean_diff = float(differences.mean())
    sd_diff = float(differences.std(ddof=1))
    points = [(float(mean), float(diff)) for mean, diff in zip((series_a + series_b) / 2.0, differences)]
    return AgreementSummary(
        mean_diff,
        sd_diff,
        mean_diff - LIMITS_OF_AGREEMENT * sd_diff,
        mean_diff + LIMITS_OF_AGREEMENT * sd_diff,
        points,
    )


def scatter_and_correlation(series_a, series_b) -> ScatterSummary:
    """
    (a, b) points and their Pearson correlation.
    """
    series_a, series_b = _series(series_a, series_b, 3)
    if np.ptp(series_a) == 0 or np.ptp(series_b) == 0:
        raise UndefinedMetricException("correlation of a constant series")
    correlation = pearsonr(series_a, series_b)[0]
    return ScatterSummary([(float(a), float(b)) for a, b in zip(series_a, series_b)], float(correlation))
