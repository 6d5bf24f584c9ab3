"""
consistency.py:

Arithmetic of rounded summary tables: rounded averages of lesion burden and the agreement between rounded
sensitivity, precision and magnitude accuracy columns.
"""
import math

from epvs_fusion.common.data_types.exceptions import DomainException


def average_lesion_voxels(total_voxels, count, decimals=2):
    """
    Average lesion size in voxels rounded for reporting, None for subjects without lesions.
    """
    if total_voxels < 0 or count < 0:
        raise DomainException(f"negative lesion burden ({total_voxels}, {count})")
    if count == 0:
        return None
    return round(total_voxels / count, decimals)


def magnitude_accuracy_bounds(sensitivity, precision, decimals=2):
    """
    Range of sqrt(S^2 + P^2) over every (S, P) pair that rounds to the given values.

    :return: (low, high)
    """
    half = 0.5 * 10 ** -decimals
    low_s, low_p = max(sensitivity - half, 0.0), max(precision - half, 0.0)
    return math.sqrt(low_s ** 2 + low_p ** 2), math.sqrt((sensitivity + half) ** 2 + (precision + half) ** 2)


def is_magnitude_consistent(sensitivity, precision, magnitude_accuracy, decimals=2):
    """
    True when a rounded magnitude accuracy can come from unrounded S and P that round to the given values. The
    reported value may itself be off by half a unit in the last place.
    """
    half = 0.5 * 10 ** -decimals
    low, high = magnitude_accuracy_bounds(sensitivity, precision, decimals)
    return low - half - 1e-12 <= magnitude_accuracy <= high + half + 1e-12
