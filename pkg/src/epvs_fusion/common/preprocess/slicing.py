"""
slicing.py:

Cutting co-registered volumes into multi-channel axial samples and putting planes back together. Axial plane k of a
volume is data[:, :, k], so a sample has height nx and width ny.
"""
import logging
from typing import List, Sequence

import numpy as np

from epvs_fusion.common.data_types.exceptions import DomainException, ShapeException
from epvs_fusion.common.data_types.slice_sample import SliceSample
from epvs_fusion.common.data_types.volume import Volume, require_same_geometry

LOGGER = logging.getLogger("slicing")


def extract_axial_slices(volumes: Sequence[Volume], labels: Volume, subject_id="") -> List[SliceSample]:
    """
    Returns one sample per axial plane, channels in the order of volumes.

    :param volumes: 1 to 4 co-registered volumes, one per sequence
    :param labels: binary ground truth mask sharing their geometry
    :param subject_id: subject the planes belong to
    :return: nz samples ordered by slice index
    """
    if not volumes:
        raise ShapeException("at least one channel volume is required")
    require_same_geometry(*volumes, labels, what="channel volumes and labels")
    if not np.all(np.isin(labels.data, (0.0, 1.0))):
        raise DomainException("labels must be binary")
    channels = np.stack([volume.data for volume in volumes])
    label_data = labels.data.astype(np.int64)
    return [
        SliceSample(channels[:, :, :, index], label_data[:, :, index], subject_id, index)
        for index in range(labels.dims[2])
    ]


def stack_axial_slices(planes, reference: Volume, dtype=None) -> Volume:
    """
    Reassembles planes (nz arrays of nx x ny) into a volume with the reference geometry.
    """
    data = np.stack([np.asarray(plane) for plane in planes], axis=2)
    if data.shape != reference.dims:
        raise ShapeException(f"stacked planes have shape {data.shape}, reference is {reference.dims}")
    return Volume(reference.dims, reference.spacing, reference.affine, dtype or reference.dtype, data)


def symmetric_pads(extent, multiple):
    """(before, after) padding bringing extent up to a multiple"""
    total = (-extent) % multiple
    return total // 2, total - total // 2


def pad_to_multiple(array, multiple):
    """
    Zero pads the last two axes symmetrically up to a multiple of `multiple`.

    :return: padded array and the ((top, bottom), (left, right)) pads used
    """
    pads = (symmetric_pads(array.shape[-2], multiple), symmetric_pads(array.shape[-1], multiple))
    if pads == ((0, 0), (0, 0)):
        return array, pads
    width = [(0, 0)] * (array.ndim - 2) + list(pads)
    return np.pad(array, width), pads


def crop_pads(array, pads):
    """Removes padding added by pad_to_multiple"""
    (top, bottom), (left, right) = pads
    return array[..., top : array.shape[-2] - bottom, left : array.shape[-1] - right]


def select_training_slices(samples: Sequence[SliceSample], empty_fraction, seed) -> List[SliceSample]:
    """
    Keeps every sample with foreground plus a seeded fraction of the empty ones, preserving order.

    :param samples: candidate samples
    :param empty_fraction: share of empty samples to keep, in [0, 1]
    :param seed: seed of the draw
    """
    if not 0.0 <= empty_fraction <= 1.0:
        raise DomainException(f"empty slice fraction must be in [0, 1], got {empty_fraction}")
    empty = [index for index, sample in enumerate(samples) if not sample.label.any()]
    rng = np.random.default_rng(seed)
    kept_empty = set()
    if empty:
        draw = rng.choice(empty, size=int(round(empty_fraction * len(empty))), replace=False)
        kept_empty = set(draw.tolist())
    selected = [sample for index, sample in enumerate(samples) if sample.label.any() or index in kept_empty]
    LOGGER.debug("Selected %d of %d slices (%d empty)", len(selected), len(samples), len(kept_empty))
    return selected
