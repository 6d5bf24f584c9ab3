"""
augment.py:

Geometric augmentation of axial samples. Each output applies, in order, an optional flip, an optional integer
translation and an optional in-plane rotation. The same transform is applied to every channel and to the label;
images are resampled bilinearly and labels with nearest neighbour so they stay binary. Translations wrap around the
slice so the foreground count is preserved.
"""
import itertools
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from epvs_fusion.common.data_types.exceptions import AugmentationSpecException
from epvs_fusion.common.data_types.slice_sample import FLIP_AXES, AugmentationSpec, SliceSample

LOGGER = logging.getLogger("augment")

Transform = Tuple[Optional[str], Optional[Tuple[int, int]], Optional[float]]


def augmentation_count(spec: AugmentationSpec) -> int:
    """Closed form number of samples produced per input sample"""
    combinations = (1 + len(spec.flips)) * (1 + len(spec.translations)) * (1 + len(spec.rotations))
    return combinations - (0 if spec.include_identity else 1) + spec.n_random


def enumerate_transforms(spec: AugmentationSpec, seed=0) -> List[Transform]:
    """
    Lists the transforms of a spec: the full product first (identity first when included), then n_random seeded
    compositions.
    """
    transforms = [
        transform
        for transform in itertools.product((None, *spec.flips), (None, *spec.translations), (None, *spec.rotations))
        if spec.include_identity or transform != (None, None, None)
    ]
    rng = np.random.default_rng(seed)
    for _ in range(spec.n_random):
        flip = (None, *spec.flips)[rng.integers(len(spec.flips) + 1)]
        shift = (None, *spec.translations)[rng.integers(len(spec.translations) + 1)]
        angle = (None, *spec.rotations)[rng.integers(len(spec.rotations) + 1)]
        transforms.append((flip, shift, angle))
    return transforms


def _validate_translations(spec: AugmentationSpec, plane_shape):
    height, width = plane_shape
    for dx, dy in spec.translations:
        if abs(dx) > height or abs(dy) > width:
            raise AugmentationSpecException(f"translation ({dx}, {dy}) exceeds slice extent {plane_shape}")


def apply_transform(sample: SliceSample, transform: Transform) -> SliceSample:
    flip, shift, angle = transform
    channels, label = sample.channels, sample.label
    if flip is not None:
        channels = np.flip(channels, axis=FLIP_AXES[flip])
        label = np.flip(label, axis=FLIP_AXES[flip])
    if shift is not None:
        channels = np.roll(channels, shift, axis=(-2, -1))
        label = np.roll(label, shift, axis=(-2, -1))
    if angle is not None:
        channels = ndimage.rotate(channels, angle, axes=(1, 2), reshape=False, order=1, mode="constant", cval=0.0)
        label = ndimage.rotate(label, angle, axes=(0, 1), reshape=False, order=0, mode="constant", cval=0)
    return sample.with_arrays(channels, label)


def augment(sample: SliceSample, spec: AugmentationSpec, seed=0) -> List[SliceSample]:
    """
    Augments a sample.

    :param sample: sample to augment
    :param spec: augmentation plan
    :param seed: seed for the random compositions
    :return: augmentation_count(spec) samples
    """
    _validate_translations(spec, sample.plane_shape)
    return [apply_transform(sample, transform) for transform in enumerate_transforms(spec, seed)]
