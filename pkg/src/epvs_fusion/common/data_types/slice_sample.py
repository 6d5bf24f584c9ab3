"""
@brief Two dimensional training samples cut from co-registered volumes.
"""
import dataclasses
from typing import Sequence, Tuple

import numpy as np

from epvs_fusion.common.data_types.exceptions import AugmentationSpecException, ShapeException

FLIP_AXES = {"horizontal": -1, "vertical": -2}


@dataclasses.dataclass(frozen=True, eq=False)
class SliceSample:
    """
    One axial plane: channels has shape (n, H, W) with one channel per sequence of the experiment's combination, label
    has shape (H, W) with 0 for background and 1 for ePVS.
    """

    channels: np.ndarray
    label: np.ndarray
    subject_id: str
    slice_index: int

    def __post_init__(self):
        channels = np.array(self.channels, dtype=np.float64)
        label = np.array(self.label, dtype=np.int64)
        if channels.ndim != 3 or not 1 <= channels.shape[0] <= 4:
            raise ShapeException(f"channels must have shape (n, H, W) with 1 <= n <= 4, got {channels.shape}")
        if label.shape != channels.shape[1:]:
            raise ShapeException(f"label shape {label.shape} does not match channel planes {channels.shape[1:]}")
        channels.setflags(write=False)
        label.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "label", label)

    @property
    def n_channels(self):
        return self.channels.shape[0]

    @property
    def plane_shape(self) -> Tuple[int, int]:
        return self.label.shape

    def with_arrays(self, channels, label):
        return dataclasses.replace(self, channels=channels, label=label)

    def equals(self, other):
        return (
            isinstance(other, SliceSample)
            and self.subject_id == other.subject_id
            and self.slice_index == other.slice_index
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.label, other.label)
        )


@dataclasses.dataclass(frozen=True)
class AugmentationSpec:
    """
    Geometric augmentation plan. Every combination of (no flip or one flip) x (no shift or one translation) x
    (no rotation or one rotation) is produced, plus n_random seeded compositions drawn from the same lists.
    """

    flips: Tuple[str, ...] = ()
    translations: Tuple[Tuple[int, int], ...] = ()
    rotations: Tuple[float, ...] = ()
    include_identity: bool = True
    n_random: int = 0

    def __post_init__(self):
        flips = tuple(self.flips)
        unknown = [flip for flip in flips if flip not in FLIP_AXES]
        if unknown or len(set(flips)) != len(flips):
            raise AugmentationSpecException(f"flips must be distinct members of {sorted(FLIP_AXES)}, got {flips}")
        translations = tuple((int(dx), int(dy)) for dx, dy in self.translations)
        rotations = tuple(float(angle) for angle in self.rotations)
        if self.n_random < 0:
            raise AugmentationSpecException("n_random must be non-negative")
        if self.n_random and not (flips or translations or rotations):
            raise AugmentationSpecException("random compositions need at least one operation to draw from")
        object.__setattr__(self, "flips", flips)
        object.__setattr__(self, "translations", translations)
        object.__setattr__(self, "rotations", rotations)

    @classmethod
    def from_dict(cls, values: dict):
        return cls(
            flips=tuple(values.get("flips", ())),
            translations=tuple(tuple(shift) for shift in values.get("translations", ())),
            rotations=tuple(values.get("rotations", ())),
            include_identity=bool(values.get("include_identity", True)),
            n_random=int(values.get("n_random", 0)),
        )

    def to_dict(self):
        return {
            "flips": list(self.flips),
            "translations": [list(shift) for shift in self.translations],
            "rotations": list(self.rotations),
            "include_identity": self.include_identity,
            "n_random": self.n_random,
        }


def stack_channels(samples: Sequence[SliceSample]):
    """
    Stacks samples into a batch: (B, n, H, W) images and (B, H, W) labels.
    """
    images = np.stack([sample.channels for sample in samples])
    labels = np.stack([sample.label for sample in samples])
    return images, labels
