"""
@brief Lesion data classes.

Lesions are the connected components of a binary mask. A LesionSet keeps the geometry of the mask it came from so
that sets can be checked for compatibility before matching.
"""
import dataclasses
from typing import List, Tuple

import numpy as np

from epvs_fusion.common.data_types.exceptions import DomainException, ShapeException
from epvs_fusion.common.data_types.volume import AFFINE_TOLERANCE


@dataclasses.dataclass(frozen=True, eq=False)
class Lesion:
    """
    A single lesion. voxels is an (N, 3) integer array of [x, y, z] indices in scan order.
    """

    id: int
    voxels: np.ndarray
    volume_vox: int
    volume_mm3: float
    com_vox: np.ndarray
    com_mm: np.ndarray

    def __post_init__(self):
        if self.volume_vox < 1 or self.volume_vox != len(self.voxels):
            raise DomainException(f"lesion {self.id} has {len(self.voxels)} voxels, volume {self.volume_vox}")


@dataclasses.dataclass(frozen=True, eq=False)
class LesionSet:
    """
    Lesions of one mask together with the mask geometry and the connectivity used to extract them.
    """

    lesions: Tuple[Lesion, ...]
    dims: Tuple[int, int, int]
    spacing: Tuple[float, float, float]
    affine: np.ndarray
    connectivity: int = 26

    def __post_init__(self):
        if self.connectivity not in (6, 18, 26):
            raise DomainException(f"connectivity must be 6, 18 or 26, got {self.connectivity}")
        object.__setattr__(self, "lesions", tuple(self.lesions))

    def __len__(self):
        return len(self.lesions)

    def __iter__(self):
        return iter(self.lesions)

    @property
    def count(self):
        return len(self.lesions)

    @property
    def total_voxels(self):
        return int(sum(lesion.volume_vox for lesion in self.lesions))

    @property
    def total_mm3(self):
        return float(sum(lesion.volume_mm3 for lesion in self.lesions))

    def ids(self) -> List[int]:
        return [lesion.id for lesion in self.lesions]

    def coms_mm(self) -> np.ndarray:
        """Centers of mass in millimetres, shape (N, 3)"""
        if not self.lesions:
            return np.empty((0, 3))
        return np.stack([lesion.com_mm for lesion in self.lesions])

    def voxel_indices(self) -> np.ndarray:
        """All lesion voxels, shape (N, 3)"""
        if not self.lesions:
            return np.empty((0, 3), dtype=np.int64)
        return np.concatenate([lesion.voxels for lesion in self.lesions])

    def subset(self, ids) -> "LesionSet":
        """Lesion set restricted to the given ids, preserving order"""
        keep = set(ids)
        return dataclasses.replace(self, lesions=tuple(lesion for lesion in self.lesions if lesion.id in keep))

    def to_mask(self) -> np.ndarray:
        mask = np.zeros(self.dims, dtype=np.uint8)
        for lesion in self.lesions:
            mask[tuple(lesion.voxels.T)] = 1
        return mask

    def require_same_geometry(self, other: "LesionSet"):
        if self.dims != other.dims or not np.allclose(self.affine, other.affine, atol=AFFINE_TOLERANCE):
            raise ShapeException(f"lesion sets differ in geometry: {self.dims} vs {other.dims}")


@dataclasses.dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise DomainException(f"match counts must be non-negative: {self}")

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class MatchResult:
    """
    One-to-one lesion matching. pairs holds (pred id, gt id, COM distance in mm).
    """

    pairs: Tuple[Tuple[int, int, float], ...]
    unmatched_pred: Tuple[int, ...]
    unmatched_gt: Tuple[int, ...]

    @property
    def counts(self) -> MatchCounts:
        return MatchCounts(tp=len(self.pairs), fp=len(self.unmatched_pred), fn=len(self.unmatched_gt))
