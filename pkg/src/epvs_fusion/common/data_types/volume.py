"""
@brief Voxel volume data classes.

A Volume is an immutable 3D scalar grid with its voxel-to-world transform. Data is held as a read-only float64 array
indexed [x, y, z]; the flattened order used by files and checkpoints is x-fastest (Fortran order). The dtype field
records the storage type to use when the volume is written out. Float32 volumes hold their values already rounded to
float32 so writing and reading them back is exact.
"""
import dataclasses
from typing import Dict, Sequence, Tuple

import numpy as np

from epvs_fusion.common.data_types.exceptions import DomainException, GeometryException, ShapeException

SUPPORTED_DTYPES = ("uint8", "int16", "float32", "float64")
AFFINE_TOLERANCE = 1e-6


def _frozen_array(values, shape=None):
    array = np.array(values, dtype=np.float64, copy=True)
    if shape is not None and array.shape != shape:
        raise ShapeException(f"expected array of shape {shape} got {array.shape}")
    array.setflags(write=False)
    return array


def _as_float32(data):
    """Rounds float64 values to the nearest float32, rejecting finite values float32 cannot hold"""
    finite = data[np.isfinite(data)]
    if finite.size and np.abs(finite).max() > np.finfo(np.float32).max:
        raise DomainException(f"values outside the float32 range, largest magnitude {np.abs(finite).max():g}")
    return data.astype(np.float32).astype(np.float64)


@dataclasses.dataclass(frozen=True, eq=False)
class Volume:
    """
    3D scalar volume. Equality is value equality through `equals` since numpy arrays do not define a boolean ==.
    """

    dims: Tuple[int, int, int]
    spacing: Tuple[float, float, float]
    affine: np.ndarray
    dtype: str
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(dim) for dim in self.dims)
        if len(dims) != 3 or any(dim < 1 for dim in dims):
            raise ShapeException(f"dims must be three positive integers, got {self.dims}")
        spacing = tuple(float(space) for space in self.spacing)
        if len(spacing) != 3 or not all(np.isfinite(spacing)) or any(space <= 0 for space in spacing):
            raise GeometryException(f"spacing must be three positive values, got {self.spacing}")
        if self.dtype not in SUPPORTED_DTYPES:
            raise DomainException(f"dtype {self.dtype} not one of {SUPPORTED_DTYPES}")
        affine = _frozen_array(self.affine, (4, 4))
        if not np.array_equal(affine[3], [0.0, 0.0, 0.0, 1.0]):
            raise GeometryException(f"affine last row must be [0 0 0 1], got {affine[3]}")
        data = np.asarray(self.data)
        if data.size != int(np.prod(dims)):
            raise ShapeException(f"data has {data.size} elements, dims {dims} need {int(np.prod(dims))}")
        if data.ndim == 1:
            data = data.reshape(dims, order="F")
        elif data.shape != dims:
            raise ShapeException(f"data shape {data.shape} does not match dims {dims}")
        if self.dtype == "float32":
            data = _as_float32(np.asarray(data, dtype=np.float64))
        data = _frozen_array(data)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", affine)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, data, spacing=(1.0, 1.0, 1.0), affine=None, dtype="float64"):
        """
        Builds a volume from a 3D array. The default affine is the diagonal spacing matrix.
        """
        data = np.asarray(data)
        if data.ndim != 3:
            raise ShapeException(f"expected a 3D array, got {data.ndim} dimensions")
        if affine is None:
            affine = np.diag([*spacing, 1.0])
        return cls(tuple(data.shape), tuple(spacing), affine, dtype, data)

    def flat_data(self):
        """Returns the voxel values in x-fastest order"""
        return self.data.ravel(order="F")

    def with_data(self, data, dtype=None):
        """Returns a volume with this geometry and new data"""
        return dataclasses.replace(self, data=data, dtype=dtype or self.dtype)

    def same_geometry(self, other):
        return self.dims == other.dims and np.allclose(self.affine, other.affine, atol=AFFINE_TOLERANCE)

    def equals(self, other):
        return (
            isinstance(other, Volume)
            and self.same_geometry(other)
            and np.allclose(self.spacing, other.spacing)
            and self.dtype == other.dtype
            and np.array_equal(self.data, other.data)
        )


@dataclasses.dataclass(frozen=True, eq=False)
class LabelVolume(Volume):
    """
    Integer label map. Label 0 is background, the other labels are named by label_names.
    """

    label_names: Dict[int, str] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        super().__post_init__()
        if not np.array_equal(self.data, np.round(self.data)):
            raise DomainException("label volume values must be integers")
        object.__setattr__(self, "label_names", {int(key): str(value) for key, value in self.label_names.items()})

    def labels(self):
        return self.data.astype(np.int64)

    def name_of(self, label):
        """Name of a label, "unassigned" for background"""
        if label == 0:
            return "unassigned"
        return self.label_names.get(int(label), f"region_{int(label)}")


def require_same_geometry(*volumes: Volume, what: str = "volumes"):
    """
    Raises ShapeException unless all volumes share dims and affine.
    """
    reference = volumes[0]
    for volume in volumes[1:]:
        if not reference.same_geometry(volume):
            raise ShapeException(f"{what} differ in geometry: {reference.dims} vs {volume.dims}")


def world_coordinates(affine, voxels: Sequence) -> np.ndarray:
    """
    Maps voxel indices (N x 3) to world coordinates in millimetres through a 4x4 affine.

    :param affine: 4x4 voxel-to-world matrix or a Volume
    :param voxels: voxel indices, shape (N, 3) or (3,)
    :return: world coordinates with the same leading shape
    """
    if isinstance(affine, Volume):
        affine = affine.affine
    points = np.asarray(voxels, dtype=np.float64)
    return points @ np.asarray(affine)[:3, :3].T + np.asarray(affine)[:3, 3]
