"""
orientation.py:

Reorientation of volumes to the closest axis-aligned RAS frame. Orientation codes come from nibabel.orientations; the
data is permuted and flipped so that every voxel keeps its world coordinate.
"""
import dataclasses
import logging

import numpy as np
from nibabel.orientations import apply_orientation, inv_ornt_aff, io_orientation

from epvs_fusion.common.data_types.exceptions import GeometryException
from epvs_fusion.common.data_types.volume import Volume

LOGGER = logging.getLogger("orientation")

RAS_ORIENTATION = np.array([[0, 1], [1, 1], [2, 1]], dtype=np.float64)
SINGULAR_TOLERANCE = 1e-12


def canonical_orientation(affine):
    """
    Orientation of each voxel axis against RAS as an (3, 2) array of (target axis, +1 or -1).
    """
    affine = np.asarray(affine, dtype=np.float64)
    if abs(np.linalg.det(affine[:3, :3])) < SINGULAR_TOLERANCE:
        raise GeometryException("affine is singular")
    return io_orientation(affine)


def reorient_to_canonical(volume: Volume) -> Volume:
    """
    Returns the volume with data transposed and flipped to the closest RAS orientation. Already canonical volumes are
    returned unchanged.

    :param volume: input volume (Volume or LabelVolume)
    :return: reoriented volume of the same type
    """
    orientation = canonical_orientation(volume.affine)
    if np.array_equal(orientation, RAS_ORIENTATION):
        return volume
    data = apply_orientation(volume.data, orientation)
    affine = volume.affine @ inv_ornt_aff(orientation, volume.dims)
    spacing = [0.0, 0.0, 0.0]
    for axis, (target, _) in enumerate(orientation):
        spacing[int(target)] = volume.spacing[axis]
    LOGGER.debug("Reoriented %s to RAS", volume.dims)
    return dataclasses.replace(volume, dims=data.shape, spacing=tuple(spacing), affine=affine, data=data)
