"""
components.py:

Lesion extraction: binary masks are split into 3D connected components under 6, 18 or 26 connectivity. Lesion ids
follow the order in which components are first met in an x-fastest scan of the volume, starting at 1.
"""
import csv
import logging
from pathlib import Path

import numpy as np
from scipy import ndimage

from epvs_fusion.common.data_types.exceptions import DomainException, VolumeIOException
from epvs_fusion.common.data_types.lesion_data import Lesion, LesionSet
from epvs_fusion.common.data_types.volume import Volume, world_coordinates
from epvs_fusion.common.metrics.consistency import average_lesion_voxels

LOGGER = logging.getLogger("lesions")

# Neighbourhood size to scipy structuring element rank
CONNECTIVITY_RANK = {6: 1, 18: 2, 26: 3}
LESION_TABLE_COLUMNS = ("id", "volume_vox", "volume_mm3", "com_x_mm", "com_y_mm", "com_z_mm")
BURDEN_TABLE_COLUMNS = ("subject_id", "epvs_count", "total_voxels", "avg_voxels")


def center_of_mass(voxels, affine):
    """
    Unweighted center of mass of voxel indices.

    :param voxels: (N, 3) voxel indices, N >= 1
    :param affine: 4x4 voxel-to-world matrix (or a Volume / LesionSet carrying one)
    :return: (com in voxel coordinates, com in millimetres)
    """
    voxels = np.asarray(voxels, dtype=np.float64).reshape(-1, 3)
    if not len(voxels):
        raise DomainException("center of mass of an empty lesion")
    com_vox = voxels.mean(axis=0)
    return com_vox, world_coordinates(getattr(affine, "affine", affine), com_vox)


def connected_components(mask: Volume, connectivity=26) -> LesionSet:
    """
    Splits the foreground of a binary mask into lesions.

    :param mask: binary volume
    :param connectivity: 6, 18 or 26
    :return: lesion set covering exactly the foreground
    """
    if connectivity not in CONNECTIVITY_RANK:
        raise DomainException(f"connectivity must be 6, 18 or 26, got {connectivity}")
    if not np.all(np.isin(mask.data, (0.0, 1.0))):
        raise DomainException("lesion mask must be binary")
    structure = ndimage.generate_binary_structure(3, CONNECTIVITY_RANK[connectivity])
    # Label the transposed volume so scan order is x-fastest
    labels, count = ndimage.label(mask.data.T > 0, structure=structure)
    labels = labels.T
    voxel_volume = float(np.prod(mask.spacing))
    lesions = []
    if count:
        indices = np.argwhere(labels > 0)
        owners = labels[tuple(indices.T)]
        order = np.argsort(owners, kind="stable")
        groups = np.split(indices[order], np.cumsum(np.bincount(owners, minlength=count + 1)[1:])[:-1])
        for lesion_id, voxels in enumerate(groups, start=1):
            voxels = voxels[np.lexsort((voxels[:, 0], voxels[:, 1], voxels[:, 2]))]
            com_vox, com_mm = center_of_mass(voxels, mask.affine)
            lesions.append(Lesion(lesion_id, voxels, len(voxels), len(voxels) * voxel_volume, com_vox, com_mm))
    LOGGER.debug("Found %d lesions at connectivity %d", count, connectivity)
    return LesionSet(tuple(lesions), mask.dims, mask.spacing, mask.affine, connectivity)


def write_lesion_table(lesion_set: LesionSet, path):
    """
    Writes one CSV row per lesion: id, volume_vox, volume_mm3, com_x_mm, com_y_mm, com_z_mm.
    """
    try:
        with open(path, "w", newline="") as file_handle:
            writer = csv.writer(file_handle)
            writer.writerow(LESION_TABLE_COLUMNS)
            for lesion in lesion_set:
                writer.writerow([lesion.id, lesion.volume_vox, lesion.volume_mm3, *lesion.com_mm.tolist()])
    except OSError as exc:
        raise VolumeIOException(f"cannot write lesion table {path}: {exc}") from exc


def lesion_burden_rows(lesion_sets):
    """
    Per subject lesion burden: count, total voxels and average voxels per lesion (2 d.p.).

    :param lesion_sets: mapping of subject id to LesionSet
    :return: list of row tuples in BURDEN_TABLE_COLUMNS order
    """
    rows = []
    for subject_id, lesion_set in lesion_sets.items():
        total, count = lesion_set.total_voxels, lesion_set.count
        rows.append((subject_id, count, total, average_lesion_voxels(total, count)))
    return rows


def write_lesion_burden(lesion_sets, path):
    path = Path(path)
    try:
        with open(path, "w", newline="") as file_handle:
            writer = csv.writer(file_handle)
            writer.writerow(BURDEN_TABLE_COLUMNS)
            writer.writerows(lesion_burden_rows(lesion_sets))
    except OSError as exc:
        raise VolumeIOException(f"cannot write lesion burden table {path}: {exc}") from exc
