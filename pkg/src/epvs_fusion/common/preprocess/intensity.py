"""
intensity.py:

Per-volume intensity normalization.
"""
import numpy as np

from epvs_fusion.common.data_types.exceptions import DegenerateInputException, DomainException
from epvs_fusion.common.data_types.volume import Volume, require_same_geometry


def normalize_intensity(volume: Volume, mask: Volume = None) -> Volume:
    """
    Z-scores the volume over the mask (the whole volume when no mask is given) using the population standard
    deviation. Voxels outside the mask are set to 0.

    :param volume: volume to normalize
    :param mask: optional binary mask with the volume's geometry
    :return: float64 normalized volume
    """
    if mask is None:
        inside = np.ones(volume.dims, dtype=bool)
    else:
        require_same_geometry(volume, mask, what="volume and mask")
        if not np.all(np.isin(mask.data, (0.0, 1.0))):
            raise DomainException("normalization mask must be binary")
        inside = mask.data > 0
    values = volume.data[inside]
    if values.size < 2:
        raise DegenerateInputException(f"normalization region has {values.size} voxel(s)")
    std = values.std()
    if std == 0:
        raise DegenerateInputException("normalization region is constant")
    normalized = np.zeros(volume.dims)
    normalized[inside] = (values - values.mean()) / std
    return volume.with_data(normalized, dtype="float64")
