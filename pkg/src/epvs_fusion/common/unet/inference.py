"""
inference.py:

Whole-volume prediction: every axial plane is padded to the network divisor, run through the network in batches and
cropped back, then the planes are re-stacked into volumes with the input geometry.
"""
import logging
from typing import Sequence, Tuple

import numpy as np

from epvs_fusion.common.data_types.exceptions import ShapeException
from epvs_fusion.common.data_types.volume import Volume, require_same_geometry
from epvs_fusion.common.preprocess.slicing import crop_pads, pad_to_multiple
from epvs_fusion.common.unet import layers
from epvs_fusion.common.unet.network import UNetModel, forward

LOGGER = logging.getLogger("inference")


def predict_volume(model: UNetModel, volumes: Sequence[Volume], batch_size=8) -> Tuple[Volume, Volume]:
    """
    Segments co-registered volumes.

    :param model: trained network
    :param volumes: one volume per input channel, in the network's channel order
    :param batch_size: planes per forward pass
    :return: (foreground probability volume, binary volume)
    """
    if len(volumes) != model.config.in_channels:
        raise ShapeException(f"network expects {model.config.in_channels} volumes, got {len(volumes)}")
    require_same_geometry(*volumes, what="input volumes")
    reference = volumes[0]
    # (nz, n, nx, ny)
    planes = np.moveaxis(np.stack([volume.data for volume in volumes]), 3, 0)
    planes, pads = pad_to_multiple(planes, model.config.divisor)
    probabilities = []
    for start in range(0, planes.shape[0], batch_size):
        logits = forward(model, planes[start : start + batch_size])
        probabilities.append(crop_pads(layers.softmax(logits, axis=1), pads))
    probabilities = np.concatenate(probabilities)
    # Threshold the float32 values that get stored
    foreground = np.moveaxis(probabilities[:, 1], 0, 2).astype(np.float32).astype(np.float64)
    if model.config.num_classes == 2:
        labels = foreground > 0.5
    else:
        labels = np.moveaxis(probabilities.argmax(axis=1), 0, 2) == 1
    LOGGER.debug("Predicted %d planes of %s", planes.shape[0], reference.dims)
    return (
        reference.with_data(foreground, dtype="float32"),
        reference.with_data(labels.astype(np.float64), dtype="uint8"),
    )
