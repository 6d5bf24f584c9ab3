"""
@brief Model checkpoint writer

Binary layout (all integers little-endian):
    +-----------+-------------+-------------+-------------+-----------+---------------------+---------+
    | magic (8) | version U16 | config U32  | config JSON | count U32 | tensor records ...  | CRC U32 |
    +-----------+-------------+-------------+-------------+-----------+---------------------+---------+

A tensor record is: kind U8 (0 parameter, 1 buffer), name length U16, UTF-8 name, ndim U8, ndim x U32 extents, then
the row-major float64 payload. The CRC-32 covers every preceding byte.
"""
import json
import logging
import struct
import zlib
from pathlib import Path

import numpy as np

from epvs_fusion.common.data_types.exceptions import VolumeIOException
from epvs_fusion.common.encoders.encoder import Encoder
from epvs_fusion.common.unet.network import UNetModel, audit_shapes
from epvs_fusion.version import CHECKPOINT_FORMAT_VERSION

LOGGER = logging.getLogger("checkpoint")

CHECKPOINT_MAGIC = b"EPVSCKPT"
PARAMETER_KIND = 0
BUFFER_KIND = 1


def compute_crc(buff):
    return zlib.crc32(buff) & 0xFFFFFFFF


class CheckpointEncoder(Encoder):
    """
    Encodes a (model, metadata) pair. Metadata is any JSON serializable dictionary (sequence combination, training
    history).
    """

    def encode_api(self, data):
        model, metadata = data if isinstance(data, tuple) else (data, {})
        audit_shapes(model)
        config = json.dumps({"unet": model.config.to_dict(), "metadata": metadata}, sort_keys=True).encode("utf-8")
        records = [
            CHECKPOINT_MAGIC,
            struct.pack("<HI", CHECKPOINT_FORMAT_VERSION, len(config)),
            config,
            struct.pack("<I", len(model.parameters) + len(model.buffers)),
        ]
        for kind, tensors in ((PARAMETER_KIND, model.parameters), (BUFFER_KIND, model.buffers)):
            for name, tensor in tensors.items():
                encoded_name = name.encode("utf-8")
                records.append(struct.pack("<BH", kind, len(encoded_name)) + encoded_name)
                records.append(struct.pack(f"<B{tensor.ndim}I", tensor.ndim, *tensor.shape))
                records.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
        body = b"".join(records)
        return body + struct.pack("<I", compute_crc(body))


def save_checkpoint(model: UNetModel, path, metadata=None):
    """
    Writes a checkpoint file, creating parent directories.
    """
    path = Path(path)
    encoded = CheckpointEncoder().encode_api((model, metadata or {}))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encoded)
    except OSError as exc:
        raise VolumeIOException(f"cannot write checkpoint {path}: {exc}") from exc
    LOGGER.info("Saved checkpoint %s (%d bytes)", path, len(encoded))
