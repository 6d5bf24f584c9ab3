"""
@brief Model checkpoint reader

Reads the container written by checkpoint_encoder, validating magic, version, CRC and the architecture shape audit.
"""
import json
import logging
import struct
from pathlib import Path

import numpy as np

from epvs_fusion.common.data_types.exceptions import (
    CheckpointFormatException,
    EpvsException,
    TruncationException,
    VolumeIOException,
)
from epvs_fusion.common.decoders.decoder import Decoder
from epvs_fusion.common.encoders.checkpoint_encoder import BUFFER_KIND, CHECKPOINT_MAGIC, PARAMETER_KIND, compute_crc
from epvs_fusion.common.unet.network import UNetConfig, UNetModel, audit_shapes
from epvs_fusion.version import CHECKPOINT_FORMAT_VERSION

LOGGER = logging.getLogger("checkpoint")


class _Reader:
    """Cursor over the checkpoint body"""

    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise TruncationException(f"checkpoint needs {self.offset + size} bytes, has {len(self.data)}")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


class CheckpointDecoder(Decoder):
    """
    Decodes checkpoint bytes into a (UNetModel, metadata) pair.
    """

    def decode_api(self, data):
        if len(data) < len(CHECKPOINT_MAGIC) + 4 or data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
            raise CheckpointFormatException("bad magic")
        body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
        if compute_crc(body) != crc:
            raise CheckpointFormatException("CRC mismatch")
        reader = _Reader(body)
        reader.take(len(CHECKPOINT_MAGIC))
        version, config_length = reader.unpack("<HI")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointFormatException(f"unsupported format version {version}")
        header = json.loads(reader.take(config_length).decode("utf-8"))
        config = UNetConfig.from_dict(header["unet"])
        (count,) = reader.unpack("<I")
        tensors = {PARAMETER_KIND: {}, BUFFER_KIND: {}}
        for _ in range(count):
            kind, name_length = reader.unpack("<BH")
            if kind not in tensors:
                raise CheckpointFormatException(f"unknown tensor kind {kind}")
            name = reader.take(name_length).decode("utf-8")
            (ndim,) = reader.unpack("<B")
            shape = reader.unpack(f"<{ndim}I")
            size = int(np.prod(shape)) * 8
            tensors[kind][name] = np.frombuffer(reader.take(size), dtype="<f8").astype(np.float64).reshape(shape)
        if reader.offset != len(body):
            raise CheckpointFormatException(f"{len(body) - reader.offset} trailing bytes")
        model = UNetModel(config, tensors[PARAMETER_KIND], tensors[BUFFER_KIND])
        try:
            audit_shapes(model)
        except EpvsException as exc:
            raise CheckpointFormatException(exc.getMsg()) from exc
        return model, header.get("metadata", {})


def load_checkpoint(path):
    """
    Reads a checkpoint file.

    :return: (UNetModel, metadata dictionary)
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise VolumeIOException(f"cannot read checkpoint {path}: {exc}") from exc
    return CheckpointDecoder().decode(data)
