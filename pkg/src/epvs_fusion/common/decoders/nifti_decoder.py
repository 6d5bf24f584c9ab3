"""
@brief NIfTI-1 decoder

Parses single-file NIfTI-1 streams (magic "n+1") and header/image pairs (magic "ni1") into Volume objects. Streams
may be gzip-compressed. Header fields are unpacked by nibabel's Nifti1Header, payload conversion is done here so that
datatype, truncation and scaling rules stay under this package's control.

Header layout reference (348 bytes):
    +--------------+-----------+-------------+---------------+--------------------+-------------+
    | sizeof_hdr   | dim[8]    | datatype    | pixdim[8]     | vox_offset / scl_* | magic       |
    | offset 0     | offset 40 | offset 70   | offset 76     | offsets 108-116    | offset 344  |
    +--------------+-----------+-------------+---------------+--------------------+-------------+
"""
import gzip
import logging
import struct
import zlib
from pathlib import Path

import nibabel as nib
import numpy as np

from epvs_fusion.common.data_types.exceptions import (
    DomainException,
    NiftiFormatException,
    TruncationException,
    UnsupportedDtypeException,
    VolumeIOException,
)
from epvs_fusion.common.data_types.volume import LabelVolume, Volume
from epvs_fusion.common.decoders.decoder import Decoder

LOGGER = logging.getLogger("nifti")

HEADER_SIZE = 348
MAGIC_OFFSET = 344
SINGLE_FILE_MAGIC = b"n+1\x00"
PAIR_MAGIC = b"ni1\x00"
GZIP_MAGIC = b"\x1f\x8b"

# NIfTI-1 datatype code to storage dtype
DATATYPE_CODES = {2: "uint8", 4: "int16", 16: "float32", 64: "float64"}


def _gunzip(data):
    try:
        return gzip.decompress(data)
    except (EOFError, zlib.error) as exc:
        raise TruncationException(f"gzip stream ended early ({exc})") from exc


def _detect_endianness(header_bytes):
    """Decides byte order with the dim[0] sanity check"""
    for endianness in ("<", ">"):
        if 1 <= struct.unpack(f"{endianness}h", header_bytes[40:42])[0] <= 7:
            return endianness
    raise NiftiFormatException("dim[0] is not in 1..7 in either byte order")


class NiftiDecoder(Decoder):
    """
    Decodes NIfTI-1 bytes into a Volume.
    """

    def decode_api(self, data, payload=None):
        """
        Decodes the NIfTI-1 stream.

        :param data: header bytes, followed by the image for single-file streams
        :param payload: image bytes of a header/image pair, None for single-file streams
        :return: decoded Volume
        """
        if data[:2] == GZIP_MAGIC:
            data = _gunzip(data)
        if payload is not None and payload[:2] == GZIP_MAGIC:
            payload = _gunzip(payload)
        if len(data) < HEADER_SIZE:
            raise TruncationException(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
        magic = bytes(data[MAGIC_OFFSET : MAGIC_OFFSET + 4])
        if magic not in (SINGLE_FILE_MAGIC, PAIR_MAGIC):
            raise NiftiFormatException(f"bad magic {magic!r}")
        endianness = _detect_endianness(data)
        header = nib.Nifti1Header(binaryblock=bytes(data[:HEADER_SIZE]), endianness=endianness, check=False)

        code = int(header["datatype"])
        if code not in DATATYPE_CODES:
            raise UnsupportedDtypeException(code)
        dtype = DATATYPE_CODES[code]
        dims, spacing = self._geometry(header)
        affine = self._affine(header, spacing)

        if magic == PAIR_MAGIC:
            if payload is None:
                raise NiftiFormatException("header/image pair requires the image file")
            buffer, offset = payload, int(header["vox_offset"])
        else:
            buffer, offset = data, max(int(header["vox_offset"]), HEADER_SIZE + 4)
        count = int(np.prod(dims))
        storage = np.dtype(dtype).newbyteorder(endianness)
        if len(buffer) < offset + count * storage.itemsize:
            raise TruncationException(
                f"payload needs {count * storage.itemsize} bytes at offset {offset}, stream has {len(buffer)}"
            )
        values = np.frombuffer(buffer, dtype=storage, count=count, offset=offset).astype(np.float64)

        slope, inter = float(header["scl_slope"]), float(header["scl_inter"])
        inter = inter if np.isfinite(inter) else 0.0
        if np.isfinite(slope) and slope != 0 and (slope != 1.0 or inter != 0.0):
            values = values * slope + inter
            dtype = "float64"
        return Volume(dims, spacing, affine, dtype, values)

    @staticmethod
    def _geometry(header):
        dim = [int(value) for value in header["dim"]]
        ndim = dim[0]
        extra = [extent for extent in dim[4 : ndim + 1] if extent > 1]
        if extra:
            raise NiftiFormatException(f"only 3D volumes are supported, got dim {dim[: ndim + 1]}")
        dims = tuple(dim[axis] if axis <= ndim else 1 for axis in (1, 2, 3))
        if any(extent < 1 for extent in dims):
            raise NiftiFormatException(f"non-positive dimension in {dims}")
        pixdim = [float(value) for value in header["pixdim"]]
        spacing = []
        for axis in (1, 2, 3):
            space = abs(pixdim[axis]) if axis <= ndim else 1.0
            if space == 0.0 or not np.isfinite(space):
                LOGGER.warning("pixdim[%d] is %s, using 1.0", axis, pixdim[axis])
                space = 1.0
            spacing.append(space)
        return dims, tuple(spacing)

    @staticmethod
    def _affine(header, spacing):
        """sform when coded, else qform, else spacing-scaled identity"""
        sform, sform_code = header.get_sform(coded=True)
        if sform_code > 0:
            return np.asarray(sform, dtype=np.float64)
        qform, qform_code = header.get_qform(coded=True)
        if qform_code > 0:
            return np.asarray(qform, dtype=np.float64)
        LOGGER.warning("Neither sform nor qform is set, using spacing-scaled identity affine")
        return np.diag([*spacing, 1.0])


def _companion_image(path: Path):
    name = path.name
    for header_suffix in (".hdr.gz", ".hdr"):
        if name.endswith(header_suffix):
            stem = name[: -len(header_suffix)]
            for image_suffix in (".img", ".img.gz"):
                candidate = path.with_name(stem + image_suffix)
                if candidate.exists():
                    return candidate
    raise VolumeIOException(f"no image file next to header {path}")


def _read_bytes(path: Path):
    try:
        return path.read_bytes()
    except OSError as exc:
        raise VolumeIOException(f"cannot read {path}: {exc}") from exc


def read_nifti(path) -> Volume:
    """
    Reads a NIfTI-1 file (.nii, .nii.gz, or a .hdr/.img pair) into a Volume.

    :param path: file path
    :return: Volume with float64 data
    """
    path = Path(path)
    data = _read_bytes(path)
    decoder = NiftiDecoder()
    header = _gunzip(data) if data[:2] == GZIP_MAGIC else data
    if header[MAGIC_OFFSET : MAGIC_OFFSET + 4] == PAIR_MAGIC:
        return decoder.decode(header, _read_bytes(_companion_image(path)))
    return decoder.decode(header)


def read_label_volume(path, label_names=None) -> LabelVolume:
    """
    Reads an integer label map. Values must be non-negative integers.

    :param path: file path
    :param label_names: map of label id to region name
    :return: LabelVolume
    """
    volume = read_nifti(path)
    if np.any(volume.data < 0) or not np.array_equal(volume.data, np.round(volume.data)):
        raise DomainException(f"{path} does not hold non-negative integer labels")
    dtype = volume.dtype if volume.dtype in ("uint8", "int16") else "int16"
    return LabelVolume(volume.dims, volume.spacing, volume.affine, dtype, volume.data, label_names or {})
