"""
@brief NIfTI-1 encoder

Serializes a Volume into a little-endian single-file NIfTI-1 stream: the 348 byte header, 4 zero extension bytes, then
the voxel payload in x-fastest order starting at byte 352. No extensions are written.
"""
import gzip
import io
import logging
from pathlib import Path

import nibabel as nib
import numpy as np
from nibabel.spatialimages import HeaderDataError

from epvs_fusion.common.data_types.exceptions import DomainException, VolumeIOException
from epvs_fusion.common.data_types.volume import Volume
from epvs_fusion.common.encoders.encoder import Encoder

LOGGER = logging.getLogger("nifti")

VOX_OFFSET = 352


def _check_representable(volume: Volume):
    """Integer storage types need integral values inside the type range"""
    if volume.dtype in ("uint8", "int16"):
        info = np.iinfo(volume.dtype)
        data = volume.data
        if not np.array_equal(data, np.round(data)):
            raise DomainException(f"{volume.dtype} volume holds non-integer values")
        if data.size and (data.min() < info.min or data.max() > info.max):
            raise DomainException(f"values outside the {volume.dtype} range [{info.min}, {info.max}]")
    elif not np.all(np.isfinite(volume.data)):
        raise DomainException("volume holds non-finite values")


class NiftiEncoder(Encoder):
    """
    Encodes a Volume into uncompressed NIfTI-1 bytes.
    """

    def encode_api(self, data: Volume):
        if not isinstance(data, Volume):
            raise DomainException(f"cannot encode object of type {type(data).__name__}")
        _check_representable(data)
        header = nib.Nifti1Header(endianness="<")
        header.set_data_shape(data.dims)
        header.set_data_dtype(np.dtype(data.dtype))
        header.set_sform(data.affine, code=1)
        try:
            header.set_qform(data.affine, code=1)
        except (HeaderDataError, np.linalg.LinAlgError, ValueError):
            LOGGER.warning("Affine has no quaternion form, writing sform only")
            header.set_qform(None, code=0)
        header.set_zooms(data.spacing)
        header.set_xyzt_units("mm")
        header["vox_offset"] = VOX_OFFSET
        payload = data.flat_data().astype(np.dtype(data.dtype).newbyteorder("<")).tobytes()
        return header.binaryblock + b"\x00" * (VOX_OFFSET - len(header.binaryblock)) + payload


def write_nifti(volume: Volume, path):
    """
    Writes a volume to path, gzip-compressed when the name ends in ".gz". Compressed output carries mtime 0 so equal
    volumes give equal bytes.

    :param volume: volume to write
    :param path: destination .nii or .nii.gz path
    """
    path = Path(path)
    encoded = NiftiEncoder().encode_api(volume)
    if path.name.endswith(".gz"):
        stream = io.BytesIO()
        with gzip.GzipFile(fileobj=stream, mode="wb", mtime=0) as compressor:
            compressor.write(encoded)
        encoded = stream.getvalue()
    try:
        path.write_bytes(encoded)
    except OSError as exc:
        raise VolumeIOException(f"cannot write {path}: {exc}") from exc
    LOGGER.debug("Wrote %s (%d bytes)", path, len(encoded))
