"""
swi.py:

Susceptibility-weighted image construction from magnitude and phase volumes. Each axial slice is homodyne filtered:
the complex image is divided (through its conjugate) by a low-pass copy taken from the centered k-space window, the
remaining phase is turned into a negative-phase mask, and the magnitude is multiplied by the mask mask_power times.
"""
import logging

import numpy as np

from epvs_fusion.common.data_types.exceptions import ConfigException, DomainException
from epvs_fusion.common.data_types.volume import Volume, require_same_geometry

LOGGER = logging.getLogger("swi")

PHASE_TOLERANCE = 1e-9


def centered_window(shape, filter_size):
    """
    Boolean mask selecting the centered kx x ky window of an fftshift-ed 2D spectrum. Window sizes larger than the
    slice are clipped to the slice.
    """
    window = np.zeros(shape, dtype=bool)
    slices = []
    for extent, size in zip(shape, filter_size):
        size = min(int(size), extent)
        start = extent // 2 - size // 2
        slices.append(slice(start, start + size))
    window[tuple(slices)] = True
    return window


def low_pass(planes, filter_size):
    """
    Low-pass filters complex planes (..., H, W) by keeping the centered k-space window.
    """
    spectrum = np.fft.fftshift(np.fft.fft2(planes, axes=(-2, -1)), axes=(-2, -1))
    spectrum = spectrum * centered_window(planes.shape[-2:], filter_size)
    return np.fft.ifft2(np.fft.ifftshift(spectrum, axes=(-2, -1)), axes=(-2, -1))


def phase_mask(high_pass_phase):
    """Negative phase mask: (pi + phase) / pi for negative phase, 1 elsewhere, clipped to [0, 1]"""
    mask = np.where(high_pass_phase < 0, (np.pi + high_pass_phase) / np.pi, 1.0)
    return np.clip(mask, 0.0, 1.0)


def build_swi(magnitude: Volume, phase: Volume, filter_size=(64, 64), mask_power=4) -> Volume:
    """
    Builds the susceptibility-weighted volume.

    :param magnitude: non-negative magnitude volume
    :param phase: phase volume in radians, values in [-pi, pi]
    :param filter_size: (kx, ky) size of the k-space low-pass window
    :param mask_power: number of mask multiplications
    :return: SWI volume with the magnitude's geometry
    """
    require_same_geometry(magnitude, phase, what="magnitude and phase")
    if len(filter_size) != 2 or min(filter_size) < 1:
        raise ConfigException(f"filter size must be two positive integers, got {filter_size}")
    if mask_power < 0:
        raise ConfigException(f"mask power must be non-negative, got {mask_power}")
    if np.any(np.abs(phase.data) > np.pi + PHASE_TOLERANCE):
        raise DomainException("phase values must lie in [-pi, pi]")
    if np.any(magnitude.data < 0):
        raise DomainException("magnitude values must be non-negative")

    # Axial planes first: (nz, nx, ny)
    magnitudes = np.moveaxis(magnitude.data, 2, 0)
    complex_planes = magnitudes * np.exp(1j * np.moveaxis(phase.data, 2, 0))
    filtered = low_pass(complex_planes, filter_size)
    high_pass_phase = np.angle(complex_planes * np.conj(filtered))
    weighted = magnitudes * phase_mask(high_pass_phase) ** mask_power
    LOGGER.debug("Built SWI for %d slices with window %s", magnitudes.shape[0], tuple(filter_size))
    return magnitude.with_data(np.moveaxis(weighted, 0, 2), dtype="float64")
