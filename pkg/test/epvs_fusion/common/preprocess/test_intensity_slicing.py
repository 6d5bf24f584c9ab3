"""
Tests intensity normalization, axial slicing and slice selection
"""
import unittest

import numpy as np
import pytest

from epvs_fusion.common.data_types.exceptions import DegenerateInputException, DomainException, ShapeException
from epvs_fusion.common.data_types.slice_sample import SliceSample
from epvs_fusion.common.data_types.volume import Volume
from epvs_fusion.common.preprocess.intensity import normalize_intensity
from epvs_fusion.common.preprocess.slicing import (
    crop_pads,
    extract_axial_slices,
    pad_to_multiple,
    select_training_slices,
    stack_axial_slices,
)


def test_normalize_hand_values():
    volume = Volume.from_array(np.array([1.0, 2.0, 3.0, 100.0]).reshape((4, 1, 1)))
    mask = Volume.from_array(np.array([1.0, 1.0, 1.0, 0.0]).reshape((4, 1, 1)))
    normalized = normalize_intensity(volume, mask)
    assert np.allclose(normalized.data.ravel(), [-1.2247, 0.0, 1.2247, 0.0], atol=1e-4)


def test_normalize_statistics_and_idempotence():
    volume = Volume.from_array(np.random.default_rng(0).gamma(2.0, size=(6, 5, 4)), dtype="float32")
    normalized = normalize_intensity(volume)
    assert abs(normalized.data.mean()) < 1e-9 and abs(normalized.data.std() - 1.0) < 1e-9
    assert normalized.dtype == "float64"
    again = normalize_intensity(normalized)
    assert np.allclose(again.data, normalized.data, atol=1e-9), "FAIL: normalization is not idempotent"


def test_normalize_degenerate():
    with pytest.raises(DegenerateInputException):
        normalize_intensity(Volume.from_array(np.full((3, 3, 3), 5.0)))
    volume = Volume.from_array(np.arange(8.0).reshape((2, 2, 2)))
    single = np.zeros((2, 2, 2))
    single[0, 0, 0] = 1.0
    with pytest.raises(DegenerateInputException):
        normalize_intensity(volume, Volume.from_array(single))
    with pytest.raises(DomainException):
        normalize_intensity(volume, Volume.from_array(np.full((2, 2, 2), 0.5)))


class AxialSlicingTestCases(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(3)
        self.volumes = [Volume.from_array(rng.normal(size=(8, 8, 5))) for _ in range(2)]
        labels = (rng.random((8, 8, 5)) > 0.9).astype(float)
        labels[:, :, 2] = 0.0
        self.labels = Volume.from_array(labels, dtype="uint8")

    def test_count_and_shapes(self):
        samples = extract_axial_slices(self.volumes, self.labels, "sub-01")
        self.assertEqual(len(samples), 5)
        for index, sample in enumerate(samples):
            self.assertEqual(sample.channels.shape, (2, 8, 8))
            self.assertEqual(sample.slice_index, index)
            self.assertEqual(sample.subject_id, "sub-01")

    def test_reassembly_is_exact(self):
        samples = extract_axial_slices(self.volumes, self.labels)
        for channel, volume in enumerate(self.volumes):
            rebuilt = stack_axial_slices([sample.channels[channel] for sample in samples], volume)
            self.assertTrue(rebuilt.equals(volume), f"FAIL: channel {channel} not reconstructed")
        rebuilt_labels = stack_axial_slices([sample.label for sample in samples], self.labels)
        self.assertTrue(rebuilt_labels.equals(self.labels))

    def test_single_channel(self):
        samples = extract_axial_slices(self.volumes[:1], self.labels)
        self.assertEqual(samples[0].n_channels, 1)

    def test_geometry_mismatch(self):
        other = Volume.from_array(np.zeros((8, 8, 4)))
        with self.assertRaises(ShapeException):
            extract_axial_slices([self.volumes[0], other], self.labels)
        with self.assertRaises(ShapeException):
            stack_axial_slices([np.zeros((8, 8))] * 4, self.labels)

    def test_non_binary_labels(self):
        with self.assertRaises(DomainException):
            extract_axial_slices(self.volumes, Volume.from_array(np.full((8, 8, 5), 2.0)))


def test_pad_and_crop_are_inverse():
    array = np.random.default_rng(4).normal(size=(3, 2, 13, 10))
    padded, pads = pad_to_multiple(array, 8)
    assert padded.shape[-2:] == (16, 16)
    assert pads == ((1, 2), (3, 3)), f"FAIL: unexpected symmetric pads {pads}"
    assert np.array_equal(crop_pads(padded, pads), array)
    same, no_pads = pad_to_multiple(array[..., :8, :8], 8)
    assert no_pads == ((0, 0), (0, 0)) and same.shape == (3, 2, 8, 8)


def test_select_training_slices():
    samples = []
    for index in range(20):
        label = np.zeros((4, 4))
        if index % 4 == 0:
            label[1, 1] = 1
        samples.append(SliceSample(np.zeros((1, 4, 4)), label, "sub-01", index))
    selected = select_training_slices(samples, 0.25, seed=9)
    indices = [sample.slice_index for sample in selected]
    assert {0, 4, 8, 12, 16} <= set(indices), "FAIL: a foreground slice was dropped"
    assert len(indices) == 5 + 4, f"FAIL: expected 4 of 15 empty slices kept, got {indices}"
    assert indices == sorted(indices), "FAIL: slice order not preserved"
    assert [sample.slice_index for sample in select_training_slices(samples, 0.25, seed=9)] == indices
    assert len(select_training_slices(samples, 0.0, seed=1)) == 5
    assert len(select_training_slices(samples, 1.0, seed=1)) == 20
    with pytest.raises(DomainException):
        select_training_slices(samples, 1.5, seed=1)
