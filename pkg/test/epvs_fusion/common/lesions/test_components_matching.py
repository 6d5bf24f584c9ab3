"""
Tests lesion extraction, matching and lesion tables
"""
import csv
import itertools
import logging
from collections import deque

import numpy as np
import pytest

from epvs_fusion.common.data_types.exceptions import DomainException, ShapeException
from epvs_fusion.common.data_types.lesion_data import Lesion, LesionSet
from epvs_fusion.common.data_types.volume import Volume
from epvs_fusion.common.lesions.components import (
    LESION_TABLE_COLUMNS,
    center_of_mass,
    connected_components,
    lesion_burden_rows,
    write_lesion_burden,
    write_lesion_table,
)
from epvs_fusion.common.lesions.matching import match_lesions

LOGGER = logging.getLogger("test_matching")

OFFSETS = {
    connectivity: [
        offset
        for offset in itertools.product((-1, 0, 1), repeat=3)
        if 0 < sum(map(abs, offset)) <= {6: 1, 18: 2, 26: 3}[connectivity]
    ]
    for connectivity in (6, 18, 26)
}


def flood_fill_components(mask, connectivity):
    """Components as voxel lists, numbered in x-fastest scan order of their first voxel"""
    seen = np.zeros(mask.shape, dtype=bool)
    components = []
    nx, ny, nz = mask.shape
    for z, y, x in itertools.product(range(nz), range(ny), range(nx)):
        if not mask[x, y, z] or seen[x, y, z]:
            continue
        seen[x, y, z] = True
        queue, voxels = deque([(x, y, z)]), []
        while queue:
            voxel = queue.popleft()
            voxels.append(voxel)
            for dx, dy, dz in OFFSETS[connectivity]:
                neighbour = (voxel[0] + dx, voxel[1] + dy, voxel[2] + dz)
                if all(0 <= index < extent for index, extent in zip(neighbour, mask.shape)):
                    if mask[neighbour] and not seen[neighbour]:
                        seen[neighbour] = True
                        queue.append(neighbour)
        components.append(set(voxels))
    return components


def mask_volume(mask, spacing=(1.0, 1.0, 1.0)):
    return Volume.from_array(np.asarray(mask, dtype=float), spacing, dtype="uint8")


def point_lesion(lesion_id, com):
    com = np.asarray(com, dtype=float)
    return Lesion(lesion_id, np.zeros((1, 3), dtype=np.int64), 1, 1.0, com, com)


def point_set(coms):
    lesions = tuple(point_lesion(index + 1, com) for index, com in enumerate(coms))
    return LesionSet(lesions, (32, 32, 32), (1.0, 1.0, 1.0), np.eye(4))


def maximum_matching_size(pred, gt, gate):
    """Largest one-to-one matching by exhaustive assignment"""
    allowed = [[np.linalg.norm(np.subtract(p, g)) <= gate for g in gt] for p in pred]
    for size in range(min(len(pred), len(gt)), 0, -1):
        for chosen in itertools.combinations(range(len(pred)), size):
            for targets in itertools.permutations(range(len(gt)), size):
                if all(allowed[p][g] for p, g in zip(chosen, targets)):
                    return size
    return 0


@pytest.mark.parametrize("connectivity", [6, 18, 26])
def test_components_match_flood_fill(connectivity):
    rng = np.random.default_rng(connectivity)
    for _ in range(100):
        mask = rng.random(size=(16, 16, 16)) < rng.uniform(0.02, 0.2)
        lesion_set = connected_components(mask_volume(mask), connectivity)
        expected = flood_fill_components(mask, connectivity)
        found = [set(map(tuple, lesion.voxels.tolist())) for lesion in lesion_set]
        assert found == expected, f"FAIL: components differ from flood fill at connectivity {connectivity}"
        assert lesion_set.ids() == list(range(1, len(expected) + 1))
        assert lesion_set.total_voxels == int(mask.sum()), "FAIL: lesions do not partition the foreground"


def test_component_edge_cases():
    empty = connected_components(mask_volume(np.zeros((4, 4, 4))))
    assert empty.count == 0 and empty.total_voxels == 0

    single = np.zeros((4, 4, 4))
    single[1, 2, 3] = 1
    lesion = connected_components(mask_volume(single)).lesions[0]
    assert lesion.volume_vox == 1 and lesion.com_vox.tolist() == [1.0, 2.0, 3.0]

    diagonal = np.zeros((4, 4, 4))
    diagonal[1, 1, 1] = diagonal[2, 2, 2] = 1
    assert connected_components(mask_volume(diagonal), 26).count == 1
    assert connected_components(mask_volume(diagonal), 18).count == 2
    assert connected_components(mask_volume(diagonal), 6).count == 2

    with pytest.raises(DomainException):
        connected_components(mask_volume(diagonal), 8)
    with pytest.raises(DomainException):
        connected_components(Volume.from_array(np.full((2, 2, 2), 0.5)))


def test_center_of_mass_and_volume():
    mask = np.zeros((6, 6, 6))
    mask[2:4, 1, 4] = 1
    affine = np.diag([0.5, 0.5, 2.0, 1.0])
    affine[:3, 3] = [10.0, 20.0, -30.0]
    volume = Volume.from_array(mask, (0.5, 0.5, 2.0), affine, "uint8")
    lesion = connected_components(volume).lesions[0]
    assert lesion.volume_mm3 == pytest.approx(2 * 0.5 * 0.5 * 2.0)
    assert np.allclose(lesion.com_vox, [2.5, 1.0, 4.0])
    assert np.allclose(lesion.com_mm, [11.25, 20.5, -22.0])
    with pytest.raises(DomainException):
        center_of_mass(np.empty((0, 3)), affine)


def test_matching_trivial_cases():
    coms = [(2.0, 2.0, 2.0), (10.0, 4.0, 8.0), (20.0, 20.0, 1.0)]
    same = match_lesions(point_set(coms), point_set(coms))
    assert same.counts.tp == 3 and same.counts.fp == 0 and same.counts.fn == 0
    assert all(distance == 0.0 for _, _, distance in same.pairs)

    missing = match_lesions(point_set([]), point_set(coms))
    assert missing.counts.tp == 0 and missing.unmatched_gt == (1, 2, 3)


def test_equidistant_prediction_matches_once():
    result = match_lesions(point_set([(10.0, 10.0, 10.0)]), point_set([(8.0, 10.0, 10.0), (12.0, 10.0, 10.0)]))
    assert result.pairs == ((1, 1, 2.0),), "FAIL: ties go to the lower ground-truth id"
    assert result.unmatched_gt == (2,)


def test_matching_gate_and_geometry():
    result = match_lesions(point_set([(0.0, 0.0, 0.0)]), point_set([(3.5, 0.0, 0.0)]))
    assert result.counts.tp == 0 and result.counts.fp == 1 and result.counts.fn == 1
    assert match_lesions(point_set([(0.0, 0.0, 0.0)]), point_set([(3.5, 0.0, 0.0)]), 4.0).counts.tp == 1
    other = LesionSet((), (16, 16, 16), (1.0, 1.0, 1.0), np.eye(4))
    with pytest.raises(ShapeException):
        match_lesions(point_set([]), other)
    with pytest.raises(DomainException):
        match_lesions(point_set([]), point_set([]), -1.0)


def test_greedy_matching_near_optimal():
    rng = np.random.default_rng(17)
    optimal = 0
    for instance in range(200):
        gt = rng.uniform(0.0, 20.0, size=(rng.integers(0, 7), 3))
        found = gt[: rng.integers(0, len(gt) + 1)]
        found = found + rng.normal(scale=1.0, size=found.shape)
        extras = rng.uniform(0.0, 20.0, size=(rng.integers(0, 7 - len(found)), 3))
        pred = np.concatenate([found, extras])
        rng.shuffle(pred)
        result = match_lesions(point_set(pred), point_set(gt))
        best = maximum_matching_size(pred, gt, 3.0)
        assert result.counts.tp <= best
        if result.counts.tp == best:
            optimal += 1
        else:
            LOGGER.info("Instance %d: greedy matched %d, optimum %d", instance, result.counts.tp, best)
        swapped = match_lesions(point_set(gt), point_set(pred))
        assert (swapped.counts.tp, swapped.counts.fp, swapped.counts.fn) == (
            result.counts.tp,
            result.counts.fn,
            result.counts.fp,
        ), "FAIL: swapping sides must swap FP and FN"
    assert optimal >= 190, f"FAIL: greedy optimal on only {optimal} of 200 instances"


def test_lesion_tables(tmp_path):
    mask = np.zeros((8, 8, 8))
    mask[1:3, 1, 1] = 1
    mask[6, 6, 6] = 1
    lesion_set = connected_components(mask_volume(mask, (1.0, 1.0, 2.0)))
    write_lesion_table(lesion_set, tmp_path / "lesions.csv")
    with open(tmp_path / "lesions.csv", newline="") as file_handle:
        rows = list(csv.reader(file_handle))
    assert tuple(rows[0]) == LESION_TABLE_COLUMNS
    assert rows[1][:3] == ["1", "2", "4.0"] and rows[2][:3] == ["2", "1", "2.0"]

    empty = connected_components(mask_volume(np.zeros((8, 8, 8))))
    burden = lesion_burden_rows({"sub-01": lesion_set, "sub-02": empty})
    assert burden == [("sub-01", 2, 3, 1.5), ("sub-02", 0, 0, None)]
    write_lesion_burden({"sub-01": lesion_set}, tmp_path / "burden.csv")
    assert (tmp_path / "burden.csv").read_text().splitlines()[1] == "sub-01,2,3,1.5"
