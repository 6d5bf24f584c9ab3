"""
generator.py:

Synthetic multi-sequence phantoms with known ePVS ground truth. A phantom is a block of uniform tissue holding three
kinds of lesions: thin tubules (ePVS), ellipsoidal white matter hyperintensities and ovoid lacunes. Every
sequence paints each tissue class with the mean intensity from the contrast table and adds Gaussian noise. The SWI
volume goes through the regular SWI construction from a magnitude image and a smooth background phase.

Lesions are placed one at a time with rejection sampling. Each placed lesion reserves its one voxel dilation so that no
two lesions touch, even diagonally, and the lesion count is recovered exactly by a 26-connected labelling.
"""
import dataclasses
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from epvs_fusion.common.data_types.exceptions import ConfigException, PlacementException
from epvs_fusion.common.data_types.volume import LabelVolume, Volume
from epvs_fusion.common.preprocess.swi import build_swi
from epvs_fusion.common.utils.sequence_type import SEQUENCE_NAMES

LOGGER = logging.getLogger("phantom")

MAX_PLACEMENT_ATTEMPTS = 1000
BORDER_MARGIN = 2
MAX_EPVS_DIAMETER = 3.0
LACUNE_DIAMETER_BOUNDS = (3.0, 15.0)
AXIS_SAMPLE_STEP = 0.25
TISSUE_CLASSES = ("tissue", "epvs", "wmh", "lacune")

REGION_NAMES = (
    "basal ganglia",
    "frontoparietal",
    "temporal and hippocampal",
    "insula",
    "midbrain",
    "thalamus",
    "occipital",
)

DEFAULT_CONTRAST = {
    "T1w": {"tissue": 0.6, "epvs": 0.2, "wmh": 0.5, "lacune": 0.2},
    "T2w": {"tissue": 0.4, "epvs": 0.9, "wmh": 0.9, "lacune": 0.9},
    "FLAIR": {"tissue": 0.5, "epvs": 0.4, "wmh": 0.9, "lacune": 0.15},
    "SWI": {"tissue": 0.5, "epvs": 0.5, "wmh": 0.5, "lacune": 0.5},
}


def region_slug(name):
    """File system name of a region, e.g. "basal_ganglia" """
    return "_".join(name.lower().split())


def _range(value, name):
    if np.isscalar(value):
        value = (value, value)
    low, high = (float(bound) for bound in value)
    if low > high:
        raise ConfigException(f"phantom.{name} range is inverted: {value}")
    return low, high


@dataclasses.dataclass(frozen=True)
class PhantomSpec:
    """
    Phantom parameters. Ranges are (low, high) pairs, a single number means a fixed value. Lengths are in voxels.
    """

    dims: Tuple[int, int, int] = (64, 64, 64)
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_epvs: Tuple[int, int] = (20, 40)
    epvs_radius: Tuple[float, float] = (0.5, 1.5)
    epvs_length: Tuple[float, float] = (2.0, 10.0)
    n_wmh: int = 3
    wmh_radius: Tuple[float, float] = (2.0, 4.0)
    n_lacunes: int = 2
    lacune_diameter: Tuple[float, float] = (5.0, 9.0)
    noise_sigma: float = 0.05
    contrast_table: Dict[str, Dict[str, float]] = dataclasses.field(default_factory=lambda: dict(DEFAULT_CONTRAST))
    n_regions: int = 7
    swi_filter_size: Tuple[int, int] = (16, 16)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(dim) for dim in self.dims))
        object.__setattr__(self, "spacing", tuple(float(space) for space in self.spacing))
        low, high = _range(self.n_epvs, "n_epvs")
        if low < 0 or low != int(low) or high != int(high):
            raise ConfigException(f"phantom.n_epvs must be non-negative integers, got {self.n_epvs}")
        object.__setattr__(self, "n_epvs", (int(low), int(high)))
        for name in ("epvs_radius", "epvs_length", "wmh_radius", "lacune_diameter"):
            object.__setattr__(self, name, _range(getattr(self, name), name))
        object.__setattr__(self, "swi_filter_size", tuple(int(size) for size in self.swi_filter_size))
        self._validate()

    def _validate(self):
        if len(self.dims) != 3 or min(self.dims) < 2 * BORDER_MARGIN + 1:
            raise ConfigException(f"phantom.dims must be three extents above {2 * BORDER_MARGIN}, got {self.dims}")
        if self.epvs_radius[0] <= 0 or 2 * self.epvs_radius[1] > MAX_EPVS_DIAMETER:
            raise ConfigException(
                f"phantom.epvs_radius must be positive with a diameter of at most {MAX_EPVS_DIAMETER}, "
                f"got {self.epvs_radius}"
            )
        if self.epvs_length[0] < 0:
            raise ConfigException(f"phantom.epvs_length must be non-negative, got {self.epvs_length}")
        if self.lacune_diameter[0] < LACUNE_DIAMETER_BOUNDS[0] or self.lacune_diameter[1] > LACUNE_DIAMETER_BOUNDS[1]:
            raise ConfigException(
                f"phantom.lacune_diameter must lie in {LACUNE_DIAMETER_BOUNDS}, got {self.lacune_diameter}"
            )
        if self.wmh_radius[0] <= 0:
            raise ConfigException(f"phantom.wmh_radius must be positive, got {self.wmh_radius}")
        if self.n_wmh < 0 or self.n_lacunes < 0:
            raise ConfigException("phantom.n_wmh and phantom.n_lacunes must be non-negative")
        if self.noise_sigma < 0:
            raise ConfigException(f"phantom.noise_sigma must be non-negative, got {self.noise_sigma}")
        if not 1 <= self.n_regions <= min(len(REGION_NAMES), self.dims[1]):
            raise ConfigException(f"phantom.n_regions must be in [1, {len(REGION_NAMES)}], got {self.n_regions}")
        missing = [name for name in SEQUENCE_NAMES if name not in self.contrast_table]
        if missing:
            raise ConfigException(f"contrast table lacks sequences {missing}")
        for sequence, row in self.contrast_table.items():
            if set(row) != set(TISSUE_CLASSES):
                raise ConfigException(f"contrast row {sequence} must define exactly {TISSUE_CLASSES}")

    def to_dict(self):
        values = dataclasses.asdict(self)
        for name, value in values.items():
            if isinstance(value, tuple):
                values[name] = list(value)
        return values

    @classmethod
    def from_dict(cls, values):
        fields = {field.name for field in dataclasses.fields(cls)}
        unknown = set(values) - fields
        if unknown:
            raise ConfigException(f"unknown phantom settings {sorted(unknown)}")
        return cls(**values)


@dataclasses.dataclass(frozen=True)
class Tubule:
    """Axis endpoints (voxel coordinates) and radius of one ePVS tubule"""

    start: Tuple[float, float, float]
    end: Tuple[float, float, float]
    radius: float

    def to_dict(self):
        return {"start": list(self.start), "end": list(self.end), "radius": self.radius}

    @classmethod
    def from_dict(cls, values):
        return cls(tuple(values["start"]), tuple(values["end"]), float(values["radius"]))


@dataclasses.dataclass(frozen=True, eq=False)
class PhantomCase:
    subject_id: str
    volumes: Dict[str, Volume]
    gt_epvs: Volume
    mimic_mask: Volume
    regions: LabelVolume
    spec: PhantomSpec
    seed: int
    epvs_tubes: Tuple[Tubule, ...] = ()

    def provenance(self):
        return {
            "subject_id": self.subject_id,
            "seed": self.seed,
            "spec": self.spec.to_dict(),
            "region_names": {str(label): name for label, name in self.regions.label_names.items()},
            "epvs_tubes": [tube.to_dict() for tube in self.epvs_tubes],
        }

    def equals(self, other):
        return (
            self.subject_id == other.subject_id
            and self.seed == other.seed
            and self.volumes.keys() == other.volumes.keys()
            and all(volume.equals(other.volumes[name]) for name, volume in self.volumes.items())
            and self.gt_epvs.equals(other.gt_epvs)
            and self.mimic_mask.equals(other.mimic_mask)
            and self.regions.equals(other.regions)
        )


def segment_distance(points, start, end):
    """Distance of every point (N x 3) to the segment start-end"""
    start, end = np.asarray(start, dtype=np.float64), np.asarray(end, dtype=np.float64)
    axis = end - start
    length_sq = float(axis @ axis)
    if length_sq == 0:
        return np.linalg.norm(points - start, axis=1)
    fraction = np.clip((points - start) @ axis / length_sq, 0.0, 1.0)
    return np.linalg.norm(points - (start + fraction[:, None] * axis), axis=1)


def _grid_points(low, high):
    """Integer voxel coordinates in the inclusive box [low, high]"""
    axes = [np.arange(lo, hi + 1) for lo, hi in zip(low, high)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def tubule_voxels(tube: Tubule):
    """
    Voxels whose centers lie within the radius of the axis segment, plus the rounded axis samples. Only the
    26-connected part touching the axis samples is kept so every tubule is a single lesion.
    """
    start, end = np.asarray(tube.start), np.asarray(tube.end)
    low = np.floor(np.minimum(start, end) - tube.radius).astype(np.int64) - 1
    high = np.ceil(np.maximum(start, end) + tube.radius).astype(np.int64) + 1
    points = _grid_points(low, high)
    steps = max(int(np.ceil(np.linalg.norm(end - start) / AXIS_SAMPLE_STEP)), 1)
    samples = np.rint(start + np.linspace(0.0, 1.0, steps + 1)[:, None] * (end - start)).astype(np.int64)

    box = np.zeros(tuple(high - low + 1), dtype=bool)
    box[tuple((points[segment_distance(points, start, end) <= tube.radius + 1e-9] - low).T)] = True
    box[tuple((samples - low).T)] = True
    labels, _ = ndimage.label(box, structure=np.ones((3, 3, 3), dtype=bool))
    keep = np.isin(labels, np.unique(labels[tuple((samples - low).T)]))
    return np.argwhere(keep) + low


def ellipsoid_voxels(center, radii):
    center, radii = np.asarray(center, dtype=np.float64), np.asarray(radii, dtype=np.float64)
    points = _grid_points(np.floor(center - radii).astype(np.int64), np.ceil(center + radii).astype(np.int64))
    inside = (((points - center) / radii) ** 2).sum(axis=1) <= 1.0
    return points[inside]


class _Placer:
    """
    Rejection sampler over a shared occupancy grid. Lesions keep a border margin and never touch each other.
    """

    def __init__(self, dims, rng):
        self.dims = np.array(dims)
        self.rng = rng
        self.reserved = np.zeros(dims, dtype=bool)

    def _fits(self, voxels):
        if len(voxels) == 0:
            return False
        if voxels.min() < BORDER_MARGIN or np.any(voxels.max(axis=0) > self.dims - 1 - BORDER_MARGIN):
            return False
        return not self.reserved[tuple(voxels.T)].any()

    def _reserve(self, voxels):
        mask = np.zeros(self.dims, dtype=bool)
        mask[tuple(voxels.T)] = True
        self.reserved |= ndimage.binary_dilation(mask, structure=np.ones((3, 3, 3), dtype=bool))

    def random_center(self, extent):
        low = BORDER_MARGIN + extent
        high = self.dims - 1 - BORDER_MARGIN - extent
        return self.rng.uniform(np.minimum(low, high), np.maximum(low, high))

    def place(self, kind, index, propose):
        """
        Draws candidates from propose() until one fits.

        :param propose: callable returning (voxels, provenance)
        :return: (voxels, provenance) of the accepted candidate
        """
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            voxels, provenance = propose()
            if self._fits(voxels):
                self._reserve(voxels)
                return voxels, provenance
        raise PlacementException(f"could not place {kind} {index + 1} after {MAX_PLACEMENT_ATTEMPTS} attempts")


def _random_direction(rng):
    direction = rng.normal(size=3)
    norm = np.linalg.norm(direction)
    return direction / norm if norm > 0 else np.array([0.0, 0.0, 1.0])


def _propose_tubule(spec: PhantomSpec, placer: _Placer):
    rng = placer.rng
    radius = rng.uniform(*spec.epvs_radius)
    length = rng.uniform(*spec.epvs_length)
    half_axis = 0.5 * length * _random_direction(rng)
    center = placer.random_center(np.abs(half_axis) + radius)
    tube = Tubule(tuple((center - half_axis).tolist()), tuple((center + half_axis).tolist()), float(radius))
    return tubule_voxels(tube), tube


def _propose_ellipsoid(radius_range, placer: _Placer, diameters=False):
    radii = placer.rng.uniform(*radius_range, size=3)
    if diameters:
        radii = radii / 2.0
    center = placer.random_center(np.ceil(radii))
    return ellipsoid_voxels(center, radii), None


def region_labels(spec: PhantomSpec) -> LabelVolume:
    """
    Axis aligned slabs along the second axis, labelled 1..n_regions and named after the evaluation regions.
    """
    labels = np.zeros(spec.dims, dtype=np.float64)
    for label, rows in enumerate(np.array_split(np.arange(spec.dims[1]), spec.n_regions), start=1):
        labels[:, rows, :] = label
    names = {label: REGION_NAMES[label - 1] for label in range(1, spec.n_regions + 1)}
    return LabelVolume(spec.dims, spec.spacing, np.diag([*spec.spacing, 1.0]), "uint8", labels, names)


def smooth_phase(dims, rng):
    """Slowly varying background phase in [-pi / 2, pi / 2]"""
    grids = np.meshgrid(*[np.linspace(0.0, 1.0, dim) for dim in dims], indexing="ij")
    offsets = rng.uniform(0.0, 2 * np.pi, size=3)
    field = sum(np.sin(2 * np.pi * grid + offset) for grid, offset in zip(grids, offsets)) / 3.0
    return 0.5 * np.pi * field


def generate_phantom(spec: PhantomSpec, seed: Optional[int] = None, subject_id="phantom") -> PhantomCase:
    """
    Generates one phantom. Identical (spec, seed) pairs give bit-identical phantoms.

    :param spec: phantom parameters
    :param seed: random seed, spec.seed when None
    :param subject_id: id carried by the case
    :return: the phantom case
    """
    seed = spec.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    placer = _Placer(spec.dims, rng)
    classes = np.zeros(spec.dims, dtype=np.int8)

    # Large lesions first, they are the hardest to fit
    for index in range(spec.n_lacunes):
        voxels, _ = placer.place(
            "lacune", index, lambda: _propose_ellipsoid(spec.lacune_diameter, placer, diameters=True)
        )
        classes[tuple(voxels.T)] = TISSUE_CLASSES.index("lacune")
    for index in range(spec.n_wmh):
        voxels, _ = placer.place("WMH", index, lambda: _propose_ellipsoid(spec.wmh_radius, placer))
        classes[tuple(voxels.T)] = TISSUE_CLASSES.index("wmh")
    tubes: List[Tubule] = []
    n_epvs = int(rng.integers(spec.n_epvs[0], spec.n_epvs[1] + 1))
    for index in range(n_epvs):
        voxels, tube = placer.place("ePVS tubule", index, lambda: _propose_tubule(spec, placer))
        classes[tuple(voxels.T)] = TISSUE_CLASSES.index("epvs")
        tubes.append(tube)

    affine = np.diag([*spec.spacing, 1.0])
    volumes = {}
    for sequence in SEQUENCE_NAMES:
        row = spec.contrast_table[sequence]
        means = np.array([row[name] for name in TISSUE_CLASSES])
        image = means[classes] + rng.normal(0.0, spec.noise_sigma, size=spec.dims)
        if sequence == "SWI":
            magnitude = Volume(spec.dims, spec.spacing, affine, "float64", np.maximum(image, 0.0))
            phase = magnitude.with_data(smooth_phase(spec.dims, rng))
            image = build_swi(magnitude, phase, spec.swi_filter_size).data
        volumes[sequence] = Volume(spec.dims, spec.spacing, affine, "float32", image)

    gt_epvs = Volume(spec.dims, spec.spacing, affine, "uint8", classes == TISSUE_CLASSES.index("epvs"))
    mimics = np.isin(classes, [TISSUE_CLASSES.index("wmh"), TISSUE_CLASSES.index("lacune")])
    LOGGER.debug("Phantom %s: %d ePVS, %d WMH, %d lacunes", subject_id, n_epvs, spec.n_wmh, spec.n_lacunes)
    return PhantomCase(
        subject_id=subject_id,
        volumes=volumes,
        gt_epvs=gt_epvs,
        mimic_mask=Volume(spec.dims, spec.spacing, affine, "uint8", mimics),
        regions=region_labels(spec),
        spec=spec,
        seed=seed,
        epvs_tubes=tuple(tubes),
    )
