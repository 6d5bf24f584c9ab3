"""
experiment.py:

Data types of the cross-validation experiments: the per-subject inputs, the experiment configuration and the result
of one fold. Subjects are read from a cohort directory laid out like the phantom cohorts.
"""
import dataclasses
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from epvs_fusion.common.data_types.exceptions import ConfigException, VolumeIOException
from epvs_fusion.common.data_types.report_data import MetricsReport
from epvs_fusion.common.data_types.slice_sample import AugmentationSpec
from epvs_fusion.common.data_types.volume import LabelVolume, Volume
from epvs_fusion.common.decoders.nifti_decoder import read_label_volume, read_nifti
from epvs_fusion.common.geometry.orientation import reorient_to_canonical
from epvs_fusion.common.metrics.evaluation import EvaluationConfig
from epvs_fusion.common.phantom.cohort import GT_FILE, PROVENANCE_FILE, REGIONS_FILE, read_provenance
from epvs_fusion.common.phantom.generator import REGION_NAMES, PhantomCase
from epvs_fusion.common.unet.network import UNetConfig
from epvs_fusion.common.unet.training import TrainConfig
from epvs_fusion.common.utils.sequence_type import DEFAULT_COMBOS, SEQUENCE_NAMES, combo_name, parse_combo

LOGGER = logging.getLogger("harness")


@dataclasses.dataclass(frozen=True, eq=False)
class SubjectData:
    """Co-registered sequences of one subject with its ground truth and optional region labels"""

    subject_id: str
    volumes: Dict[str, Volume]
    gt_epvs: Volume
    regions: Optional[LabelVolume] = None

    @classmethod
    def from_phantom(cls, case: PhantomCase):
        return cls(case.subject_id, dict(case.volumes), case.gt_epvs, case.regions)

    def channels(self, combo):
        """Volumes of a combination in channel order"""
        missing = [name for name in combo if name not in self.volumes]
        if missing:
            raise ConfigException(
                f"subject {self.subject_id} lacks sequence(s) {missing} needed by {combo_name(combo)}"
            )
        return [self.volumes[name] for name in combo]


def load_subjects(directory) -> List[SubjectData]:
    """
    Reads every subject directory holding a ground-truth mask. Sequences are whichever of T1w, T2w, FLAIR and SWI are
    present; region names come from the provenance sidecar when there is one. Every volume is reoriented to canonical
    RAS.

    :param directory: cohort root
    :return: subjects in directory name order
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise VolumeIOException(f"data directory {directory} does not exist")
    subjects = []
    for subject_dir in sorted(path for path in directory.iterdir() if (path / GT_FILE).exists()):
        volumes = {
            name: reorient_to_canonical(read_nifti(subject_dir / f"{name}.nii.gz"))
            for name in SEQUENCE_NAMES
            if (subject_dir / f"{name}.nii.gz").exists()
        }
        names = dict(enumerate(REGION_NAMES, start=1))
        subject_id = subject_dir.name
        if (subject_dir / PROVENANCE_FILE).exists():
            provenance = read_provenance(subject_dir)
            names = {int(label): name for label, name in provenance.get("region_names", {}).items()} or names
            subject_id = provenance.get("subject_id", subject_id)
        regions = None
        if (subject_dir / REGIONS_FILE).exists():
            regions = reorient_to_canonical(read_label_volume(subject_dir / REGIONS_FILE, names))
        gt_epvs = reorient_to_canonical(read_nifti(subject_dir / GT_FILE))
        subjects.append(SubjectData(subject_id, volumes, gt_epvs, regions))
    if not subjects:
        raise VolumeIOException(f"no subjects with {GT_FILE} found in {directory}")
    LOGGER.info("Loaded %d subjects from %s", len(subjects), directory)
    return subjects


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """
    Cross-validation settings. n_folds None means leave-one-out; otherwise subjects are dealt into n_folds held-out
    groups. unet.in_channels is replaced by the size of each combination.
    """

    combos: Tuple[Tuple[str, ...], ...] = DEFAULT_COMBOS
    n_val_subjects: int = 4
    n_folds: Optional[int] = None
    unet: UNetConfig = UNetConfig()
    train: TrainConfig = TrainConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    augmentation: AugmentationSpec = AugmentationSpec()
    empty_slice_fraction: float = 0.1
    predict_batch_size: int = 8
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        combos = tuple(parse_combo(combo) for combo in self.combos)
        if not combos:
            raise ConfigException("experiment needs at least one sequence combination")
        object.__setattr__(self, "combos", combos)
        if self.n_val_subjects < 0:
            raise ConfigException(f"n_val_subjects must be non-negative, got {self.n_val_subjects}")
        if self.n_folds is not None and self.n_folds < 2:
            raise ConfigException(f"n_folds must be at least 2, got {self.n_folds}")
        if not 0.0 <= self.empty_slice_fraction <= 1.0:
            raise ConfigException(f"empty_slice_fraction must be in [0, 1], got {self.empty_slice_fraction}")
        if self.workers < 1 or self.predict_batch_size < 1:
            raise ConfigException("workers and predict_batch_size must be positive")

    def validate_cohort(self, n_subjects):
        """
        Checks the fold layout against a cohort size: at least one training subject must remain in every fold.
        """
        n_folds = n_subjects if self.n_folds is None else self.n_folds
        if n_folds > n_subjects:
            raise ConfigException(f"{n_folds} folds need at least {n_folds} subjects, got {n_subjects}")
        largest_test = -(-n_subjects // n_folds)
        if self.n_val_subjects >= n_subjects - largest_test:
            raise ConfigException(
                f"n_val_subjects ({self.n_val_subjects}) leaves no training subject in a cohort of {n_subjects}"
            )

    def network_for(self, combo):
        return dataclasses.replace(self.unet, in_channels=len(combo))

    def to_dict(self):
        return {
            "combos": [list(combo) for combo in self.combos],
            "n_val_subjects": self.n_val_subjects,
            "n_folds": self.n_folds,
            "unet": self.unet.to_dict(),
            "train": self.train.to_dict(),
            "evaluation": self.evaluation.to_dict(),
            "augmentation": self.augmentation.to_dict(),
            "empty_slice_fraction": self.empty_slice_fraction,
            "predict_batch_size": self.predict_batch_size,
            "workers": self.workers,
            "seed": self.seed,
        }


@dataclasses.dataclass
class FoldResult:
    """Outcome of one held-out subject. Subjects held out together share a fold index."""

    fold_index: int
    test_subject: str
    train_subjects: Tuple[str, ...]
    val_subjects: Tuple[str, ...]
    checkpoint_path: Optional[str]
    report: MetricsReport

    def to_dict(self):
        return {
            "fold_index": self.fold_index,
            "test_subject": self.test_subject,
            "train_subjects": list(self.train_subjects),
            "val_subjects": list(self.val_subjects),
            "checkpoint_path": self.checkpoint_path,
            "report": self.report.to_dict(),
        }
