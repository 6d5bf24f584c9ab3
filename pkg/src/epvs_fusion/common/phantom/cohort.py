"""
cohort.py:

Phantom cohorts and their on-disk layout. A cohort directory holds one subdirectory per subject:

    <directory>/lesion_burden.csv
    <directory>/sub-01/T1w.nii.gz, T2w.nii.gz, FLAIR.nii.gz, SWI.nii.gz
    <directory>/sub-01/gt_epvs.nii.gz, mimics.nii.gz, regions.nii.gz
    <directory>/sub-01/provenance.json
"""
import json
import logging
from pathlib import Path
from typing import List, Sequence

import numpy as np

from epvs_fusion.common.data_types.exceptions import ConfigException, EpvsException, VolumeIOException
from epvs_fusion.common.decoders.nifti_decoder import read_label_volume, read_nifti
from epvs_fusion.common.encoders.nifti_encoder import write_nifti
from epvs_fusion.common.lesions.components import connected_components, write_lesion_burden
from epvs_fusion.common.phantom.generator import PhantomCase, PhantomSpec, Tubule, generate_phantom
from epvs_fusion.common.utils.sequence_type import SEQUENCE_NAMES

LOGGER = logging.getLogger("phantom")

GT_FILE = "gt_epvs.nii.gz"
MIMIC_FILE = "mimics.nii.gz"
REGIONS_FILE = "regions.nii.gz"
PROVENANCE_FILE = "provenance.json"
BURDEN_FILE = "lesion_burden.csv"


def subject_ids(n_subjects):
    width = max(2, len(str(n_subjects)))
    return [f"sub-{index:0{width}d}" for index in range(1, n_subjects + 1)]


def subject_seeds(n_subjects, master_seed):
    """Distinct per-subject seeds spawned from the master seed"""
    children = np.random.SeedSequence(master_seed).spawn(n_subjects)
    return [int(child.generate_state(1)[0]) for child in children]


def generate_cohort(spec: PhantomSpec, n_subjects, master_seed) -> List[PhantomCase]:
    """
    Generates n_subjects phantoms with seeds derived from master_seed.

    :param spec: phantom parameters shared by the cohort
    :param n_subjects: number of phantoms
    :param master_seed: cohort seed
    :return: phantom cases named sub-01, sub-02, ...
    """
    if n_subjects < 1:
        raise ConfigException(f"cohort needs at least one subject, got {n_subjects}")
    cases = []
    for subject_id, seed in zip(subject_ids(n_subjects), subject_seeds(n_subjects, master_seed)):
        try:
            cases.append(generate_phantom(spec, seed, subject_id))
        except EpvsException as exc:
            raise exc.with_context(f"subject {subject_id}")
    LOGGER.info("Generated %d phantoms from master seed %d", n_subjects, master_seed)
    return cases


def burden_table(cases: Sequence[PhantomCase]):
    """Ground-truth ePVS lesion sets keyed by subject id"""
    return {case.subject_id: connected_components(case.gt_epvs) for case in cases}


def save_cohort(cases: Sequence[PhantomCase], directory):
    """
    Writes a cohort tree and its lesion burden table.

    :param cases: phantoms to persist
    :param directory: cohort root, created when missing
    """
    directory = Path(directory)
    for case in cases:
        subject_dir = directory / case.subject_id
        try:
            subject_dir.mkdir(parents=True, exist_ok=True)
            for name, volume in case.volumes.items():
                write_nifti(volume, subject_dir / f"{name}.nii.gz")
            write_nifti(case.gt_epvs, subject_dir / GT_FILE)
            write_nifti(case.mimic_mask, subject_dir / MIMIC_FILE)
            write_nifti(case.regions, subject_dir / REGIONS_FILE)
            (subject_dir / PROVENANCE_FILE).write_text(json.dumps(case.provenance(), indent=2))
        except OSError as exc:
            raise VolumeIOException(f"cannot write subject {case.subject_id} to {subject_dir}: {exc}") from exc
    write_lesion_burden(burden_table(cases), directory / BURDEN_FILE)
    LOGGER.info("Saved %d phantoms to %s", len(cases), directory)


def read_provenance(subject_dir):
    path = Path(subject_dir) / PROVENANCE_FILE
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise VolumeIOException(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigException(f"malformed provenance {path}: {exc}") from exc


def load_cohort(directory) -> List[PhantomCase]:
    """
    Reads a cohort written by save_cohort. Subjects are returned in directory name order.

    :param directory: cohort root
    :return: phantom cases equal to the saved ones
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise VolumeIOException(f"cohort directory {directory} does not exist")
    cases = []
    for subject_dir in sorted(path for path in directory.iterdir() if (path / PROVENANCE_FILE).exists()):
        provenance = read_provenance(subject_dir)
        names = {int(label): name for label, name in provenance.get("region_names", {}).items()}
        cases.append(
            PhantomCase(
                subject_id=provenance["subject_id"],
                volumes={name: read_nifti(subject_dir / f"{name}.nii.gz") for name in SEQUENCE_NAMES},
                gt_epvs=read_nifti(subject_dir / GT_FILE),
                mimic_mask=read_nifti(subject_dir / MIMIC_FILE),
                regions=read_label_volume(subject_dir / REGIONS_FILE, names),
                spec=PhantomSpec.from_dict(provenance["spec"]),
                seed=int(provenance["seed"]),
                epvs_tubes=tuple(Tubule.from_dict(tube) for tube in provenance.get("epvs_tubes", [])),
            )
        )
    if not cases:
        raise VolumeIOException(f"no subjects found in {directory}")
    return cases
