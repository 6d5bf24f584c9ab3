"""
loocv.py:

Cross-validation of one sequence combination. Every fold trains a fresh network on its training subjects, selects the
parameters on its validation subjects and evaluates the held-out subject(s). Fold seeds derive from (seed, fold index)
only, so folds may run in any order or in parallel and give the same results.

Finished folds are handed to registered DataHandlers in fold order.
"""
import concurrent.futures
import dataclasses
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from epvs_fusion.common.data_types.exceptions import ConfigException
from epvs_fusion.common.data_types.report_data import AggregateReport
from epvs_fusion.common.encoders.checkpoint_encoder import save_checkpoint
from epvs_fusion.common.handlers import DataHandler, HandlerRegistrar
from epvs_fusion.common.harness.experiment import ExperimentConfig, FoldResult, SubjectData
from epvs_fusion.common.metrics.aggregate import aggregate_subjects
from epvs_fusion.common.metrics.evaluation import evaluate_subject
from epvs_fusion.common.phantom.generator import PhantomCase
from epvs_fusion.common.preprocess.augment import augment
from epvs_fusion.common.preprocess.intensity import normalize_intensity
from epvs_fusion.common.preprocess.slicing import extract_axial_slices, select_training_slices
from epvs_fusion.common.unet.inference import predict_volume
from epvs_fusion.common.unet.network import UNetModel
from epvs_fusion.common.unet.training import TrainHistory, train
from epvs_fusion.common.utils.sequence_type import combo_name, parse_combo

LOGGER = logging.getLogger("harness")


@dataclasses.dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    test: Tuple[str, ...]
    validation: Tuple[str, ...]
    training: Tuple[str, ...]


def fold_splits(subject_ids: Sequence[str], n_val, seed, n_folds=None) -> List[FoldSplit]:
    """
    Deterministic partition of the cohort for every fold.

    Without n_folds each subject is held out alone, in cohort order. With n_folds the subjects are shuffled by the
    seed and dealt into n_folds held-out groups. Validation subjects are drawn from the remaining subjects with a
    generator seeded by (seed, fold index); the rest train.

    :param subject_ids: cohort subject ids
    :param n_val: validation subjects per fold
    :param seed: experiment seed
    :param n_folds: number of folds, None for leave-one-out
    :return: one FoldSplit per fold
    """
    subject_ids = list(subject_ids)
    if len(set(subject_ids)) != len(subject_ids):
        raise ConfigException("subject ids must be unique")
    if n_folds is None:
        groups = [[subject] for subject in subject_ids]
    else:
        if not 2 <= n_folds <= len(subject_ids):
            raise ConfigException(f"cannot split {len(subject_ids)} subjects into {n_folds} folds")
        order = np.random.default_rng(seed).permutation(len(subject_ids))
        groups = [sorted(group.tolist()) for group in np.array_split(order, n_folds)]
        groups = [[subject_ids[index] for index in group] for group in groups]
    splits = []
    for fold_index, test in enumerate(groups):
        remaining = [subject for subject in subject_ids if subject not in test]
        if n_val >= len(remaining):
            raise ConfigException(f"fold {fold_index}: {n_val} validation subjects leave no training subject")
        rng = np.random.default_rng([seed, fold_index])
        chosen = set(rng.choice(len(remaining), size=n_val, replace=False).tolist())
        validation = tuple(subject for index, subject in enumerate(remaining) if index in chosen)
        training = tuple(subject for index, subject in enumerate(remaining) if index not in chosen)
        splits.append(FoldSplit(fold_index, tuple(test), validation, training))
    return splits


def fold_seeds(seed, fold_index):
    """(initialization, shuffling, slice selection) seeds of a fold"""
    return [int(value) for value in np.random.SeedSequence([seed, fold_index]).generate_state(3)]


def normalized_channels(subject: SubjectData, combo):
    return [normalize_intensity(volume) for volume in subject.channels(combo)]


def subject_samples(subject: SubjectData, combo, config: ExperimentConfig, seed, augmented):
    """
    Normalized axial samples of one subject, thinned of empty slices and optionally augmented.
    """
    samples = extract_axial_slices(normalized_channels(subject, combo), subject.gt_epvs, subject.subject_id)
    samples = select_training_slices(samples, config.empty_slice_fraction, seed)
    if not augmented:
        return samples
    return [variant for sample in samples for variant in augment(sample, config.augmentation, seed)]


def train_on_subjects(
    training: Sequence[SubjectData], validation: Sequence[SubjectData], combo, config: ExperimentConfig, seeds
) -> Tuple[UNetModel, TrainHistory]:
    """
    Trains one network for a combination.

    :param seeds: (initialization, shuffling, slice selection) seeds
    """
    init_seed, shuffle_seed, selection_seed = seeds
    train_samples, val_samples = [], []
    for position, subject in enumerate(training):
        train_samples.extend(subject_samples(subject, combo, config, selection_seed + position, augmented=True))
    for position, subject in enumerate(validation):
        val_samples.extend(subject_samples(subject, combo, config, selection_seed + position, augmented=False))
    network = dataclasses.replace(config.network_for(combo), seed=init_seed)
    return train(network, dataclasses.replace(config.train, seed=shuffle_seed), train_samples, val_samples)


def evaluate_model(model: UNetModel, subject: SubjectData, combo, config: ExperimentConfig):
    """Predicts a subject and scores the prediction against its ground truth"""
    prob, binary = predict_volume(model, normalized_channels(subject, combo), config.predict_batch_size)
    return evaluate_subject(binary, subject.gt_epvs, prob, subject.regions, config.evaluation, subject.subject_id)


def checkpoint_file(checkpoint_dir, combo, fold_index):
    return Path(checkpoint_dir) / combo_name(combo) / f"fold{fold_index:02d}.ckpt"


def run_fold(split: FoldSplit, subjects, combo, config: ExperimentConfig, checkpoint_dir=None) -> List[FoldResult]:
    """
    Trains and evaluates one fold.

    :param split: subjects of the fold
    :param subjects: the cohort keyed by subject id
    :return: one FoldResult per held-out subject
    """
    for test_subject in split.test:
        assert test_subject not in split.training, f"{test_subject} leaked into training"
        assert test_subject not in split.validation, f"{test_subject} leaked into validation"
    LOGGER.info(
        "%s fold %d: test %s, %d training, %d validation subjects",
        combo_name(combo),
        split.fold_index,
        ", ".join(split.test),
        len(split.training),
        len(split.validation),
    )
    model, history = train_on_subjects(
        [subjects[subject] for subject in split.training],
        [subjects[subject] for subject in split.validation],
        combo,
        config,
        fold_seeds(config.seed, split.fold_index),
    )
    path = None
    if checkpoint_dir is not None:
        path = checkpoint_file(checkpoint_dir, combo, split.fold_index)
        metadata = {
            "combo": list(combo),
            "fold_index": split.fold_index,
            "test_subjects": list(split.test),
            "train_subjects": list(split.training),
            "val_subjects": list(split.validation),
            "history": history.to_dict(),
        }
        save_checkpoint(model, path, metadata)
    return [
        FoldResult(
            split.fold_index,
            test_subject,
            split.training,
            split.validation,
            None if path is None else str(path),
            evaluate_model(model, subjects[test_subject], combo, config),
        )
        for test_subject in split.test
    ]


class FoldLogger(DataHandler):
    """Logs the headline metrics of every finished fold"""

    def data_callback(self, data, sender=None):
        report = data.report

        def show(value):
            return "undefined" if value is None else f"{value:.3f}"

        LOGGER.info(
            "%s fold %d (%s): S %s, P %s, A %s, lesions %d/%d",
            sender or "?",
            data.fold_index,
            data.test_subject,
            show(report.sensitivity),
            show(report.precision),
            show(report.magnitude_accuracy),
            report.lesion_count_pred,
            report.lesion_count_gt,
        )


class LoocvRunner(HandlerRegistrar):
    """
    Runs the cross-validation of combinations over a cohort and streams fold results to registered handlers.
    """

    def __init__(self, config: ExperimentConfig, checkpoint_dir=None):
        super().__init__()
        self.config = config
        self.checkpoint_dir = checkpoint_dir

    def run(self, cohort, combo) -> Tuple[List[FoldResult], AggregateReport]:
        """
        :param cohort: SubjectData or PhantomCase objects
        :param combo: sequence combination
        :return: fold results in fold order and their aggregate
        """
        combo = parse_combo(combo)
        subjects = [SubjectData.from_phantom(item) if isinstance(item, PhantomCase) else item for item in cohort]
        for subject in subjects:
            subject.channels(combo)
        self.config.validate_cohort(len(subjects))
        by_id = {subject.subject_id: subject for subject in subjects}
        splits = fold_splits(list(by_id), self.config.n_val_subjects, self.config.seed, self.config.n_folds)

        folds = []
        for fold_results in self._execute(splits, by_id, combo):
            for result in fold_results:
                self.send_to_all(result, combo_name(combo))
                folds.append(result)
        aggregate = aggregate_subjects([fold.report for fold in folds])
        LOGGER.info("%s: %d folds aggregated over %d subjects", combo_name(combo), len(splits), len(folds))
        return folds, aggregate

    def _execute(self, splits, by_id, combo):
        if self.config.workers == 1:
            for split in splits:
                yield run_fold(split, by_id, combo, self.config, self.checkpoint_dir)
            return
        with concurrent.futures.ProcessPoolExecutor(max_workers=self.config.workers) as executor:
            futures = [
                executor.submit(run_fold, split, by_id, combo, self.config, self.checkpoint_dir) for split in splits
            ]
            for future in futures:
                yield future.result()


def run_loocv(
    cohort, combo, config: ExperimentConfig, checkpoint_dir=None, handlers: Sequence[DataHandler] = ()
) -> Tuple[List[FoldResult], AggregateReport]:
    """
    Cross-validates one combination with a FoldLogger and the given handlers attached.
    """
    runner = LoocvRunner(config, checkpoint_dir)
    runner.register(FoldLogger())
    for handler in handlers:
        runner.register(handler)
    return runner.run(cohort, combo)


def train_single(
    subjects: Sequence[SubjectData], combo, config: ExperimentConfig, validation: Optional[Sequence[str]] = None
):
    """
    Trains one model on a whole cohort, holding out the named validation subjects (or n_val_subjects drawn from the
    seed when none are named).

    :return: (model, history, validation subject ids)
    """
    combo = parse_combo(combo)
    ids = [subject.subject_id for subject in subjects]
    if validation is None:
        if config.n_val_subjects >= len(ids):
            raise ConfigException(f"{config.n_val_subjects} validation subjects leave no training subject")
        rng = np.random.default_rng(config.seed)
        validation = [ids[index] for index in sorted(rng.choice(len(ids), size=config.n_val_subjects, replace=False))]
    unknown = set(validation) - set(ids)
    if unknown:
        raise ConfigException(f"unknown validation subjects {sorted(unknown)}")
    model, history = train_on_subjects(
        [subject for subject in subjects if subject.subject_id not in validation],
        [subject for subject in subjects if subject.subject_id in validation],
        combo,
        config,
        fold_seeds(config.seed, 0),
    )
    return model, history, list(validation)
