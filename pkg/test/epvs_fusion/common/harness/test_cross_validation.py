"""
Tests fold layout, cross-validation runs, the ablation table and report writing
"""
import dataclasses

import numpy as np
import pytest

from epvs_fusion.common.data_types.exceptions import ConfigException, VolumeIOException
from epvs_fusion.common.decoders.checkpoint_decoder import load_checkpoint
from epvs_fusion.common.handlers import DataHandler, HandlerRegistrar
from epvs_fusion.common.harness.ablation import TABLE1_COLUMNS, rank_columns, run_ablation, table_row
from epvs_fusion.common.harness.experiment import ExperimentConfig, SubjectData, load_subjects
from epvs_fusion.common.harness.loocv import (
    FoldLogger,
    LoocvRunner,
    checkpoint_file,
    fold_seeds,
    fold_splits,
    run_loocv,
    train_single,
)
from epvs_fusion.common.harness.reports import (
    AGGREGATE_FILE,
    TABLE_COLUMNS,
    csv_text,
    load_report,
    plot_rows,
    render_tables,
    write_json,
    write_reports,
)
from epvs_fusion.common.logger.report_logger import MODULE_INSTALLED
from epvs_fusion.common.phantom.cohort import generate_cohort, save_cohort
from epvs_fusion.common.phantom.generator import PhantomSpec
from epvs_fusion.common.unet.network import UNetConfig
from epvs_fusion.common.unet.training import TrainConfig

SPEC = PhantomSpec(dims=(16, 16, 8), n_epvs=(2, 3), n_wmh=0, n_lacunes=0, swi_filter_size=(8, 8), n_regions=2)
CONFIG = ExperimentConfig(
    combos=(("T2w",), ("T2w", "FLAIR")),
    n_val_subjects=1,
    unet=UNetConfig(depth=1, base_filters=2),
    train=TrainConfig(learning_rate=0.01, epochs=2, batch_size=4),
    seed=3,
)


class Collector(DataHandler):
    def __init__(self):
        self.received = []

    def data_callback(self, data, sender=None):
        self.received.append((sender, data.test_subject))


@pytest.fixture(scope="module")
def cohort():
    return generate_cohort(SPEC, 3, master_seed=11)


@pytest.fixture(scope="module")
def ablation(cohort, tmp_path_factory):
    checkpoints = tmp_path_factory.mktemp("checkpoints")
    collector = Collector()
    return run_ablation(cohort, CONFIG, checkpoints, [collector]), checkpoints, collector


def test_registrar_fans_out_in_order():
    registrar = HandlerRegistrar()
    first, second = Collector(), Collector()
    registrar.register(first)
    registrar.register(second)
    with pytest.raises(TypeError):
        registrar.register(print)
    assert registrar.handlers == (first, second), "FAIL: rejected handler was kept"
    fold = dataclasses.make_dataclass("Fold", ["test_subject"])
    registrar.send_to_all(fold("sub-02"), "FLAIR")
    registrar.send_to_all(fold("sub-01"))
    for collector in (first, second):
        assert collector.received == [("FLAIR", "sub-02"), (None, "sub-01")], f"FAIL: got {collector.received}"


def test_runner_starts_without_handlers():
    runner = LoocvRunner(CONFIG)
    assert runner.handlers == ()
    runner.register(FoldLogger())
    assert isinstance(runner.handlers[0], FoldLogger)


def test_leave_one_out_splits():
    ids = [f"sub-{index:02d}" for index in range(1, 8)]
    splits = fold_splits(ids, 2, seed=5)
    assert [split.test for split in splits] == [(subject,) for subject in ids]
    for split in splits:
        assert len(split.validation) == 2 and len(split.training) == 4
        assert set(split.test) | set(split.validation) | set(split.training) == set(ids)
        assert not set(split.test) & (set(split.validation) | set(split.training))
    assert fold_splits(ids, 2, seed=5) == splits
    assert fold_splits(ids, 2, seed=6) != splits


def test_k_fold_splits():
    ids = [f"sub-{index:02d}" for index in range(1, 17)]
    splits = fold_splits(ids, 2, seed=2023, n_folds=4)
    held_out = [subject for split in splits for subject in split.test]
    assert sorted(held_out) == ids, "FAIL: every subject must be held out exactly once"
    assert [len(split.test) for split in splits] == [4, 4, 4, 4]
    assert all(len(split.training) == 10 for split in splits)
    with pytest.raises(ConfigException):
        fold_splits(ids, 2, seed=0, n_folds=17)
    with pytest.raises(ConfigException):
        fold_splits(ids[:3], 2, seed=0)
    with pytest.raises(ConfigException):
        fold_splits(["a", "a", "b"], 0, seed=0)


def test_fold_seeds_depend_on_fold_only():
    assert fold_seeds(3, 1) == fold_seeds(3, 1)
    assert fold_seeds(3, 1) != fold_seeds(3, 2)
    assert len(set(fold_seeds(3, 0))) == 3


def test_experiment_config_validation():
    with pytest.raises(ConfigException):
        ExperimentConfig(combos=())
    with pytest.raises(ConfigException):
        ExperimentConfig(combos=(("T2w", "PD"),))
    with pytest.raises(ConfigException):
        ExperimentConfig(n_folds=1)
    with pytest.raises(ConfigException):
        ExperimentConfig(empty_slice_fraction=1.5)
    with pytest.raises(ConfigException):
        ExperimentConfig().validate_cohort(5)
    ExperimentConfig(n_val_subjects=1).validate_cohort(5)
    with pytest.raises(ConfigException):
        ExperimentConfig(n_val_subjects=1, n_folds=4).validate_cohort(3)
    assert ExperimentConfig(combos=["T2w+FLAIR"]).network_for(("T2w", "FLAIR")).in_channels == 2


def test_rank_columns():
    base = dict.fromkeys(TABLE1_COLUMNS)
    rows = {
        "T2w": {**base, "sensitivity": 0.8, "hausdorff_mm": 2.0},
        "FLAIR": {**base, "sensitivity": 0.9, "hausdorff_mm": 1.0},
        "T1w": {**base, "sensitivity": None, "hausdorff_mm": 1.0},
    }
    rankings = rank_columns(rows)
    assert rankings["sensitivity"] == {"best": "FLAIR", "second": "T2w"}
    assert rankings["hausdorff_mm"] == {"best": "FLAIR", "second": "T1w"}, "FAIL: lower distance ranks first"
    assert rankings["auc"] == {"best": None, "second": None}


def test_ablation_results(ablation, cohort):
    report, checkpoints, collector = ablation
    assert [result.name for result in report.results] == ["T2w", "T2w+FLAIR"]
    for result in report.results:
        assert [fold.test_subject for fold in result.folds] == [case.subject_id for case in cohort]
        assert result.aggregate.n_subjects == 3
        for fold in result.folds:
            assert fold.test_subject not in fold.train_subjects + fold.val_subjects
            assert len(fold.val_subjects) == 1
            assert fold.checkpoint_path == str(checkpoint_file(checkpoints, result.combo, fold.fold_index))
        row = table_row(result.aggregate)
        assert list(row)[: len(TABLE1_COLUMNS)] == list(TABLE1_COLUMNS)
    assert collector.received[0] == ("T2w", "sub-01") and len(collector.received) == 6

    model, metadata = load_checkpoint(checkpoint_file(checkpoints, ("T2w", "FLAIR"), 2))
    assert model.config.in_channels == 2
    assert metadata["test_subjects"] == ["sub-03"] and metadata["combo"] == ["T2w", "FLAIR"]


def test_parallel_folds_match_sequential(ablation, cohort):
    report, _, _ = ablation
    parallel, aggregate = run_loocv(cohort, ("T2w",), dataclasses.replace(CONFIG, workers=2))
    sequential = report.results[0]
    assert [fold.report.to_dict() for fold in parallel] == [fold.report.to_dict() for fold in sequential.folds]
    assert aggregate.to_dict() == sequential.aggregate.to_dict()


def test_reports_roundtrip(ablation, tmp_path):
    report, _, _ = ablation
    values = write_reports(report, tmp_path)
    table = (tmp_path / "table1.csv").read_text().splitlines()
    assert table[0] == ",".join(TABLE_COLUMNS)
    assert [line.split(",")[0] for line in table[1:]] == ["T2w", "T2w+FLAIR"]
    assert (tmp_path / "table1.xlsx").exists() == MODULE_INSTALLED
    assert (tmp_path / "regions" / "basal_ganglia.csv").exists()

    loaded = load_report(tmp_path / AGGREGATE_FILE)
    assert loaded["rows"] == values["rows"] and loaded["rankings"] == values["rankings"]
    ba_points = csv_text(*plot_rows(loaded, "ba_counts"))
    assert ba_points == (tmp_path / "plots" / "ba_counts.csv").read_text()
    expected = report.results[0].aggregate.bland_altman_counts.points
    assert plot_rows(loaded, "ba_counts")[1][:3] == [["T2w", *point] for point in expected]

    again = tmp_path / "again"
    render_tables(loaded, again, xlsx=False)
    assert (again / "table1.csv").read_text() == (tmp_path / "table1.csv").read_text()
    with pytest.raises(ConfigException):
        plot_rows(loaded, "histogram")


def test_report_loading_errors(tmp_path):
    with pytest.raises(VolumeIOException):
        load_report(tmp_path / "missing.json")
    write_json(tmp_path / "old.json", {"schema_version": 0})
    with pytest.raises(ConfigException):
        load_report(tmp_path / "old.json")
    (tmp_path / "broken.json").write_text("{")
    with pytest.raises(ConfigException):
        load_report(tmp_path / "broken.json")


def test_load_subjects_and_train_single(cohort, tmp_path):
    save_cohort(cohort, tmp_path / "cohort")
    subjects = load_subjects(tmp_path / "cohort")
    assert [subject.subject_id for subject in subjects] == ["sub-01", "sub-02", "sub-03"]
    assert isinstance(subjects[0], SubjectData)
    assert np.array_equal(subjects[0].gt_epvs.data, cohort[0].gt_epvs.data)
    assert subjects[0].regions.name_of(1) == "basal ganglia"

    model, history, validation = train_single(subjects, "T2w", CONFIG, ["sub-02"])
    assert validation == ["sub-02"] and model.config.in_channels == 1
    assert len(history.val_loss) == len(history.train_loss)
    with pytest.raises(ConfigException):
        train_single(subjects, "T2w", CONFIG, ["sub-09"])
    with pytest.raises(ConfigException):
        SubjectData("partial", {"T2w": subjects[0].volumes["T2w"]}, subjects[0].gt_epvs).channels(("SWI",))
    with pytest.raises(VolumeIOException):
        load_subjects(tmp_path / "empty")
