"""
ablation.py:

Cross-validates every sequence combination of an experiment and lays the aggregates out as a comparison table: one row
per combination, columns in the order sensitivity, precision, magnitude accuracy, volumetric similarity, AUC,
Hausdorff, Mahalanobis, ICC of lesion counts and ICC of volumes. The same table is built for every region.
"""
import dataclasses
import logging
from typing import Dict, List, Optional, Sequence

from epvs_fusion.common.data_types.exceptions import EpvsException
from epvs_fusion.common.data_types.report_data import METRIC_FIELDS, AggregateReport
from epvs_fusion.common.handlers import DataHandler
from epvs_fusion.common.harness.experiment import ExperimentConfig, FoldResult
from epvs_fusion.common.harness.loocv import run_loocv
from epvs_fusion.common.phantom.generator import REGION_NAMES
from epvs_fusion.common.utils.sequence_type import combo_name
from epvs_fusion.version import REPORT_SCHEMA_VERSION

LOGGER = logging.getLogger("harness")

TABLE1_COLUMNS = (
    "sensitivity",
    "precision",
    "magnitude_accuracy",
    "volumetric_similarity",
    "auc",
    "hausdorff_mm",
    "mahalanobis",
    "icc_lesions",
    "icc_volume",
)
LOWER_IS_BETTER = ("hausdorff_mm", "mahalanobis")
SE_COLUMNS = tuple(f"{name}_se" for name in METRIC_FIELDS)
EXTRA_COLUMNS = ("mean_magnitude_accuracy", "n_subjects")


def table_row(aggregate: AggregateReport) -> Dict[str, Optional[float]]:
    """
    One table row. magnitude_accuracy is sqrt(mean S ^ 2 + mean P ^ 2); mean_magnitude_accuracy is the mean of the
    per-subject values. Standard errors go to <metric>_se columns.
    """
    row = {name: aggregate.mean(name) for name in METRIC_FIELDS}
    row["magnitude_accuracy"] = aggregate.magnitude_accuracy_of_means
    row["icc_lesions"] = aggregate.icc_lesions
    row["icc_volume"] = aggregate.icc_volume
    row.update({f"{name}_se": aggregate.summaries[name].se for name in METRIC_FIELDS})
    row["mean_magnitude_accuracy"] = aggregate.mean("magnitude_accuracy")
    row["n_subjects"] = aggregate.n_subjects
    return {name: row[name] for name in TABLE1_COLUMNS + SE_COLUMNS + EXTRA_COLUMNS}


def rank_columns(rows: Dict[str, Dict[str, Optional[float]]]):
    """
    Best and second best combination per column. Undefined values never rank; ties keep table order.

    :param rows: combination name to table row, in table order
    :return: column to {"best": name, "second": name}, entries None when too few rows are defined
    """
    rankings = {}
    for column in TABLE1_COLUMNS:
        sign = 1.0 if column in LOWER_IS_BETTER else -1.0
        defined = [
            (sign * row[column], position, name)
            for position, (name, row) in enumerate(rows.items())
            if row[column] is not None
        ]
        ordered = [name for _, _, name in sorted(defined)]
        rankings[column] = {
            "best": ordered[0] if ordered else None,
            "second": ordered[1] if len(ordered) > 1 else None,
        }
    return rankings


@dataclasses.dataclass
class ComboResult:
    combo: tuple
    folds: List[FoldResult]
    aggregate: AggregateReport

    @property
    def name(self):
        return combo_name(self.combo)


@dataclasses.dataclass
class AblationReport:
    """Results of every combination plus the experiment settings they came from"""

    config: dict
    results: List[ComboResult]

    def rows(self):
        return {result.name: table_row(result.aggregate) for result in self.results}

    def region_names(self):
        """Regions present in any aggregate; the named evaluation regions first"""
        found = []
        for result in self.results:
            found.extend(name for name in result.aggregate.regions if name not in found)
        return [name for name in REGION_NAMES if name in found] + [name for name in found if name not in REGION_NAMES]

    def region_rows(self, region):
        return {
            result.name: table_row(result.aggregate.regions[region])
            for result in self.results
            if region in result.aggregate.regions
        }

    def to_dict(self):
        rows = self.rows()
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "config": self.config,
            "columns": list(TABLE1_COLUMNS),
            "rows": [{"combo": name, **row} for name, row in rows.items()],
            "rankings": rank_columns(rows),
            "regions": {
                region: {
                    "rows": [{"combo": name, **row} for name, row in self.region_rows(region).items()],
                    "rankings": rank_columns(self.region_rows(region)),
                }
                for region in self.region_names()
            },
            "aggregates": {result.name: result.aggregate.to_dict() for result in self.results},
            "folds": {result.name: [fold.to_dict() for fold in result.folds] for result in self.results},
        }


def run_ablation(
    cohort, config: ExperimentConfig, checkpoint_dir=None, handlers: Sequence[DataHandler] = ()
) -> AblationReport:
    """
    Cross-validates every combination of the experiment in table order.

    :param cohort: SubjectData or PhantomCase objects
    :param config: experiment settings
    :param checkpoint_dir: where fold checkpoints go, nowhere when None
    :param handlers: extra fold result handlers
    :return: the ablation report
    """
    results = []
    for combo in config.combos:
        LOGGER.info("Cross-validating %s", combo_name(combo))
        try:
            folds, aggregate = run_loocv(cohort, combo, config, checkpoint_dir, handlers)
        except EpvsException as exc:
            raise exc.with_context(f"combination {combo_name(combo)}")
        results.append(ComboResult(combo, folds, aggregate))
    return AblationReport(config.to_dict(), results)
