"""
@brief Metric report data classes.

Undefined metric values are stored as None and serialize to JSON null. Nothing here coerces them to zero.
"""
import dataclasses
from typing import Dict, List, Optional, Tuple

from epvs_fusion.common.data_types.lesion_data import MatchCounts

# Per-subject metrics, in the order of the comparison table
METRIC_FIELDS = (
    "sensitivity",
    "precision",
    "magnitude_accuracy",
    "volumetric_similarity",
    "auc",
    "hausdorff_mm",
    "mahalanobis",
)
COUNT_FIELDS = ("lesion_count_pred", "lesion_count_gt", "volume_pred_vox", "volume_gt_vox")


@dataclasses.dataclass
class DetectionScores:
    sensitivity: Optional[float]
    precision: Optional[float]
    magnitude_accuracy: Optional[float]

    def __iter__(self):
        return iter((self.sensitivity, self.precision, self.magnitude_accuracy))


@dataclasses.dataclass
class MetricsReport:
    """
    Metrics of one subject (or one region of one subject).
    """

    subject_id: str = ""
    sensitivity: Optional[float] = None
    precision: Optional[float] = None
    magnitude_accuracy: Optional[float] = None
    volumetric_similarity: Optional[float] = None
    auc: Optional[float] = None
    hausdorff_mm: Optional[float] = None
    mahalanobis: Optional[float] = None
    lesion_count_pred: int = 0
    lesion_count_gt: int = 0
    volume_pred_vox: int = 0
    volume_gt_vox: int = 0
    counts: MatchCounts = dataclasses.field(default_factory=lambda: MatchCounts(0, 0, 0))
    regions: Dict[str, "MetricsReport"] = dataclasses.field(default_factory=dict)

    def metric(self, name):
        return getattr(self, name)

    def to_dict(self):
        values = {"subject_id": self.subject_id}
        values.update({name: getattr(self, name) for name in METRIC_FIELDS + COUNT_FIELDS})
        values["counts"] = self.counts.to_dict()
        values["regions"] = {name: report.to_dict() for name, report in self.regions.items()}
        return values

    @classmethod
    def from_dict(cls, values: dict):
        kwargs = {name: values.get(name) for name in METRIC_FIELDS}
        kwargs.update({name: int(values.get(name, 0)) for name in COUNT_FIELDS})
        return cls(
            subject_id=values.get("subject_id", ""),
            counts=MatchCounts(**values.get("counts", {"tp": 0, "fp": 0, "fn": 0})),
            regions={name: cls.from_dict(sub) for name, sub in values.get("regions", {}).items()},
            **kwargs,
        )


@dataclasses.dataclass
class MetricSummary:
    """Mean and standard error of one metric over the subjects where it is defined"""

    mean: Optional[float]
    se: Optional[float]
    n: int
    n_excluded: int

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass
class AgreementSummary:
    """Bland-Altman summary: differences are predicted minus ground truth"""

    mean_diff: float
    sd_diff: float
    loa_low: float
    loa_high: float
    points: List[Tuple[float, float]]

    def to_dict(self):
        values = dataclasses.asdict(self)
        values["points"] = [list(point) for point in self.points]
        return values

    @classmethod
    def from_dict(cls, values):
        return cls(
            values["mean_diff"],
            values["sd_diff"],
            values["loa_low"],
            values["loa_high"],
            [tuple(point) for point in values["points"]],
        )


@dataclasses.dataclass
class ScatterSummary:
    """Scatter points (predicted, ground truth) and their Pearson correlation"""

    points: List[Tuple[float, float]]
    pearson_r: float

    def to_dict(self):
        return {"points": [list(point) for point in self.points], "pearson_r": self.pearson_r}

    @classmethod
    def from_dict(cls, values):
        return cls([tuple(point) for point in values["points"]], values["pearson_r"])


def _optional(summary_type, values):
    return None if values is None else summary_type.from_dict(values)


@dataclasses.dataclass
class AggregateReport:
    """
    Cohort level summary of per-subject reports. magnitude_accuracy_of_means is sqrt(mean S ^ 2 + mean P ^ 2), the
    value used for the comparison table; summaries["magnitude_accuracy"] is the mean of per-subject values.
    """

    n_subjects: int
    summaries: Dict[str, MetricSummary]
    magnitude_accuracy_of_means: Optional[float] = None
    icc_lesions: Optional[float] = None
    icc_volume: Optional[float] = None
    bland_altman_counts: Optional[AgreementSummary] = None
    bland_altman_volumes: Optional[AgreementSummary] = None
    scatter_counts: Optional[ScatterSummary] = None
    scatter_volumes: Optional[ScatterSummary] = None
    sensitivity_precision: List[Tuple[str, Optional[float], Optional[float]]] = dataclasses.field(default_factory=list)
    median_sensitivity: Optional[float] = None
    median_precision: Optional[float] = None
    regions: Dict[str, "AggregateReport"] = dataclasses.field(default_factory=dict)

    def mean(self, name):
        return self.summaries[name].mean

    def to_dict(self):
        def dump(value):
            return None if value is None else value.to_dict()

        return {
            "n_subjects": self.n_subjects,
            "summaries": {name: summary.to_dict() for name, summary in self.summaries.items()},
            "magnitude_accuracy_of_means": self.magnitude_accuracy_of_means,
            "icc_lesions": self.icc_lesions,
            "icc_volume": self.icc_volume,
            "bland_altman_counts": dump(self.bland_altman_counts),
            "bland_altman_volumes": dump(self.bland_altman_volumes),
            "scatter_counts": dump(self.scatter_counts),
            "scatter_volumes": dump(self.scatter_volumes),
            "sensitivity_precision": [list(row) for row in self.sensitivity_precision],
            "median_sensitivity": self.median_sensitivity,
            "median_precision": self.median_precision,
            "regions": {name: report.to_dict() for name, report in self.regions.items()},
        }

    @classmethod
    def from_dict(cls, values):
        return cls(
            n_subjects=values["n_subjects"],
            summaries={name: MetricSummary(**summary) for name, summary in values["summaries"].items()},
            magnitude_accuracy_of_means=values.get("magnitude_accuracy_of_means"),
            icc_lesions=values.get("icc_lesions"),
            icc_volume=values.get("icc_volume"),
            bland_altman_counts=_optional(AgreementSummary, values.get("bland_altman_counts")),
            bland_altman_volumes=_optional(AgreementSummary, values.get("bland_altman_volumes")),
            scatter_counts=_optional(ScatterSummary, values.get("scatter_counts")),
            scatter_volumes=_optional(ScatterSummary, values.get("scatter_volumes")),
            sensitivity_precision=[tuple(row) for row in values.get("sensitivity_precision", [])],
            median_sensitivity=values.get("median_sensitivity"),
            median_precision=values.get("median_precision"),
            regions={name: cls.from_dict(sub) for name, sub in values.get("regions", {}).items()},
        )
