"""
reports.py:

Writes experiment reports. Everything is rendered from the JSON form of an ablation report, so a saved aggregate.json
can be turned into the same tables again later:

    <out>/aggregate.json           full report
    <out>/table1.csv               one row per combination, values then <metric>_se columns
    <out>/table1.xlsx              the same tables as a workbook, when openpyxl is installed
    <out>/regions/<slug>.csv       the comparison table of one region
    <out>/plots/<kind>.csv         plot data: scatter_counts, scatter_volumes, ba_counts, ba_volumes, sens_prec
    <out>/plots/<kind>.png         renderings, when matplotlib is installed and rendering is requested
"""
import csv
import io
import json
import logging
from pathlib import Path

from epvs_fusion.common.data_types.exceptions import ConfigException, VolumeIOException
from epvs_fusion.common.harness.ablation import EXTRA_COLUMNS, SE_COLUMNS, TABLE1_COLUMNS
from epvs_fusion.common.logger.report_logger import ReportLogger
from epvs_fusion.common.phantom.generator import region_slug
from epvs_fusion.version import REPORT_SCHEMA_VERSION

# matplotlib is an optional extra, only rendering needs it
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    PLOTTING_INSTALLED = True
except ImportError:
    PLOTTING_INSTALLED = False

LOGGER = logging.getLogger("reports")

AGGREGATE_FILE = "aggregate.json"
TABLE_FILE = "table1.csv"
WORKBOOK_FILE = "table1.xlsx"
TABLE_COLUMNS = ("combo",) + TABLE1_COLUMNS + SE_COLUMNS + EXTRA_COLUMNS

PLOT_KINDS = {
    "scatter_counts": ("scatter_counts", ("combo", "predicted", "ground_truth")),
    "scatter_volumes": ("scatter_volumes", ("combo", "predicted", "ground_truth")),
    "ba_counts": ("bland_altman_counts", ("combo", "mean", "difference")),
    "ba_volumes": ("bland_altman_volumes", ("combo", "mean", "difference")),
    "sens_prec": ("sensitivity_precision", ("combo", "subject_id", "sensitivity", "precision")),
}
PLOT_LABELS = {
    "scatter_counts": ("ground-truth lesion count", "predicted lesion count"),
    "scatter_volumes": ("ground-truth volume (voxels)", "predicted volume (voxels)"),
    "ba_counts": ("mean lesion count", "predicted - ground truth"),
    "ba_volumes": ("mean volume (voxels)", "predicted - ground truth"),
    "sens_prec": ("sensitivity", "precision"),
}


def _cell(value):
    return "" if value is None else value


def csv_text(columns, rows):
    """CSV text of a header and rows, None written as an empty field"""
    stream = io.StringIO()
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows([[_cell(value) for value in row] for row in rows])
    return stream.getvalue()


def write_csv(path, columns, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(csv_text(columns, rows))
    except OSError as exc:
        raise VolumeIOException(f"cannot write {path}: {exc}") from exc


def write_json(path, values):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(values, indent=2))
    except OSError as exc:
        raise VolumeIOException(f"cannot write {path}: {exc}") from exc


def load_report(path):
    """
    Reads an aggregate.json written by write_reports.
    """
    path = Path(path)
    try:
        values = json.loads(path.read_text())
    except OSError as exc:
        raise VolumeIOException(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigException(f"malformed report {path}: {exc}") from exc
    if values.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ConfigException(f"unsupported report schema {values.get('schema_version')} in {path}")
    return values


def table_rows(rows):
    """Row dictionaries of the JSON report as value lists in TABLE_COLUMNS order"""
    return [[row.get(column) for column in TABLE_COLUMNS] for row in rows]


def plot_rows(report, kind):
    """
    Plot data of every combination.

    :param report: JSON form of an ablation report
    :param kind: one of PLOT_KINDS
    :return: (columns, rows)
    """
    if kind not in PLOT_KINDS:
        raise ConfigException(f"unknown plot {kind}, expected one of {sorted(PLOT_KINDS)}")
    field, columns = PLOT_KINDS[kind]
    rows = []
    for combo, aggregate in report["aggregates"].items():
        summary = aggregate.get(field)
        if summary is None:
            continue
        points = summary if kind == "sens_prec" else summary["points"]
        rows.extend([combo, *point] for point in points)
    return columns, rows


def _highlights(rows, rankings):
    marks = {}
    names = [row["combo"] for row in rows]
    for column, ranked in rankings.items():
        column_index = TABLE_COLUMNS.index(column)
        for key, color in (("best", ReportLogger.BEST), ("second", ReportLogger.SECOND)):
            if ranked.get(key) in names:
                marks[(names.index(ranked[key]), column_index)] = color
    return marks


def render_tables(report, out_dir, xlsx=True):
    """
    Writes the CSV tables, the plot data and optionally the workbook of a JSON report.

    :return: paths written
    """
    out_dir = Path(out_dir)
    written = [out_dir / TABLE_FILE]
    write_csv(written[0], TABLE_COLUMNS, table_rows(report["rows"]))
    workbook = ReportLogger(out_dir / WORKBOOK_FILE) if xlsx else None
    if workbook is not None:
        marks = _highlights(report["rows"], report["rankings"])
        workbook.add_table("table1", TABLE_COLUMNS, table_rows(report["rows"]), marks)
    for region, table in report.get("regions", {}).items():
        path = out_dir / "regions" / f"{region_slug(region)}.csv"
        write_csv(path, TABLE_COLUMNS, table_rows(table["rows"]))
        written.append(path)
        if workbook is not None:
            marks = _highlights(table["rows"], table["rankings"])
            workbook.add_table(region, TABLE_COLUMNS, table_rows(table["rows"]), marks)
    for kind in PLOT_KINDS:
        path = out_dir / "plots" / f"{kind}.csv"
        write_csv(path, *plot_rows(report, kind))
        written.append(path)
    if workbook is not None and workbook.enabled:
        out_dir.mkdir(parents=True, exist_ok=True)
        workbook.close()
        written.append(out_dir / WORKBOOK_FILE)
    return written


def render_plots(report, out_dir):
    """
    Renders every plot kind to PNG. Does nothing when matplotlib is unavailable.

    :return: paths written
    """
    if not PLOTTING_INSTALLED:
        LOGGER.warning("matplotlib is not installed, install the 'plots' extra to render figures")
        return []
    plots_dir = Path(out_dir) / "plots"
    plots_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in PLOT_KINDS:
        _, rows = plot_rows(report, kind)
        fig, ax = plt.subplots(figsize=(6, 6))
        for combo in dict.fromkeys(row[0] for row in rows):
            points = [row[-2:] for row in rows if row[0] == combo and None not in row[-2:]]
            if kind.startswith("scatter"):
                ax.plot([point[1] for point in points], [point[0] for point in points], "o", label=combo)
            else:
                ax.plot([point[0] for point in points], [point[1] for point in points], "o", label=combo)
        if kind.startswith("ba"):
            ax.axhline(0.0, color="gray", linewidth=0.5)
        ax.set_xlabel(PLOT_LABELS[kind][0])
        ax.set_ylabel(PLOT_LABELS[kind][1])
        ax.grid(True)
        if rows:
            ax.legend(fontsize="small")
        fig.tight_layout()
        path = plots_dir / f"{kind}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


def write_reports(report, out_dir, xlsx=True, render=False):
    """
    Writes aggregate.json and everything render_tables derives from it.

    :param report: AblationReport or its JSON form
    :param out_dir: reports directory
    :param xlsx: also write the workbook
    :param render: also render PNG plots
    :return: the JSON form that was written
    """
    values = report if isinstance(report, dict) else report.to_dict()
    write_json(Path(out_dir) / AGGREGATE_FILE, values)
    render_tables(values, out_dir, xlsx)
    if render:
        render_plots(values, out_dir)
    LOGGER.info("Wrote reports to %s", out_dir)
    return values
