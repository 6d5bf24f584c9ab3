"""
Tests the logging setup and the excel report writer
"""
import logging

import pytest

from epvs_fusion.common import logger as py_log
from epvs_fusion.common.logger import report_logger


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    level = root.level
    yield
    py_log.configure_py_log(directory=None)
    for handler in list(py_log.INSTALLED_HANDLERS):
        root.removeHandler(handler)
    py_log.INSTALLED_HANDLERS.clear()
    root.setLevel(level)


def test_log_file_written(tmp_path, restore_logging):
    handlers = py_log.configure_py_log(directory=tmp_path / "logs", filename="/usr/bin/epvs-fusion")
    assert any(isinstance(handler, logging.FileHandler) for handler in handlers)
    logging.getLogger("harness").info("fold %d done", 3)
    for handler in handlers:
        handler.flush()
    text = (tmp_path / "logs" / "epvs-fusion.log").read_text()
    assert "[INFO] harness: fold 3 done" in text, f"FAIL: unexpected log text {text!r}"


def test_reconfiguring_replaces_handlers(tmp_path, restore_logging):
    root = logging.getLogger()
    first = py_log.configure_py_log(directory=tmp_path, filename="first.log")
    second = py_log.configure_py_log(directory=tmp_path, filename="second.log", level=logging.DEBUG)
    assert not any(handler in root.handlers for handler in first), "FAIL: stale handlers left installed"
    assert all(handler in root.handlers for handler in second)
    assert py_log.INSTALLED_HANDLERS == second
    assert root.level == logging.DEBUG
    assert (tmp_path / "second.log").exists() and not (tmp_path / "second.log.log").exists()


def test_mirror_to_stdout(tmp_path, restore_logging, capsys):
    handlers = py_log.configure_py_log(directory=tmp_path, filename="mirror", mirror_to_stdout=True)
    assert len(handlers) == 2
    logging.getLogger("phantom").warning("overcrowded")
    assert "overcrowded" in capsys.readouterr().out


@pytest.mark.skipif(not report_logger.MODULE_INSTALLED, reason="openpyxl is not installed")
def test_report_workbook(tmp_path):
    from openpyxl import load_workbook

    path = tmp_path / "table.xlsx"
    workbook = report_logger.ReportLogger(path)
    assert workbook.enabled
    workbook.add_table(
        "sensitivity and precision by combination",
        ["combo", "sensitivity"],
        [["T2w", 0.9], ["T2w+FLAIR", None]],
        highlights={(0, 1): report_logger.ReportLogger.BEST},
    )
    workbook.close()
    workbook.close()
    loaded = load_workbook(path)
    assert loaded.sheetnames == ["sensitivity and precision by co"], f"FAIL: sheet title {loaded.sheetnames}"
    rows = list(loaded.active.values)
    assert rows == [("combo", "sensitivity"), ("T2w", 0.9), ("T2w+FLAIR", None)]


def test_report_logger_without_openpyxl(tmp_path, monkeypatch):
    monkeypatch.setattr(report_logger, "MODULE_INSTALLED", False)
    workbook = report_logger.ReportLogger(tmp_path / "skipped.xlsx")
    workbook.add_table("t", ["a"], [[1]])
    workbook.close()
    assert not workbook.enabled
    assert not (tmp_path / "skipped.xlsx").exists()
