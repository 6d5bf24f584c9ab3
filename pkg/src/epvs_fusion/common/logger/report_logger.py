"""
report_logger.py:

A wrapper on the openpyxl library that writes result tables into an excel workbook, one sheet per table. The header
row is bold and the cells flagged as best or second best in a column get a fill color. The documentation for openpyxl
can be found here:
https://openpyxl.readthedocs.io/en/stable/index.html

If the openpyxl library isn't installed, this class does nothing.

This class uses the write-only optimization of openpyxl, see:
https://openpyxl.readthedocs.io/en/stable/optimized.html#write-only-mode
"""
import logging

# If openpyxl isn't installed, ignore all functionality in this module
try:
    from openpyxl import Workbook
    from openpyxl.cell import WriteOnlyCell
    from openpyxl.styles import Font, PatternFill

    MODULE_INSTALLED = True
except ImportError:
    MODULE_INSTALLED = False

LOGGER = logging.getLogger("reports")


class ReportLogger:
    """
    Collects tables and saves them as one workbook.
    """

    BEST = "ADEBAD"
    SECOND = "FFFF99"

    def __init__(self, filename, font_name="calibri"):
        """
        :param filename: path of the .xlsx file written by close
        :param font_name: font of every cell
        """
        self.filename = str(filename)
        self.font_name = font_name
        self.saved = False
        if not MODULE_INSTALLED:
            LOGGER.info("openpyxl is not installed, skipping %s", self.filename)
            return
        self.workbook = Workbook(write_only=True)

    @property
    def enabled(self):
        return MODULE_INSTALLED

    def add_table(self, title, columns, rows, highlights=None):
        """
        Appends a sheet.

        :param title: sheet title, truncated to the 31 characters excel allows
        :param columns: header labels
        :param rows: row values, None is written as an empty cell
        :param highlights: optional map of (row index, column index) to BEST or SECOND
        """
        if not MODULE_INSTALLED:
            return
        highlights = highlights or {}
        sheet = self.workbook.create_sheet(title=str(title)[:31])
        sheet.append([self.__get_cell(sheet, label, bold=True) for label in columns])
        for row_index, row in enumerate(rows):
            sheet.append(
                [
                    self.__get_cell(sheet, value, color=highlights.get((row_index, column_index)))
                    for column_index, value in enumerate(row)
                ]
            )

    def close(self):
        """
        Saves the write-only workbook. Only the first call writes.
        """
        if not MODULE_INSTALLED or self.saved:
            return
        self.workbook.save(filename=self.filename)
        self.saved = True
        LOGGER.info("Wrote %s", self.filename)

    def __get_cell(self, sheet, value, color=None, bold=False):
        cell = WriteOnlyCell(sheet, value=value)
        if color is not None:
            # pylint: disable=E0237
            cell.fill = PatternFill("solid", fgColor=color)
        # pylint: disable=E0237
        cell.font = Font(name=self.font_name, bold=bold)
        return cell
