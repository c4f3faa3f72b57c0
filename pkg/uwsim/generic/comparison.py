"""Result tables of the assessment, comparison and ablation commands."""
import csv
import math
from typing import Dict, List, Optional, Tuple

import colorama
from tabulate import tabulate


#: Label of the aggregation row
MEAN_ROW = "mean"

#: Terminal output stops after this many rows, files always get everything
MAX_PRINTED_ROWS = 50


class ComparisonTable:
    """Rows of named values with a per column mean.

    Cells that could not be computed hold ``None`` and may carry a note
    saying why.

    :param index_name: Header of the row label column, e.g. ``image`` or ``method``
    """

    def __init__(self, index_name: str, columns: List[str], title: str=""):
        self.index_name = index_name
        self.columns = list(columns)
        self.title = title
        self.rows = []  # type: List[str]
        self.cells = {}  # type: Dict[Tuple[str, str], Optional[float]]
        self.notes = {}  # type: Dict[str, str]

    def add_row(self, row: str, values: Optional[Dict[str, Optional[float]]]=None, note: str=""):
        if row in self.rows:
            raise ValueError("Duplicate row {}".format(row))
        self.rows.append(row)
        values = values or {}
        for col in self.columns:
            value = values.get(col)
            self.cells[(row, col)] = None if value is None else float(value)
        if note:
            self.notes[row] = note

    def mark_absent(self, row: str, reason: str):
        """Add a row with every cell absent."""
        self.add_row(row, {}, note=reason)

    def get(self, row: str, col: str) -> Optional[float]:
        return self.cells[(row, col)]

    def column(self, col: str) -> List[Optional[float]]:
        return [self.cells[(row, col)] for row in self.rows]

    def row_mean(self, row: str) -> Optional[float]:
        values = [self.cells[(row, col)] for col in self.columns if self.cells[(row, col)] is not None]
        return math.fsum(values) / len(values) if values else None

    def means(self) -> Dict[str, Optional[float]]:
        """Mean of the populated cells of each column, ``None`` for empty columns."""
        result = {}
        for col in self.columns:
            values = [v for v in self.column(col) if v is not None]
            result[col] = math.fsum(values) / len(values) if values else None
        return result

    def extremes(self, col: str) -> Tuple[Optional[float], Optional[float]]:
        values = [v for v in self.column(col) if v is not None and not math.isnan(v)]
        if len(values) < 2:
            return None, None
        return max(values), min(values)

    def write_csv(self, path: str):
        """Write rows and the mean row. Floats keep full precision."""
        header = [self.index_name] + self.columns
        has_notes = bool(self.notes)
        if has_notes:
            header.append("note")

        means = self.means()
        with open(path, "wt", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in self.rows:
                line = [row] + [_format_csv(self.cells[(row, col)]) for col in self.columns]
                if has_notes:
                    line.append(self.notes.get(row, ""))
                writer.writerow(line)
            line = [MEAN_ROW] + [_format_csv(means[col]) for col in self.columns]
            if has_notes:
                line.append("")
            writer.writerow(line)

    @classmethod
    def read_csv(cls, path: str) -> "ComparisonTable":
        """Parse a table written by :py:meth:`write_csv`, dropping the mean row."""
        with open(path, "rt", newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            has_notes = header[-1] == "note"
            columns = header[1:-1] if has_notes else header[1:]
            table = cls(header[0], columns)
            for line in reader:
                if line[0] == MEAN_ROW:
                    continue
                values = {col: _parse_csv(cell) for col, cell in zip(columns, line[1:])}
                note = line[-1] if has_notes else ""
                table.add_row(line[0], values, note=note)
        return table

    def _display_rows(self, fmt, mark=False) -> List[list]:
        marks = {col: self.extremes(col) for col in self.columns} if mark else {}
        table = []
        for row in self.rows:
            line = [row]
            for col in self.columns:
                value = self.cells[(row, col)]
                text = fmt(value)
                if mark and value is not None:
                    hi, lo = marks[col]
                    if value == hi:
                        text = "**{}**".format(text)
                    elif value == lo:
                        text = "_{}_".format(text)
                line.append(text)
            table.append(line)
        return table

    def to_markdown(self, precision: int=4) -> str:
        """Pipe table with column maxima in bold and minima in italics."""
        fmt = lambda v: _format_display(v, precision)
        table = self._display_rows(fmt, mark=True)
        means = self.means()
        table.append([MEAN_ROW] + [fmt(means[col]) for col in self.columns])
        out = tabulate(table, headers=[self.index_name] + self.columns, tablefmt="pipe", disable_numparse=True)
        if self.title:
            out = "### {}\n\n{}".format(self.title, out)
        if self.notes:
            out += "\n\n" + "\n".join("* {}: {}".format(row, note) for row, note in self.notes.items())
        return out + "\n"

    def write_markdown(self, path: str, precision: int=4):
        with open(path, "wt") as f:
            f.write(self.to_markdown(precision))


def _format_csv(value: Optional[float]) -> str:
    return "" if value is None else repr(value)


def _parse_csv(cell: str) -> Optional[float]:
    return None if cell == "" else float(cell)


def _format_display(value: Optional[float], precision: int) -> str:
    if value is None:
        return "n/a"
    return "{:.{}f}".format(value, precision)


def print_table(table: ComparisonTable, max_rows: int=MAX_PRINTED_ROWS, precision: int=4):
    """Console table printer"""

    if table.title:
        print("{}{}{}".format(colorama.Fore.LIGHTCYAN_EX, table.title, colorama.Fore.RESET))

    fmt = lambda v: _format_display(v, precision)
    rows = table._display_rows(fmt)
    shown = rows[0:max_rows]
    means = table.means()
    shown.append([MEAN_ROW] + [fmt(means[col]) for col in table.columns])

    print(tabulate(shown, headers=[table.index_name] + table.columns, disable_numparse=True))

    if len(rows) > max_rows:
        print("... {} more rows in the CSV output".format(len(rows) - max_rows))

    for row, note in table.notes.items():
        print("{}{}{}: {}".format(colorama.Fore.YELLOW, row, colorama.Fore.RESET, note))
