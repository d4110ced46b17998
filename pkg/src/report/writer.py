import csv
import json
import math
import os
from typing import Any, Iterable, List, Sequence

from service.errors import ToolkitError
from service.logger import logger
from service.settings import CSV_FLOAT_FORMAT, TOOLKIT_VERSION


def format_cell(value: Any) -> str:
    """Числа в полной точности, флаги через |."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, CSV_FLOAT_FORMAT)
    if isinstance(value, (frozenset, set)):
        return "|".join(sorted(str(item) for item in value))
    if isinstance(value, (tuple, list)):
        return "|".join(str(item) for item in value)
    if hasattr(value, "item"):
        return format_cell(value.item())
    return str(value)


def _json_cell(value: Any) -> Any:
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return format_cell(value)
    if isinstance(value, (tuple, list, frozenset, set)):
        return format_cell(value)
    return value


class ArtifactWriter:
    """
    Пишет артефакты команды в out_dir: CSV (или JSON) с заголовком-провенансом
    и, по желанию, скрипт gnuplot рядом с CSV.
    """

    def __init__(self, out_dir: str, command: str, config_lines: Sequence[str], fmt: str = "csv", gnuplot: bool = False):
        self.out_dir = out_dir
        self.command = command
        self.config_lines = list(config_lines)
        self.fmt = fmt
        self.gnuplot = gnuplot
        self.written: List[str] = []

    def header_lines(self) -> List[str]:
        lines = [f"toolkit_version = {TOOLKIT_VERSION}", f"command = {self.command}"]
        return lines + self.config_lines

    def emit(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        try:
            os.makedirs(self.out_dir, exist_ok=True)
            if self.fmt == "json":
                path = self._write_json(name, columns, rows)
            else:
                path = self._write_csv(name, columns, rows)
                if self.gnuplot:
                    self.written.append(self._write_gnuplot(name, columns))
        except OSError as error:
            logger.error(f"Ошибка при записи артефакта {name}: {error}")
            raise ToolkitError(f"Не удалось записать {name}: {error}")
        self.written.append(path)
        logger.info(f"Артефакт записан: {path}")
        return path

    def _write_csv(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        path = os.path.join(self.out_dir, f"{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as handle:
            for line in self.header_lines():
                handle.write(f"# {line}\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_cell(value) for value in row])
        return path

    def _write_json(self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        path = os.path.join(self.out_dir, f"{name}.json")
        payload = {
            "toolkit_version": TOOLKIT_VERSION,
            "command": self.command,
            "config": self.config_lines,
            "columns": list(columns),
            "rows": [[_json_cell(value) for value in row] for row in rows],
        }
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(payload, handle, ensure_ascii=False, indent=2)
            handle.write("\n")
        return path

    def _write_gnuplot(self, name: str, columns: Sequence[str]) -> str:
        path = os.path.join(self.out_dir, f"{name}.gp")
        plots = ", ".join(
            f"'{name}.csv' using 1:{index} with lines title '{column}'"
            for index, column in enumerate(columns[1:], start=2)
            if column != "flags"
        )
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("set datafile separator ','\n")
            handle.write("set datafile commentschars '#'\n")
            handle.write(f"set key autotitle columnhead\nset xlabel '{columns[0]}'\n")
            handle.write(f"plot {plots}\n")
        return path


def read_header(path: str) -> List[str]:
    """Строки заголовка артефакта вместе с префиксом "#"."""
    lines = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            lines.append(line.rstrip("\n"))
    return lines
