import csv

import pytest

from main import main
from service.settings import EXIT_CODES


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit):
        main(["bogus-scan"])


def test_bad_config_returns_config_code(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("scan.points = 0\n", encoding="utf-8")
    assert main(["fisher-scan", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CODES["config"]


def test_missing_config_returns_config_code(tmp_path):
    assert main(["fisher-scan", "--config", str(tmp_path / "absent.conf")]) == EXIT_CODES["config"]


@pytest.mark.slow
def test_fisher_scan_writes_artifact(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("scan.dB_min = 0.15\nscan.dB_max = 0.25\nscan.points = 3\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["fisher-scan", "--config", str(path), "--out", str(out)]) == EXIT_CODES["ok"]

    with open(out / "fisher_scan.csv", encoding="utf-8") as handle:
        rows = list(csv.reader(line for line in handle if not line.startswith("#")))
    assert rows[0] == ["B_gauss", "T", "dTdB", "F", "dB", "flags"]
    assert len(rows) == 4
    assert all(row[-1] in ("OK", "SATURATED", "POLE") for row in rows[1:])


def _scan_config(tmp_path, text):
    path = tmp_path / "run.conf"
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.mark.slow
def test_transmission_scan_is_byte_identical_across_runs_and_threads(tmp_path):
    path = _scan_config(tmp_path, "scan.dB_min = 0.05\nscan.dB_max = 0.15\nscan.points = 3\n")
    out = tmp_path / "out"
    artifacts = []
    for threads in ("1", "1", "8"):
        assert main(["transmission-scan", "--config", path, "--out", str(out), "--threads", threads]) == EXIT_CODES["ok"]
        artifacts.append((out / "transmission_scan.csv").read_bytes())
    assert artifacts[0] == artifacts[1] == artifacts[2]


@pytest.mark.slow
def test_missing_cir_returns_numeric_code(tmp_path):
    # s-CIR лежит около B_res - 0.25, в окне [0.15, 0.25] знаменатель знак не меняет
    path = _scan_config(tmp_path, "scan.center = s-cir\nscan.dB_min = 0.15\nscan.dB_max = 0.25\nscan.points = 3\n")
    assert main(["fisher-scan", "--config", path, "--out", str(tmp_path / "out")]) == EXIT_CODES["numeric"]
