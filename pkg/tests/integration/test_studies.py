"""
End-to-end studies on the bundled demo case.
"""

import json

import pytest

from carbon_atlas.cli import main
from carbon_atlas.intensity import Metric
from carbon_atlas.workflow import ALL_METRICS, run_shifting_study
from tests.conftest import CASES_DIR, DEMO_CONFIG

pytestmark = pytest.mark.integration


def _run_cli(out):
    return main(
        [
            "study",
            "--case",
            "demo2bus",
            "--series",
            str(CASES_DIR / "demo2bus_series.csv"),
            "--dc-buses",
            "2",
            "--dnom",
            "100",
            "--eps",
            "0.2",
            "--horizon",
            "2",
            "--format",
            "json,csv,svg",
            "--out",
            str(out),
        ]
    )


def test_outputs_are_byte_identical_across_runs(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert _run_cli(first) == 0
    assert _run_cli(second) == 0
    names = sorted(path.name for path in first.iterdir())
    assert names == sorted(path.name for path in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_parallel_days_match_serial(demo, demo_series):
    serial = run_shifting_study(demo, demo_series, Metric.LMCE, DEMO_CONFIG, jobs=1)
    parallel = run_shifting_study(demo, demo_series, Metric.LMCE, DEMO_CONFIG, jobs=2)
    assert parallel.digest == serial.digest
    assert [day.true_delta for day in parallel.days] == [day.true_delta for day in serial.days]


def test_cli_study_then_export_plot(tmp_path, capsys):
    assert _run_cli(tmp_path) == 0
    stdout = capsys.readouterr().out
    assert "LMCE shifting: 1 day(s)" in stdout

    cross = (tmp_path / "cross_metric.csv").read_text().splitlines()
    assert cross[0] == "shift_metric," + ",".join(m.value for m in ALL_METRICS)
    assert len(cross) == 1 + len(ALL_METRICS)

    lmce = json.loads((tmp_path / "study_lmce.json").read_text())
    ace = json.loads((tmp_path / "study_ace.json").read_text())
    assert lmce["days"][0]["true_delta"] == pytest.approx(-7.128)
    assert ace["days"][0]["true_delta"] == pytest.approx(7.128)

    (tmp_path / "network.svg").unlink()
    assert main(["export-plot", "--case", "demo2bus", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "network.svg").read_text().count('class="panel"') == len(ALL_METRICS)
