"""Unit tests for the CLI module."""

import json
from argparse import Namespace
from unittest.mock import MagicMock, patch

import pytest

from carbon_atlas import cli
from carbon_atlas.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVE, CliConfig, build_parser, main
from carbon_atlas.dcopf import InfeasibleDispatchError
from carbon_atlas.intensity import Metric
from carbon_atlas.workflow import ALL_METRICS
from tests.conftest import CASES_DIR

CONGESTED = str(CASES_DIR / "case3_congested.m")
UNCONGESTED = str(CASES_DIR / "case3_uncongested.m")
DEMO = str(CASES_DIR / "demo2bus.m")
DEMO_SERIES = str(CASES_DIR / "demo2bus_series.csv")


def _study_args(out, *extra):
    return [
        "study",
        "--case",
        DEMO,
        "--series",
        DEMO_SERIES,
        "--dc-buses",
        "2",
        "--dnom",
        "100",
        "--eps",
        "0.2",
        "--horizon",
        "2",
        "--out",
        str(out),
        *extra,
    ]


class TestCliConfig:
    def _namespace(self, **kwargs):
        defaults = {"command": "study", "case": CONGESTED}
        defaults.update(kwargs)
        return Namespace(**defaults)

    def test_defaults(self):
        config = CliConfig.from_args(self._namespace())
        assert config.metrics == ALL_METRICS
        assert config.shift_metrics == ALL_METRICS
        assert config.formats == ("json", "csv")
        assert config.datacenter_buses == ()
        assert config.account_metric is None
        assert config.case.name == "case3_congested.m"

    def test_parses_lists(self):
        config = CliConfig.from_args(
            self._namespace(
                dc_buses="103, 107,204",
                format="json,SVG",
                metric="lace",
                account_metric="almce",
            )
        )
        assert config.datacenter_buses == (103, 107, 204)
        assert config.formats == ("json", "svg")
        assert config.metrics == (Metric.LACE,)
        assert config.account_metric is Metric.ALMCE

    def test_bundled_case_name(self):
        config = CliConfig.from_args(self._namespace(case="demo2bus"))
        assert config.case.name == "demo2bus.m"

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"eps": 1.0}, "--eps"),
            ({"eps": -0.5}, "--eps"),
            ({"jobs": 0}, "--jobs"),
            ({"dc_buses": "2,x"}, "--dc-buses"),
            ({"format": "json,pdf"}, "Unknown output format"),
        ],
    )
    def test_invalid(self, kwargs, message):
        with pytest.raises(ValueError, match=message):
            CliConfig.from_args(self._namespace(**kwargs))

    def test_missing_series(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="Series file not found"):
            CliConfig.from_args(self._namespace(series=str(tmp_path / "none.csv")))

    def test_missing_case(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="Case file not found"):
            CliConfig.from_args(self._namespace(case=str(tmp_path / "none.m")))


class TestParser:
    def test_subcommands(self):
        parser = build_parser()
        args = parser.parse_args(["info", "--case", CONGESTED, "--json"])
        assert args.func is cli.cmd_info
        assert args.json
        args = parser.parse_args(["export-plot", "--out", "somewhere"])
        assert args.case is None
        assert args.func is cli.cmd_export_plot

    def test_usage_error_is_input_error(self, capsys):
        assert main(["study", "--case", CONGESTED, "--horizon", "many"]) == EXIT_INPUT
        assert "invalid int value" in capsys.readouterr().err

    def test_unknown_command(self):
        assert main(["simulate"]) == EXIT_INPUT

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "export-plot" in capsys.readouterr().out


class TestInfoCommand:
    def test_text_output(self, capsys):
        assert main(["info", "--case", CONGESTED]) == EXIT_OK
        out = capsys.readouterr().out
        assert "Buses: 3, lines: 3 (1 limited)" in out
        assert "Dispatch cost: 2700.000 $/h" in out
        assert "gen 1: 90.000" in out
        assert "ALMCE" in out
        assert "0.247800" in out

    def test_json_output(self, capsys):
        assert main(["info", "--case", CONGESTED, "--json", "--metric", "lmce"]) == EXIT_OK
        info = json.loads(capsys.readouterr().out)
        assert info["stats"]["buses"] == 3
        assert info["dispatch"]["2"] == pytest.approx(60.0)
        assert list(info["metrics"]) == ["lmce"]
        assert info["metrics"]["lmce"]["values"]["3"] == pytest.approx(0.2478)

    def test_degenerate_note(self, capsys):
        atlas = MagicMock()
        atlas.get_stats.return_value = {
            "buses": 1,
            "lines": 0,
            "limited_lines": 0,
            "generators": 2,
            "loads": 1,
            "total_load": 100.0,
            "total_cost": 0.0,
            "system_emissions": 60.42,
        }
        atlas.dispatch.degenerate = True
        atlas.dispatch.p_g = {1: 0.0, 2: 100.0}
        atlas.network.bus_ids = (1,)
        atlas.metrics.return_value = {Metric.LMCE: {1: float("nan")}}
        with patch("carbon_atlas.cli.CarbonAtlas", return_value=atlas):
            assert main(["info", "--case", CONGESTED, "--metric", "lmce"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "finite differences" in out
        assert "n/a" in out

    def test_missing_case(self, tmp_path, capsys):
        assert main(["info", "--case", str(tmp_path / "missing.m")]) == EXIT_INPUT
        assert "Case file not found" in capsys.readouterr().err

    def test_case_without_emissions(self, tmp_path, capsys):
        text = (CASES_DIR / "case3_congested.m").read_text()
        case = tmp_path / "no_emissions.m"
        case.write_text(text.split("%% emission intensity")[0])
        assert main(["info", "--case", str(case)]) == EXIT_INPUT
        assert "mpc.emissions" in capsys.readouterr().err

    def test_dispatch_failure(self, capsys):
        with patch(
            "carbon_atlas.cli.CarbonAtlas",
            side_effect=InfeasibleDispatchError("Dispatch is infeasible for 900 MW of load."),
        ):
            assert main(["info", "--case", CONGESTED]) == EXIT_SOLVE
        assert "infeasible" in capsys.readouterr().err


class TestMetricsCommand:
    def test_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "metrics"
        code = main(
            [
                "metrics",
                "--case",
                UNCONGESTED,
                "--series",
                str(CASES_DIR / "case3_constant.csv"),
                "--metric",
                "ace",
                "--format",
                "json,csv,svg",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        assert sorted(path.name for path in out.iterdir()) == [
            "accounting.json",
            "accounting_table.csv",
            "intensity_ace.csv",
            "intensity_table.csv",
            "network_metrics.svg",
        ]
        stdout = capsys.readouterr().out
        assert "Accounted 2 timestep(s); 0 failed." in stdout
        assert "ACE-accounted: 96.060000 tCO2" in stdout

    def test_overwrites_previous_run(self, tmp_path):
        args = ["metrics", "--case", CONGESTED, "--format", "json", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
        assert main(args) == EXIT_OK

    def test_datacenter_buses_added(self, tmp_path):
        args = [
            "metrics",
            "--case",
            CONGESTED,
            "--dc-buses",
            "2",
            "--dnom",
            "20",
            "--format",
            "json",
            "--out",
            str(tmp_path),
        ]
        assert main(args) == EXIT_OK
        document = json.loads((tmp_path / "accounting.json").read_text())
        assert list(document["datacenter_loads"]) == ["2"]

    def test_all_timesteps_fail(self, tmp_path, capsys):
        study = MagicMock()
        study.timesteps = ()
        study.failures = ((1, "infeasible"),)
        with patch("carbon_atlas.cli.run_accounting_study", return_value=study):
            code = main(["metrics", "--case", CONGESTED, "--out", str(tmp_path)])
        assert code == EXIT_SOLVE
        assert "all 1 timestep(s) failed" in capsys.readouterr().err


class TestStudyCommand:
    def test_requires_datacenter_buses(self, tmp_path, capsys):
        code = main(["study", "--case", DEMO, "--out", str(tmp_path)])
        assert code == EXIT_INPUT
        assert "--dc-buses is required" in capsys.readouterr().err

    def test_single_metric(self, tmp_path, capsys):
        code = main(
            _study_args(tmp_path, "--shift-metric", "lmce", "--account-metric", "ace")
        )
        assert code == EXIT_OK
        assert sorted(path.name for path in tmp_path.iterdir()) == [
            "histogram_lmce.csv",
            "plans_lmce.csv",
            "shifting_results_lmce.csv",
            "study_lmce.json",
        ]
        stdout = capsys.readouterr().out
        assert "LMCE shifting: 1 day(s)" in stdout
        assert "shift lmce, account ace:" in stdout

    def test_all_metrics_with_plots(self, tmp_path):
        assert main(_study_args(tmp_path, "--format", "json,csv,svg")) == EXIT_OK
        names = {path.name for path in tmp_path.iterdir()}
        for metric in ALL_METRICS:
            assert f"study_{metric.value}.json" in names
            assert f"histogram_{metric.value}.svg" in names
        assert "cross_metric.csv" in names
        assert "network.svg" in names
        document = json.loads((tmp_path / "study_lmce.json").read_text())
        assert document["days"][0]["true_delta"] == pytest.approx(-7.128)

    def test_horizon_longer_than_series(self, tmp_path, capsys):
        args = _study_args(tmp_path)
        args[args.index("--horizon") + 1] = "24"
        assert main(args) == EXIT_INPUT
        assert "fewer than one" in capsys.readouterr().err

    def test_identity_series(self, tmp_path):
        code = main(
            [
                "study",
                "--case",
                DEMO,
                "--dc-buses",
                "2",
                "--dnom",
                "100",
                "--horizon",
                "2",
                "--shift-metric",
                "ace",
                "--format",
                "json",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        document = json.loads((tmp_path / "study_ace.json").read_text())
        # identical hours leave nothing to gain from shifting
        assert document["days"][0]["true_delta"] == pytest.approx(0.0, abs=1e-6)


class TestExportPlotCommand:
    def test_no_studies(self, tmp_path, capsys):
        assert main(["export-plot", "--out", str(tmp_path)]) == EXIT_INPUT
        assert "No study_<metric>.json" in capsys.readouterr().err

    def test_renders_from_study_json(self, tmp_path, capsys):
        assert main(_study_args(tmp_path, "--shift-metric", "ace", "--format", "json")) == 0
        capsys.readouterr()
        code = main(["export-plot", "--out", str(tmp_path), "--case", DEMO])
        assert code == EXIT_OK
        assert (tmp_path / "histogram_ace.svg").exists()
        network = (tmp_path / "network.svg").read_text()
        assert network.count('class="panel"') == len(ALL_METRICS)

    def test_without_case_skips_network(self, tmp_path, caplog):
        assert main(_study_args(tmp_path, "--shift-metric", "lmce", "--format", "json")) == 0
        assert main(["export-plot", "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "histogram_lmce.svg").exists()
        assert not (tmp_path / "network.svg").exists()
        assert "skipping the network diagram" in caplog.text
