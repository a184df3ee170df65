import io
import json
import subprocess
import sys

import pytest

from cdmaload import __version__, cli
from cdmaload.errors import NumericalError
from cdmaload.table import read_table


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.execute(cli.build_parser().parse_args(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


class TestRangeParsing:
    def test_stop_inclusive(self):
        assert cli.parse_range("0:24:0.5")[-1] == 24.0
        assert len(cli.parse_range("0:24:0.5")) == 49

    @pytest.mark.parametrize("bad", ["1:2", "a:b:c", "5:1:1", "0:1:0"])
    def test_rejects(self, bad):
        with pytest.raises(Exception):
            cli.parse_range(bad)


class TestUsageErrors:
    @pytest.mark.parametrize("argv,flag", [
        (["curve", "--alpha", "0.5", "--snr-db", "10"], "--beta"),
        (["mmse", "--snr-db", "10"], "--alpha"),
        (["mmse", "--alpha", "2", "--snr-db", "10"], "--alpha"),
        (["maxload", "--alpha", "0.5", "--snr-db", "10", "--pe", "1.5"], "--pe"),
        (["simulate", "--K", "4", "--N", "9", "--alpha", "0.5", "--snr-db", "10", "--frames", "10"], "--seed"),
    ])
    def test_missing_or_invalid_flag(self, argv, flag, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == cli.EXIT_USAGE
        assert flag in capsys.readouterr().err

    def test_semantic_validation(self):
        code, text, err = run(["simulate", "--K", "20", "--N", "9", "--alpha", "0.5",
                               "--snr-db", "10", "--frames", "10", "--seed", "1"])
        assert code == cli.EXIT_USAGE and "K must lie" in err
        assert read_table(text).status == "usage"

    def test_bad_grid(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["bounds", "--alpha", "0.5", "--snr-db", "18", "--grid", "0"])
        assert info.value.code == cli.EXIT_USAGE


class TestCommands:
    def test_solve_three_roots(self):
        code, text, _ = run(["solve", "--alpha", "0.5", "--snr-db", "18", "--beta", "10"])
        t = read_table(text)
        assert code == 0 and len(t.rows) == 3
        assert sum(t.column("operational")) == 1
        assert t.column("stability") == ["stable", "unstable", "stable"]

    def test_curve_columns_and_order(self):
        code, text, _ = run(["curve", "--alpha", "0.5", "--beta", "0.4286", "--snr-db-range", "0:24:4"])
        t = read_table(text)
        assert code == 0
        assert t.columns[:4] == ["snr_db", "eta_operational", "n_solutions", "free_energy"]
        assert t.column("snr_db") == [0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0]
        assert t.units["snr_db"] == "dB"

    def test_header_echoes_params(self):
        _, text, _ = run(["curve", "--alpha", "0.5", "--beta", "0.4286", "--snr-db-range", "0:24:4"])
        t = read_table(text)
        assert t.version == __version__
        assert t.params["alpha"] == 0.5 and t.params["snr-db-range"] == "0:24:4"
        assert t.params["grid"] == 4000 and t.params["free-energy-form"] == "stationary"

    def test_spinodal_columns(self):
        code, text, _ = run(["spinodal", "--alpha", "0.5", "--snr-db-range", "12:18:6"])
        t = read_table(text)
        for c in ("snr_db", "beta_transition", "beta_critical", "L_at_eta_m", "U_at_eta_m",
                  "L_at_eta_M", "U_at_eta_M"):
            assert c in t.columns
        below, above = t.rows
        assert below["beta_critical"] is None
        assert above["L_at_eta_M"] < above["beta_critical"] < above["U_at_eta_M"]

    def test_mmse_and_bounds(self):
        code, text, _ = run(["mmse", "--alpha", "0.5", "--snr-db-range", "10:20:5"])
        assert code == 0 and len(read_table(text).rows) == 3
        code, text, _ = run(["bounds", "--alpha", "0.5", "--snr-db", "18", "--grid", "5"])
        rows = read_table(text).rows
        assert code == 0 and len(rows) == 5
        assert all(r["U"] > r["L"] for r in rows)

    def test_guaranteed_and_maxload(self):
        code, text, _ = run(["guaranteed-load", "--alpha", "0.5", "--epsilon", "0.1", "--snr-db", "18"])
        assert code == 0 and read_table(text).rows[0]["beta_guaranteed"] > 0
        code, text, _ = run(["maxload", "--alpha", "0.5", "--pe", "1e-3", "--snr-db", "18"])
        assert code == 0 and read_table(text).rows[0]["limited_by"] == "coexistence"

    def test_simulate(self):
        code, text, _ = run(["simulate", "--K", "3", "--N", "7", "--alpha", "0.5", "--snr-db", "8",
                             "--frames", "200", "--seed", "1"])
        row = read_table(text).rows[0]
        assert code == 0 and row["frames"] == 200 and 0 <= row["ser_io"] <= 1


class TestFormats:
    def test_json_round_trip(self):
        _, text, _ = run(["solve", "--alpha", "0.5", "--snr-db", "18", "--beta", "10", "--format", "json"])
        json.loads(text)
        t = read_table(text)
        assert len(t.rows) == 3 and t.command == "solve"

    def test_csv_and_json_agree(self):
        argv = ["curve", "--alpha", "0.5", "--beta", "2", "--snr-db-range", "10:20:5"]
        a = read_table(run(argv)[1])
        b = read_table(run(argv + ["--format", "json"])[1])
        assert a.rows == b.rows and a.params == b.params

    def test_output_file(self, tmp_path):
        path = tmp_path / "t.csv"
        code, text, _ = run(["mmse", "--alpha", "0.5", "--snr-db", "10", "--output", str(path)])
        assert code == 0 and text == ""
        assert read_table(path.read_text()).rows[0]["s_db"] == 10.0


class TestFailures:
    def test_infeasible(self):
        code, text, err = run(["maxload", "--alpha", "0.5", "--pe", "1e-9", "--snr-db", "16"])
        t = read_table(text)
        assert code == cli.EXIT_INFEASIBLE and t.status == "infeasible"
        assert "#! infeasible:" in text and err

    def test_numerical_failure_flushes_partial_table(self, monkeypatch):
        real = cli.solve
        calls = []

        def flaky(*a, **k):
            calls.append(1)
            if len(calls) == 3:
                raise NumericalError("synthetic root failure")
            return real(*a, **k)

        monkeypatch.setattr(cli, "solve", flaky)
        code, text, err = run(["curve", "--alpha", "0.5", "--beta", "1", "--snr-db-range", "0:20:5"])
        t = read_table(text)
        assert code == cli.EXIT_NUMERICAL and t.status == "failed"
        assert len(t.rows) == 2 and "synthetic root failure" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cdmaload", "mmse", "--alpha", "0.5", "--snr-db", "10"],
                          capture_output=True, text=True, check=True)
    assert read_table(proc.stdout).rows[0]["mmse"] > 0
