import csv

import numpy as np
import pytest

from sketchlsh import cli
from sketchlsh.dataio import read_rows, write_fvecs
from sketchlsh.families import SchemeKind
from sketchlsh.theory import p_collision_e2lsh

TIME_FIELDS = {"total_query_time_ms", "build_time_ms", "hash_time_ms", "rank_time_ms"}


class TestParsing:
    def test_range(self):
        assert cli.parse_range("1..20") == list(range(1, 21))
        assert cli.parse_range("8,16,32") == [8, 16, 32]
        assert cli.parse_range("5") == [5]
        for bad in ("0..3", "5..2", "a", "", "1..x"):
            with pytest.raises(cli.UsageError):
                cli.parse_range(bad)

    def test_schemes(self):
        assert cli.parse_schemes("all") == list(SchemeKind)
        assert cli.parse_schemes("e2lsh,hcs-srp") == [SchemeKind.E2LSH, SchemeKind.HCS_SRP]
        with pytest.raises(cli.UsageError):
            cli.parse_schemes("e2lsh,bogus")

    def test_synth(self):
        assert cli.parse_synth("n=5000,d=1024") == (5000, 1024)
        with pytest.raises(cli.UsageError):
            cli.parse_synth("n=5000")


class TestBench:
    def test_row_accounting(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code = cli.main(
            ["bench", "--synth", "n=300,d=64", "--schemes", "e2lsh,cs-e2lsh", "--m", "8", "--k", "5",
             "--L", "1..20", "--seed", "42", "--reps", "2", "--queries", "10", "--out", str(out)]
        )
        assert code == 0
        manifest, rows = read_rows(out)
        assert len(rows) == 2 * 20 * 2
        assert manifest["command"] == "bench" and manifest["flags"]["seed"] == 42
        assert {r["scheme"] for r in rows} == {"e2lsh", "cs-e2lsh"}

    def test_hcs_modes_in_manifest(self, tmp_path):
        out = tmp_path / "h.jsonl"
        code = cli.main(
            ["bench", "--synth", "n=60,d=1000", "--schemes", "hcs-e2lsh", "--order", "3", "--L", "1",
             "--reps", "1", "--k", "3", "--queries", "5", "--format", "jsonl", "--out", str(out)]
        )
        assert code == 0
        manifest, rows = read_rows(out)
        assert manifest["mode_d"] == [10, 10, 10]
        assert rows[0]["order"] == 3

    def test_rerun_identical_except_times(self, tmp_path):
        args = ["bench", "--synth", "n=200,d=32", "--schemes", "cs-srp,hcs-srp", "--L", "1..3", "--reps", "2",
                "--k", "5", "--queries", "8", "--normalize", "--seed", "7"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        ma, ra = read_rows(a)
        mb, rb = read_rows(b)
        ma["flags"].pop("out")
        mb["flags"].pop("out")
        assert ma == mb
        strip = lambda rows: [{k: v for k, v in r.items() if k not in TIME_FIELDS} for r in rows]
        assert strip(ra) == strip(rb)

    def test_data_file(self, tmp_path):
        data = tmp_path / "x.fvecs"
        write_fvecs(data, np.random.default_rng(0).standard_normal((80, 16)))
        assert cli.main(["bench", "--data", str(data), "--schemes", "srp", "--L", "1..2", "--reps", "1",
                         "--k", "3", "--queries", "5"]) == 0

    @pytest.mark.parametrize(
        "argv",
        [
            ["bench", "--synth", "n=100,d=8", "--w", "-1"],
            ["bench", "--synth", "n=100,d=8", "--schemes", "srp", "--metric", "euclidean"],
            ["bench", "--schemes", "srp"],
            ["bench", "--synth", "n=100,d=8", "--data", "x.csv"],
            ["bench", "--synth", "n=100,d=8", "--L", "0..3"],
            ["bench", "--nonsense"],
        ],
    )
    def test_usage_errors(self, argv, capsys):
        assert cli.main(argv) == cli.EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_missing_file_is_io_error(self, tmp_path):
        assert cli.main(["bench", "--data", str(tmp_path / "none.csv"), "--L", "1"]) == cli.EXIT_IO

    def test_malformed_file_is_io_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3\n")
        assert cli.main(["bench", "--data", str(bad), "--L", "1"]) == cli.EXIT_IO


class TestValidate:
    def test_matrix_and_self_rows(self, tmp_path, capsys):
        out = tmp_path / "v.csv"
        code = cli.main(["validate", "--trials", "300", "--d", "200", "--plans", "100", "--out", str(out)])
        text = capsys.readouterr().out
        assert code in (cli.EXIT_OK, cli.EXIT_VALIDATION)
        _, rows = read_rows(out)
        collision = [r for r in rows if r["check"] == "collision"]
        assert len(collision) == 3 * 3 + 3 * 4
        selfs = [r for r in rows if r["check"] == "self"]
        assert len(selfs) == 6 and all(float(r["empirical"]) == 1.0 and r["passed"] == "True" for r in selfs)
        assert {r["check"] for r in rows} == {"collision", "self", "product", "variance", "correlation"}
        assert "three_sigma" in rows[0]
        assert "checks passed" in text

    def test_srp_theory_value(self):
        rows = cli.validation_report(
            [SchemeKind.SRP], d=500, trials=200, seed=0, w=4.0, order=2, plans=100, sketch_m=4,
            product_m=4, diagnostics=False,
        )
        theta3 = [r for r in rows if r["geometry"].startswith("theta=1.0471")]
        assert theta3[0]["theory"] == pytest.approx(2 / 3)

    def test_failure_exit_code(self, monkeypatch):
        monkeypatch.setattr(cli, "COSINE_TOL", -1.0)
        code = cli.main(["validate", "--schemes", "srp", "--trials", "50", "--d", "50", "--skip-diagnostics"])
        assert code == cli.EXIT_VALIDATION


class TestScaling:
    def test_space_columns(self, tmp_path):
        out = tmp_path / "s.csv"
        assert cli.main(["scaling", "--no-timing", "--out", str(out)]) == 0
        _, rows = read_rows(out)
        e2 = {int(r["m"]): int(r["stored_values"]) for r in rows if r["scheme"] == "e2lsh"}
        assert e2 == {m: m * 10_000 + m for m in (8, 16, 32, 64)}
        srp = {int(r["m"]): int(r["stored_values"]) for r in rows if r["scheme"] == "srp"}
        assert srp == {m: m * 10_000 for m in (8, 16, 32, 64)}
        for order in ("2", "3"):
            hcs = {int(r["stored_values"]) for r in rows if r["scheme"] == "hcs-srp" and r["order"] == order}
            assert len(hcs) == 1
        keys = {(r["scheme"], r["order"], r["m"]) for r in rows}
        assert len(keys) == len(rows) == (4 * 4) + (2 * 2 * 4)

    def test_timing_column(self, tmp_path):
        out = tmp_path / "t.csv"
        assert cli.main(["scaling", "--schemes", "cs-srp", "--d", "500", "--m", "8", "--reps", "10",
                         "--out", str(out)]) == 0
        with open(out) as fh:
            body = [line for line in fh if not line.startswith("#")]
        rows = list(csv.DictReader(body))
        assert float(rows[0]["time_per_hash_us"]) > 0


class TestInfo:
    def test_sensitivity_line(self, capsys):
        assert cli.main(["info", "--scheme", "e2lsh", "--m", "8", "--R1", "1", "--R2", "2"]) == 0
        text = capsys.readouterr().out
        expected = f"P1^m={p_collision_e2lsh(1, 4) ** 8:.6g} P2^m={p_collision_e2lsh(2, 4) ** 8:.6g}"
        assert expected in text

    def test_cs_warning(self, capsys):
        cli.main(["info", "--scheme", "cs-srp", "--d", "10000", "--m", "4"])
        assert "warning" in capsys.readouterr().out  # 4 >= 10000^(1/8) = 3.16
        cli.main(["info", "--scheme", "cs-srp", "--d", "10000", "--m", "3"])
        assert "warning" not in capsys.readouterr().out

    def test_hcs_warning_at_order_two(self):
        assert cli.validity_warnings(SchemeKind.HCS_SRP, 10_000, 8, 2)

    def test_stable_output(self, capsys):
        argv = ["info", "--scheme", "hcs-srp", "--order", "3", "--d", "1000"]
        cli.main(argv)
        first = capsys.readouterr().out
        cli.main(argv)
        assert capsys.readouterr().out == first
        assert "mode_d: [10, 10, 10]" in first

    def test_bad_geometry(self):
        assert cli.main(["info", "--R1", "2", "--R2", "1"]) == cli.EXIT_USAGE


def test_version(capsys):
    assert cli.main(["--version"]) == 0
    assert "sketchlsh" in capsys.readouterr().out


def test_threads_env(monkeypatch):
    monkeypatch.setenv("SKETCHLSH_THREADS", "abc")
    assert cli.main(["info"]) == cli.EXIT_USAGE
    monkeypatch.setenv("SKETCHLSH_THREADS", "1")
    assert cli.main(["info"]) == 0
