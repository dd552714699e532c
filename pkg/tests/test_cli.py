from __future__ import annotations

import json

import numpy as np
import pytest

from actionembed import cli
from actionembed.cli import main
from actionembed.cli import selftest as selftest_mod
from actionembed.cli.problem_file import ProblemFileError, dump_problem, load_problem, problem_from_dict, problem_to_dict
from actionembed.problems import probing_example, zs_example

from conftest import EXAMPLES


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSolve:
    def test_feasible_source(self, capsys):
        code, out, _ = run(capsys, "solve", str(EXAMPLES / "zs_example.json"), "--d1", "0", "--d2", "0.3",
                           "--gamma", "1", "--card", "U=2", "--grid", "10")
        doc = json.loads(out)
        assert code == 0 and doc["feasible"] and doc["kind"] == "source/noncausal"
        assert doc["targets"]["D2"] == 0.3

    def test_infeasible_exit_code(self, capsys):
        code, out, _ = run(capsys, "solve", str(EXAMPLES / "channel.json"), "--r1", "1.5")
        assert code == 2 and json.loads(out)["feasible"] is False

    def test_probing_override(self, capsys):
        code, out, _ = run(capsys, "solve", str(EXAMPLES / "probing.json"), "--r1", "0", "--gamma-x", "0.6")
        assert code == 0 and json.loads(out)["rates"]["sum_rate"] == pytest.approx(0.5, abs=1e-6)

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "solve", str(tmp_path / "nope.json"))
        assert code == 1 and "cannot read" in err

    def test_bad_json(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert run(capsys, "solve", str(p))[0] == 1

    def test_invalid_problem(self, capsys, tmp_path):
        doc = problem_to_dict(zs_example(0.5))
        doc["distortions"]["d1"] = [[0, 1]]
        p = tmp_path / "p.json"
        p.write_text(json.dumps(doc))
        code, _, err = run(capsys, "solve", str(p))
        assert code == 1 and "d1" in err

    def test_bad_card(self, capsys):
        assert run(capsys, "solve", str(EXAMPLES / "zs_example.json"), "--card", "U")[0] == 1

    def test_unknown_command(self, capsys):
        assert run(capsys, "frobnicate")[0] == 1


class TestProblemFile:
    @pytest.mark.parametrize("problem", [zs_example(0.3), zs_example(0.7, "causal"), probing_example(0.5, 1, 0.2)])
    def test_round_trip(self, problem, tmp_path):
        path = tmp_path / "p.json"
        dump_problem(problem, path)
        back = load_problem(path)
        assert problem_to_dict(back) == problem_to_dict(problem)

    def test_channel_round_trip(self, channel_problem):
        again = problem_from_dict(json.loads(dump_problem(channel_problem)))
        np.testing.assert_array_equal(again.transmission_channel.table, channel_problem.transmission_channel.table)

    def test_unknown_kind(self):
        with pytest.raises(ProblemFileError):
            problem_from_dict({"kind": "weather"})

    def test_missing_key_named(self):
        doc = problem_to_dict(zs_example(0.3))
        del doc["maps"]["f"]
        with pytest.raises(ProblemFileError, match="maps.f"):
            problem_from_dict(doc)

    def test_undefined_alphabet(self):
        doc = problem_to_dict(zs_example(0.3))
        doc["reconstructions"]["xhat1"] = "Q"
        with pytest.raises(ProblemFileError, match="Q"):
            problem_from_dict(doc)

    def test_bundled_examples_valid(self):
        for name in ("zs_example.json", "probing.json", "channel.json"):
            load_problem(EXAMPLES / name)


class TestCurve:
    def test_fig11_small_grid(self, capsys, tmp_path):
        out = tmp_path / "c.csv"
        code, _, _ = run(capsys, "curve", "fig11", "--out", str(out), "--grid", "20")
        lines = out.read_text().splitlines()
        assert code == 0 and lines[0] == "gamma_x,r1,sum_rate"
        assert len(lines) == 1 + 3 * 25

    def test_custom_source_sweep(self, capsys):
        code, out, _ = run(capsys, "curve", "custom", "--problem", str(EXAMPLES / "zs_example.json"), "--sweep", "d2",
                           "--values", "0.3,0.2", "--d1", "0", "--gamma", "1", "--card", "U=2", "--grid", "8")
        rows = [line.split(",") for line in out.splitlines()]
        assert code == 0 and rows[0] == ["d2", "rate"]
        assert [r[0] for r in rows[1:]] == ["0.2", "0.3"]
        assert float(rows[2][1]) <= float(rows[1][1]) + 1e-7

    def test_custom_omits_infeasible_rows(self, capsys):
        code, out, _ = run(capsys, "curve", "custom", "--problem", str(EXAMPLES / "channel.json"), "--sweep", "r1",
                           "--values", "0.5,1.5", "--grid", "10")
        assert code == 0 and len(out.splitlines()) == 2

    def test_custom_needs_arguments(self, capsys):
        assert run(capsys, "curve", "custom")[0] == 1

    def test_custom_rejects_wrong_sweep(self, capsys):
        assert run(capsys, "curve", "custom", "--problem", str(EXAMPLES / "probing.json"), "--sweep", "d1",
                   "--values", "0.1")[0] == 1

    def test_deterministic_across_threads(self, capsys):
        args = ["curve", "custom", "--problem", str(EXAMPLES / "probing.json"), "--sweep", "gamma_x",
                "--values", "0.1,0.3", "--grid", "15"]
        a = run(capsys, *args)[1]
        b = run(capsys, *args)[1]
        c = run(capsys, *args, "--threads", "3")[1]
        assert a == b == c

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "4")
        assert cli._default_threads() == 4
        monkeypatch.setenv(cli.THREADS_ENV, "many")
        assert cli._default_threads() == 1

    def test_fmt(self):
        assert cli.fmt(-0.0) == "0" and cli.fmt(0.1234567891234) == "0.123456789"


class TestSelftest:
    def test_quick_passes(self, capsys):
        code, out, _ = run(capsys, "selftest", "--quick")
        assert code == 0 and "10/10 checks passed" in out

    def test_sign_error_detected(self, monkeypatch):
        real = selftest_mod.mutual_information
        monkeypatch.setattr(selftest_mod, "mutual_information", lambda *a, **k: -real(*a, **k))
        results = selftest_mod.run_selftest(checks=[selftest_mod.CHECKS[0]])
        assert not results[0].passed and results[0].name == "kernel identities"
        assert "negative" in results[0].detail

    def test_failure_exit_code(self, capsys, monkeypatch):
        monkeypatch.setattr(selftest_mod, "CHECKS", [("always fails", lambda quick: (False, "boom"))])
        code, out, _ = run(capsys, "selftest")
        assert code == 3 and "FAIL always fails" in out

    def test_crash_is_failure(self):
        def crash(quick):
            raise RuntimeError("kaput")

        r = selftest_mod.run_selftest(checks=[("crash", crash)])[0]
        assert not r.passed and "kaput" in r.detail


class TestExport:
    def test_zs(self, capsys):
        code, out, _ = run(capsys, "export-example", "zs", "--delta", "0.2", "--mode", "strictly_causal")
        doc = json.loads(out)
        assert code == 0 and doc["mode"] == "strictly_causal"
        assert problem_from_dict(doc).side_channel.table[1, 0, 0] == pytest.approx(0.2)

    def test_probing_to_file(self, capsys, tmp_path):
        p = tmp_path / "p.json"
        assert run(capsys, "export-example", "probing", "--gamma-x", "0.3", "--out", str(p))[0] == 0
        assert load_problem(p).gamma_x_budget == 0.3

    def test_bad_delta(self, capsys):
        assert run(capsys, "export-example", "zs", "--delta", "2")[0] == 1
