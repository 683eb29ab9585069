"""End-to-end tests for the command line dispatcher."""

import json

import pandas as pd
import pytest

from cavity2sat.cli import dispatch, plot_scripts
from cavity2sat.formula import Clause, Formula, emit_dimacs, parse_dimacs, sample_formula
from cavity2sat.manifest import RunManifest, replay, sidecar_path


@pytest.fixture
def single_clause_dimacs(tmp_path, single_clause):
    path = tmp_path / "single.cnf"
    path.write_text(emit_dimacs(single_clause))
    return path


def run(argv, capsys):
    code = dispatch(argv + ["--log-level", "WARNING"])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:

    def test_writes_formula_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "f.cnf"
        code, _, _ = run(["gen", "--n", "50", "--d", "1.0", "--seed", "3", "--out", str(out)], capsys)
        assert code == 0
        assert parse_dimacs(out.read_text()) == sample_formula(50, 1.0, 3)
        manifest = RunManifest.load(sidecar_path(out))
        assert manifest.subcommand == "gen"
        assert manifest.seed == 3
        assert manifest.duration is not None

    def test_json_to_stdout(self, capsys):
        code, stdout, _ = run(["gen", "--n", "10", "--d", "0.5", "--format", "json"], capsys)
        assert code == 0
        assert Formula.from_json(stdout) == sample_formula(10, 0.5, 0)


class TestCounting:

    def test_count_contradiction(self, contradiction_dimacs, capsys):
        code, stdout, _ = run(["count", "--dimacs", str(contradiction_dimacs)], capsys)
        assert code == 0
        assert json.loads(stdout) == {"z": "0", "log_z": 0.0}

    def test_marginals(self, single_clause_dimacs, capsys):
        code, stdout, _ = run(["marginals", "--dimacs", str(single_clause_dimacs)], capsys)
        payload = json.loads(stdout)
        assert code == 0
        assert payload["z"] == "3"
        assert payload["marginals"] == pytest.approx([2 / 3, 2 / 3])

    def test_soft(self, single_clause_dimacs, capsys):
        code, stdout, _ = run(["soft", "--dimacs", str(single_clause_dimacs), "--beta", "0"], capsys)
        assert code == 0
        assert json.loads(stdout)["log_z_beta"] == pytest.approx(2 * 0.6931471805599453)

    def test_component_too_large(self, tmp_path, capsys):
        path = tmp_path / "chain.cnf"
        path.write_text(emit_dimacs(Formula(6, tuple(Clause.of(i, i + 1) for i in range(1, 6)))))
        code, _, stderr = run(["count", "--dimacs", str(path), "--cap", "3"], capsys)
        assert code == 3
        assert "ComponentTooLarge" in stderr

    def test_parse_error(self, tmp_path, capsys):
        path = tmp_path / "bad.cnf"
        path.write_text("p cnf 2 1\n1 2 3 0\n")
        code, _, stderr = run(["count", "--dimacs", str(path)], capsys)
        assert code == 2
        assert "width 3" in stderr

    def test_missing_file(self, tmp_path, capsys):
        code, _, _ = run(["count", "--dimacs", str(tmp_path / "absent.cnf")], capsys)
        assert code == 2


class TestUsage:

    def test_unknown_flag(self, contradiction_dimacs, capsys):
        code, _, stderr = run(["count", "--dimacs", str(contradiction_dimacs), "--frobnicate"], capsys)
        assert code == 2
        assert "frobnicate" in stderr

    def test_unknown_command(self, capsys):
        assert run(["nope"], capsys)[0] == 2

    def test_version(self, capsys):
        assert dispatch(["--version"]) == 0

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, _, _ = run(["de", "--d", "1.0", "--config", str(path)], capsys)
        assert code == 2


class TestAnalysis:

    def test_bp(self, single_clause_dimacs, tmp_path, capsys):
        messages = tmp_path / "messages.csv"
        code, stdout, _ = run(["bp", "--dimacs", str(single_clause_dimacs), "--rounds", "1",
                               "--emit-messages", str(messages)], capsys)
        assert code == 0
        assert json.loads(stdout) == pytest.approx([2 / 3, 2 / 3])
        assert len(pd.read_csv(messages)) == 4

    def test_bethe_out_of_regime(self, capsys):
        code, _, stderr = run(["bethe", "--d", "2.5"], capsys)
        assert code == 4
        assert "OutOfRegime: d must be < 2" in stderr

    def test_bethe_zero_density(self, capsys):
        code, stdout, _ = run(["bethe", "--d", "0", "--pop", "100", "--iters", "1", "--mc", "100"], capsys)
        payload = json.loads(stdout)
        assert code == 0
        assert payload["value"] == pytest.approx(0.6931471805599453)
        assert payload["bound"] == pytest.approx(0.6931471805599453)
        assert payload["beta"] == "inf"

    def test_de_is_thread_independent(self, tmp_path, capsys):
        outputs = []
        for threads in ("1", "3"):
            out = tmp_path / f"de_{threads}.csv"
            code, stdout, _ = run(["de", "--d", "1.0", "--pop", "40000", "--iters", "3",
                                   "--threads", threads, "--seed", "7", "--out", str(out)], capsys)
            assert code == 0
            outputs.append((json.loads(stdout)["eta_mean"], out.read_text()))
        assert outputs[0] == outputs[1]

    def test_cdf(self, capsys):
        code, stdout, _ = run(["cdf", "--densities", "0.5,1.0", "--pop", "1000", "--iters", "2",
                               "--resolution", "10"], capsys)
        assert code == 0
        lines = stdout.strip().splitlines()
        assert lines[0] == "d,x,cdf"
        assert len(lines) == 1 + 2 * 11

    def test_tree(self, capsys):
        code, stdout, _ = run(["tree", "--d", "1.5", "--depth", "3", "--trials", "4"], capsys)
        assert code == 0
        assert stdout.splitlines()[0].startswith("trial,ell,")
        assert len(stdout.strip().splitlines()) == 1 + 12

    def test_ucp(self, single_clause_dimacs, capsys):
        code, stdout, _ = run(["ucp", "--dimacs", str(single_clause_dimacs), "--impose", "1=-1"], capsys)
        assert code == 0
        assert json.loads(stdout) == {"i_chi": 2, "a_chi": 1, "contradiction": False, "closure": [1, 2]}

    def test_ucp_bad_impose(self, single_clause_dimacs, capsys):
        code, _, _ = run(["ucp", "--dimacs", str(single_clause_dimacs), "--impose", "1=0"], capsys)
        assert code == 2


class TestPlot:

    def test_writes_scripts(self, tmp_path, capsys):
        curve_csv = tmp_path / "curve.csv"
        pd.DataFrame({"d": [0.5, 1.0], "bethe": [0.62, 0.55], "bound": [0.62, 0.55]}).to_csv(curve_csv, index=False)
        cdf_csv = tmp_path / "cdf.csv"
        pd.DataFrame({"d": [1.1, 1.1], "x": [0.0, 1.0], "cdf": [0.0, 1.0]}).to_csv(cdf_csv, index=False)
        plots = tmp_path / "plots"
        code, _, _ = run(["plot", "--curve", str(curve_csv), "--cdf", str(cdf_csv), "--out", str(plots)], capsys)
        assert code == 0
        assert "first moment bound" in (plots / "bethe_curve.gp").read_text()
        assert "d = 1.1" in (plots / "cdf_panel.gp").read_text()

    def test_missing_columns(self, tmp_path, capsys):
        curve_csv = tmp_path / "curve.csv"
        pd.DataFrame({"d": [0.5], "other": [1.0]}).to_csv(curve_csv, index=False)
        code, _, stderr = run(["plot", "--curve", str(curve_csv), "--out", str(tmp_path)], capsys)
        assert code == 2
        assert "missing columns" in stderr

    def test_needs_an_input(self):
        with pytest.raises(ValueError):
            plot_scripts(None, None)


class TestManifest:

    def test_replay_reproduces_output(self, tmp_path, capsys):
        out = tmp_path / "f.cnf"
        assert run(["gen", "--n", "40", "--d", "1.2", "--seed", "9", "--out", str(out)], capsys)[0] == 0
        first = out.read_text()
        manifest = RunManifest.load(sidecar_path(out))
        out.unlink()
        assert replay(manifest) == 0
        assert out.read_text() == first
        assert RunManifest.load(sidecar_path(out)).identity() == manifest.identity()

    def test_sidecar_path(self, tmp_path):
        assert sidecar_path(tmp_path / "a.csv").name == "a.csv.manifest.json"
