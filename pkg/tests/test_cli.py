import json
from pathlib import Path

import numpy as np
import pytest

from plgrowth import cli
from plgrowth.errors import NonconvergedStep
from plgrowth.ode_engine import SolutionCurve

GOLDEN = Path(__file__).parent / "golden"


def schema(obj):
    """Key structure of a JSON document with leaf types collapsed."""
    if isinstance(obj, dict):
        return {k: schema(v) for k, v in sorted(obj.items())}
    if isinstance(obj, list):
        return [schema(obj[0])] if obj and isinstance(obj[0], (dict, list)) else "list"
    if isinstance(obj, bool):
        return "bool"
    if isinstance(obj, (int, float)) or obj is None:
        return "number"
    return type(obj).__name__


def check_golden(name, doc):
    path = GOLDEN / f"{name}.schema.json"
    got = schema(doc)
    assert got == json.loads(path.read_text())


def write_scenario(tmp_path, **doc):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    return cli.run([str(a) for a in argv])


class TestScenario:
    @pytest.mark.parametrize("name", cli.PRESETS)
    def test_presets_load(self, name):
        doc = cli.load_scenario(name)
        assert doc["nu"] and doc["name"] == name

    def test_preset_override(self, tmp_path):
        doc = cli.load_scenario(write_scenario(tmp_path, name="x", preset="fig2", nu=[2.0]))
        assert doc["nu"] == [2.0] and len(doc["profiles"]) == 5

    def test_empty_nu(self, tmp_path, capsys):
        assert run("solve", "--scenario", write_scenario(tmp_path, name="e", preset="fig2", nu=[]),
                   "--out", tmp_path) == cli.EXIT_CONFIG
        assert "nu" in capsys.readouterr().err

    def test_missing_file_and_preset(self, tmp_path):
        assert run("solve", "--scenario", "nope", "--out", tmp_path) == cli.EXIT_CONFIG

    def test_bad_multiplier(self, tmp_path):
        assert run("solve", "--scenario", "fig2", "--out", tmp_path, "--gamma-multiplier", "-1") == cli.EXIT_CONFIG


class TestSolve:
    def test_fig2_files(self, tmp_path):
        assert run("solve", "--scenario", "fig2", "--out", tmp_path) == cli.EXIT_OK
        for k in ("1", "1.5", "2", "3", "10"):
            for suffix in ("f_nu", "u", "f_nu_R"):
                assert (tmp_path / f"power_k{k}_nu5_{suffix}.csv").exists(), k

    def test_round_trip_is_bit_identical(self, tmp_path):
        assert run("solve", "--scenario", "fig3", "--out", tmp_path) == cli.EXIT_OK
        path = tmp_path / "logpos_nu0.5_f_nu.csv"
        curve = SolutionCurve.from_csv(path)
        again = tmp_path / "again.csv"
        curve.to_csv(again)
        assert path.read_bytes() == again.read_bytes()
        head, cols = cli.read_columns(tmp_path / "logpos_nu0.5_u.csv")
        assert head == ["x", "u", "nu"]
        x = np.array(cols[0], dtype=float)
        assert [cli._fmt(v) for v in x] == cols[0]

    def test_write_columns_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, 50)
        cli.write_columns(tmp_path / "c.csv", ["v"], [vals])
        _, cols = cli.read_columns(tmp_path / "c.csv")
        assert np.array_equal(np.array(cols[0], dtype=float), vals)

    def test_solver_failure_exit_code(self, tmp_path, monkeypatch, capsys):
        def boom(*a, **k):
            raise NonconvergedStep("step size underflow")
        monkeypatch.setattr(cli, "solve", boom)
        assert run("solve", "--scenario", "fig2", "--out", tmp_path) == cli.EXIT_SOLVER
        assert "solve" in capsys.readouterr().err


class TestClassify:
    def test_quadratic_power_is_log(self, tmp_path):
        assert run("classify", "--scenario", "pucci-sublinear", "--out", tmp_path) == cli.EXIT_OK
        doc = json.loads((tmp_path / "pucci-sublinear_classify.json").read_text())
        assert doc[0]["growth_law"]["tag"] == "Log"
        check_golden("classify", doc)

    def test_flat_profile_is_linear(self, tmp_path):
        sc = write_scenario(tmp_path, name="flat", profile={"family": "zero"}, nu=[1.0],
                            geometry={"n": 2})
        assert run("classify", "--scenario", sc, "--out", tmp_path) == cli.EXIT_OK
        doc = json.loads((tmp_path / "flat_classify.json").read_text())
        assert doc[0]["growth_law"]["tag"] == "Linear"

    def test_custom_profile(self, tmp_path):
        sc = write_scenario(tmp_path, name="c", nu=[1.0],
                            profile={"family": "custom", "coefficient": 1.0, "exponent": 2.0, "sign": "nonnegative"})
        assert run("classify", "--scenario", sc, "--out", tmp_path) == cli.EXIT_UNKNOWN_FAMILY

    def test_unknown_family(self, tmp_path):
        sc = write_scenario(tmp_path, name="c", nu=[1.0], profile={"family": "cubic"})
        assert run("solve", "--scenario", sc, "--out", tmp_path) == cli.EXIT_UNKNOWN_FAMILY


class TestVerify:
    def test_px_sharp(self, tmp_path):
        assert run("verify", "--scenario", "px-laplace", "--target", "px-sharp", "--out", tmp_path) == cli.EXIT_OK
        doc = json.loads((tmp_path / "px-laplace_px-sharp.json").read_text())
        assert doc["c"] == 2 and doc["M0"] == 3 and doc["M"] == [1.0]
        assert doc["max_analytic"] == 0.0 and doc["max_fd_residual"] <= 1e-8
        check_golden("px-sharp", doc)

    def test_barrier(self, tmp_path):
        assert run("verify", "--scenario", "pucci-sublinear", "--out", tmp_path) == cli.EXIT_OK
        doc = json.loads((tmp_path / "pucci-sublinear_barrier.json").read_text())
        assert doc["pass"] and doc["min_value"] > 0
        check_golden("certificate", doc)

    def test_barrier_undersized(self, tmp_path):
        sc = write_scenario(tmp_path, name="small", profile={"family": "zero"}, nu=[1.0], R=1.0,
                            geometry={"n": 2, "gamma_factor": 0.25, "kappa": 0.5},
                            sampling={"n_points": 2048})
        assert run("verify", "--scenario", sc, "--out", tmp_path) == cli.EXIT_FAIL
        doc = json.loads((tmp_path / "small_barrier.json").read_text())
        assert doc["margins_summary"]["min"] <= 0 and len(doc["margins_summary"]["argmin"]) == 2
        check_golden("certificate", doc)

    def test_one_d(self, tmp_path):
        sc = write_scenario(tmp_path, name="one", preset="px-laplace", nu=[1.0])
        assert run("verify", "--scenario", sc, "--target", "1d-solution", "--out", tmp_path) == cli.EXIT_OK
        doc = json.loads((tmp_path / "one_1d-solution.json").read_text())
        rep = doc["reports"][0]
        # u = x exactly; what remains is (p - 1) times difference roundoff
        assert doc["pass"] and rep["max_scaled_residual"] <= 1e-7
        assert rep["du_range"] == pytest.approx([1.0, 1.0], abs=1e-12)
        check_golden("1d-solution", doc)

    def test_schema_is_stable(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("verify", "--scenario", "px-laplace", "--target", "1d-solution", "--out", out) == 0
        da = json.loads((a / "px-laplace_1d-solution.json").read_text())
        db = json.loads((b / "px-laplace_1d-solution.json").read_text())
        assert schema(da) == schema(db) and da == db


def _load(path):
    head, cols = cli.read_columns(path)
    return head, np.array(cols, dtype=float)


def _increasing(v, strict=False):
    d = np.diff(v)
    return bool(np.all(d > 0)) if strict else bool(np.all(d >= -1e-12 * np.abs(v[1:])))


class TestFigures:
    def test_fig2(self, tmp_path):
        assert run("figures", "--scenario", "fig2", "--out", tmp_path) == 0
        head, f = _load(tmp_path / "fig2_f.csv")
        assert head == ["x", "k=1", "k=1.5", "k=2", "k=3", "k=10"]
        assert np.all(f[1:, 0] == 5.0)
        for col in f[1:]:
            assert _increasing(-col)
        # while f >= 1 a larger k decays faster; the curves cross below 1
        above = np.all(f[1:] >= 1.0, axis=0)
        assert above.sum() > 1
        assert np.all(np.diff(f[1:, above], axis=0) <= 0)
        _, u = _load(tmp_path / "fig2_u.csv")
        for col in u[1:]:
            assert col[0] == 0 and _increasing(col, strict=True)
        # k < 2 stays below nu^{2-k}/((2-k) A); k >= 2 does not
        assert np.all(u[1] < 5.0) and np.all(u[2] < 2 * np.sqrt(5.0))
        np.testing.assert_allclose(u[3], np.log(5.0 * u[0] + 1.0), rtol=1e-12)
        assert np.all(u[3:, -1] > 2 * np.sqrt(5.0))

    def test_fig3(self, tmp_path):
        assert run("figures", "--scenario", "fig3", "--out", tmp_path) == 0
        for panel in ("logpos_u", "logneg_u"):
            head, u = _load(tmp_path / f"fig3_{panel}.csv")
            assert head[1:] == ["nu=0.25", "nu=0.5", "nu=1", "nu=2", "nu=4"]
            for col in u[1:]:
                assert _increasing(col, strict=True)
            # ordered in nu pointwise
            assert np.all(np.diff(u[1:, 1:], axis=0) > 0)
        for panel in ("logpos_f", "logneg_f"):
            _, f = _load(tmp_path / f"fig3_{panel}.csv")
            assert np.all(np.diff(f[1:], axis=0) > 0)

    def test_fig4(self, tmp_path):
        assert run("figures", "--scenario", "fig4", "--out", tmp_path) == 0
        for panel in ("sista1_u", "sista2_u"):
            _, u = _load(tmp_path / f"fig4_{panel}.csv")
            for col in u[1:]:
                assert _increasing(col, strict=True)
            assert np.all(np.diff(u[1:, 1:], axis=0) > 0)

    def test_needs_figure(self, tmp_path):
        assert run("figures", "--scenario", "pucci-sublinear", "--out", tmp_path) == cli.EXIT_CONFIG


def test_main_exits(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["verify", "--scenario", "px-laplace", "--target", "px-sharp", "--out", str(tmp_path)])
    assert exc.value.code == 0
