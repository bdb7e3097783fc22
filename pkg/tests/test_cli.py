import json

import numpy as np
import pytest

from cmcsolve.cli import main
from cmcsolve.fieldio import load_field, save_field

BASE_CONFIG = """
# concentric-ball instance
model = minkowski
omega.kind = ball
omega.center = 0.0, 0.0
omega.radius = 1.0
omega_tilde.kind = ball
omega_tilde.center = 0.0, 0.0
omega_tilde.radius = 0.5
grid.n_rho = 16
grid.n_phi = 32
output.dir = {out}
"""


def _json_tail(out):
    """The report JSON starts at the first brace (solver progress lines may
    precede it on stdout)."""
    return out[out.index("{"):]


def write_config(tmp_path, text=None, **overrides):
    text = BASE_CONFIG if text is None else text
    body = text.format(out=tmp_path / "run")
    for key, value in overrides.items():
        body += f"\n{key} = {value}\n"
    path = tmp_path / "run.cfg"
    path.write_text(body)
    return path


class TestRadialCommand:
    def test_minkowski_constant(self, capsys):
        assert main(["radial", "--n", "2", "--r0", "1", "--t0", "0.5",
                     "--model", "minkowski", "--samples", "5"]) == 0
        out = capsys.readouterr().out
        assert "c = 1.15470054" in out
        assert out.splitlines()[1] == "r,u,du,d2u"

    def test_euclidean_constant(self, capsys):
        assert main(["radial", "--t0", "1", "--model", "euclidean",
                     "--samples", "3"]) == 0
        assert "c = 1.41421356" in capsys.readouterr().out

    def test_precondition_violation_exit_2(self, capsys):
        assert main(["radial", "--t0", "1.2", "--model", "minkowski"]) == 2
        assert "t0" in capsys.readouterr().err

    def test_table_file(self, tmp_path):
        out = tmp_path / "radial.csv"
        assert main(["radial", "--t0", "0.5", "--samples", "11",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 12
        r, u, du, d2u = (float(v) for v in lines[-1].split(","))
        assert r == 1.0
        assert u == pytest.approx(2.0 - np.sqrt(3.0), abs=1e-12)
        assert du == pytest.approx(0.5, abs=1e-12)


class TestSolveCommand:
    def test_concentric_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["solve", "--config", str(cfg)]) == 0
        out_dir = tmp_path / "run"
        for name in ("field.csv", "field.json", "report.json", "summary.json"):
            assert (out_dir / name).exists()
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["converged"] and summary["all_pass"]
        assert abs(summary["c"] - 1.1547005383792517) < 5e-3
        report = json.loads((out_dir / "report.json").read_text())
        assert report["all_pass"]
        out = capsys.readouterr().out
        assert "newton t=- iter=1" in out

    def test_minkowski_image_violation_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, text=BASE_CONFIG.replace(
            "omega_tilde.radius = 0.5", "omega_tilde.radius = 1.01"))
        assert main(["solve", "--config", str(cfg)]) == 2

    def test_unknown_key_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, **{"omega.flavour": "sour"})
        assert main(["solve", "--config", str(cfg)]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_homotopy_config(self, tmp_path):
        text = """
model = minkowski
omega.kind = ellipse
omega.center = 0, 0
omega.semi_axes = 1.0, 0.8
omega_tilde.kind = ball
omega_tilde.center = 0, 0
omega_tilde.radius = 0.4
grid.n_rho = 16
grid.n_phi = 32
homotopy.enabled = true
homotopy.steps = 8
output.dir = {out}
"""
        cfg = write_config(tmp_path, text=text)
        assert main(["solve", "--config", str(cfg)]) == 0
        summary = json.loads((tmp_path / "run" / "summary.json").read_text())
        assert len(summary["steps"]) == 8

    def test_seed_file_strategy(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["solve", "--config", str(cfg)]) == 0
        cfg2 = write_config(tmp_path, **{
            "seed.strategy": "file",
            "seed.path": str(tmp_path / "run" / "field.csv")})
        assert main(["solve", "--config", str(cfg2)]) == 0


class TestVerifyCommand:
    def test_round_trip_determinism(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["solve", "--config", str(cfg)]) == 0
        capsys.readouterr()
        out_dir = tmp_path / "run"
        assert main(["verify", "--field", str(out_dir / "field.csv"),
                     "--config", str(cfg),
                     "--out", str(out_dir / "verify.json")]) == 0
        solved = json.loads((out_dir / "report.json").read_text())
        verified = json.loads((out_dir / "verify.json").read_text())
        for key in ("lambda1", "lambda2", "c", "obliqueness_min",
                    "mass_balance_rel_err", "flux_identity_rel_err"):
            assert verified[key] == pytest.approx(solved[key], abs=1e-12)

    def test_field_u_round_trip_bit_exact(self, tmp_path, radial_32):
        spec, fld, _ = radial_32
        path = tmp_path / "f.csv"
        save_field(fld, path)
        loaded = load_field(path)
        assert np.array_equal(loaded.u, fld.u)
        assert loaded.c == fld.c
        assert loaded.model is fld.model

    def test_corrupted_field_flags(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["solve", "--config", str(cfg)]) == 0
        capsys.readouterr()
        out_dir = tmp_path / "run"
        fld = load_field(out_dir / "field.csv")
        rng = np.random.default_rng(0)
        fld.u = fld.grid.mean_zero(fld.u + 1e-2 * rng.standard_normal(len(fld.u)))
        save_field(fld, out_dir / "bad.csv")
        code = main(["verify", "--field", str(out_dir / "bad.csv"),
                     "--config", str(cfg)])
        assert code == 3
        report = json.loads(_json_tail(capsys.readouterr().out))
        assert not report["all_pass"]

    def test_schema_mismatch_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["solve", "--config", str(cfg)]) == 0
        cfg2 = write_config(tmp_path, text=BASE_CONFIG.replace(
            "grid.n_rho = 16", "grid.n_rho = 24"))
        assert main(["verify", "--field", str(tmp_path / "run" / "field.csv"),
                     "--config", str(cfg2)]) == 2

    def test_dual_verify(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["solve", "--config", str(cfg)]) == 0
        capsys.readouterr()
        code = main(["verify", "--field", str(tmp_path / "run" / "field.csv"),
                     "--config", str(cfg), "--dual"])
        assert code == 0
        report = json.loads(_json_tail(capsys.readouterr().out))
        assert report["dual_consistency"] is not None
        assert report["checks"]["dual_consistency"]["passed"]
