import json

import numpy as np
import pytest

from caustica.cli import main
from caustica.geometry import BoundarySpec, EllipsePose, PerturbationSeries
from caustica.report_io import csv_to_rows


def run(args):
    return main([str(a) for a in args])


class TestSubcommands:
    def test_orbit_csv(self, tmp_path):
        code = run(["--out", tmp_path, "orbit", "--e", 0.2, "--phi", 1.0,
                    "--steps", 20, "--integral"])
        assert code == 0
        rows = csv_to_rows((tmp_path / "orbit.csv").read_text())
        assert len(rows) == 21
        assert list(rows[0]) == ["step", "s", "phi", "x", "y", "I"]
        drift = np.ptp([r["I"] for r in rows])
        assert drift < 1e-10

    def test_orbit_without_integral_blank_column(self, tmp_path):
        run(["--out", tmp_path, "orbit", "--e", 0.2, "--steps", 3])
        rows = csv_to_rows((tmp_path / "orbit.csv").read_text())
        assert all(r["I"] is None for r in rows)

    def test_caustic_json(self, tmp_path):
        assert run(["--out", tmp_path, "caustic", "--e", 0.25, "--q", 4]) == 0
        out = json.loads((tmp_path / "caustic.json").read_text())
        assert 0 < out["Z"] < EllipsePose(0.25).semi_minor ** 2
        assert out["semi_major"] > out["semi_minor"]

    def test_chart_csv(self, tmp_path):
        assert run(["--out", tmp_path, "chart", "--e", 0.2, "--q", 5]) == 0
        rows = csv_to_rows((tmp_path / "chart_q5.csv").read_text())
        assert list(rows[0]) == ["theta", "S", "Phi", "Xq", "Yq", "dXq"]
        assert rows[0]["S"] == pytest.approx(0.0, abs=1e-12)

    def test_qgon_csv(self, tmp_path):
        assert run(["--out", tmp_path, "qgon", "--e", 0.0, "--q", 3,
                    "--s0", 0.0]) == 0
        rows = csv_to_rows((tmp_path / "qgon_q3.csv").read_text())
        assert [r["k"] for r in rows] == [0, 1, 2]
        assert abs(rows[1]["s"] - 1 / 3) < 1e-9

    def test_defect_json(self, tmp_path):
        assert run(["--out", tmp_path, "defect", "--e", 0.1, "--q", 3,
                    "--eps", 1e-3, 3e-4, 1e-4]) == 0
        out = json.loads((tmp_path / "defect.json").read_text())
        assert 1.7 < out["slope"] < 2.3
        assert len(out["defect"]) == 3

    def test_modes_csv(self, tmp_path):
        assert run(["--out", tmp_path, "modes", "--e", 0.0, "--q", 4]) == 0
        rows = csv_to_rows((tmp_path / "modes_q4.csv").read_text())
        assert rows[0]["c_q"] == pytest.approx(1.0, abs=1e-10)

    def test_gram_json(self, tmp_path):
        assert run(["--out", tmp_path, "gram", "--e", 0.0, "--N", 8]) == 0
        out = json.loads((tmp_path / "gram.json").read_text())
        assert out["gap"] < 1e-10

    def test_project_and_fit(self, tmp_path):
        spec = BoundarySpec(EllipsePose(0.1),
                            PerturbationSeries.single_cos(3, 1e-3, degree=8))
        spec_path = tmp_path / "boundary.json"
        spec_path.write_text(json.dumps(spec.to_dict()))

        assert run(["--out", tmp_path, "project", "--input", spec_path]) == 0
        proj = json.loads((tmp_path / "projection.json").read_text())
        assert abs(proj["coefficients"]["a0"]) < 1e-6

        assert run(["--out", tmp_path, "fit", "--input", spec_path]) == 0
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert fit["converged"]
        # the cos(3x) direction is not elliptic: the fit must leave it alone
        assert fit["c1_norm"] > 5e-3


class TestVerify:
    def test_verify_single_experiment(self, tmp_path, capsys):
        code = run(["--out", tmp_path, "verify", "E2"])
        assert code == 0
        assert (tmp_path / "E2.json").exists()
        assert (tmp_path / "E2.csv").exists()
        assert (tmp_path / "E2.svg").exists()
        out = capsys.readouterr().out
        assert "E2: PASS" in out

    def test_verify_with_config_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"q_values": [3, 4], "seed": 5}))
        code = run(["--config", cfg_path, "--out", tmp_path, "--format",
                    "json", "verify", "E2"])
        assert code == 0
        rep = json.loads((tmp_path / "E2.json").read_text())
        assert rep["config"]["q_values"] == [3, 4]
        assert rep["config"]["seed"] == 5
        assert not (tmp_path / "E2.svg").exists()

    def test_failing_tolerance_gives_nonzero_exit(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"tolerances": {"mu": 1e-30}}))
        code = run(["--config", cfg_path, "--out", tmp_path, "verify", "E2"])
        assert code == 1


class TestMoreSurface:
    def test_orbit_from_boundary_file(self, tmp_path):
        spec = BoundarySpec(EllipsePose(0.1),
                            PerturbationSeries.single_cos(2, 5e-4, degree=4))
        spec_path = tmp_path / "b.json"
        spec_path.write_text(json.dumps(spec.to_dict()))
        assert run(["--out", tmp_path, "orbit", "--input", spec_path,
                    "--phi", 0.9, "--steps", 5]) == 0
        rows = csv_to_rows((tmp_path / "orbit.csv").read_text())
        assert len(rows) == 6
        assert all(r["I"] is None for r in rows)

    def test_orbit_integral_rejected_for_perturbed(self, tmp_path):
        spec = BoundarySpec(EllipsePose(0.1),
                            PerturbationSeries.single_cos(2, 5e-4, degree=4))
        spec_path = tmp_path / "b.json"
        spec_path.write_text(json.dumps(spec.to_dict()))
        with pytest.raises(SystemExit):
            run(["--out", tmp_path, "orbit", "--input", spec_path,
                 "--integral"])

    def test_project_about_other_base(self, tmp_path):
        # ellipse written as a graph over a different base: the projection
        # about that base recovers the motion coefficients
        shifted = BoundarySpec(EllipsePose(0.1, center=(2e-4, 0.0)))
        base = BoundarySpec(EllipsePose(0.1))
        in_path = tmp_path / "in.json"
        about_path = tmp_path / "about.json"
        in_path.write_text(json.dumps(shifted.to_dict()))
        about_path.write_text(json.dumps(base.to_dict()))
        assert run(["--out", tmp_path, "project", "--input", in_path,
                    "--about", about_path]) == 0
        proj = json.loads((tmp_path / "projection.json").read_text())
        assert proj["coefficients"]["a1"] == pytest.approx(2e-4, rel=1e-4)

    def test_verify_all_threaded(self, tmp_path, monkeypatch, capsys):
        import caustica.cli as cli_mod
        monkeypatch.setattr(cli_mod, "ALL_EXPERIMENTS", ["E2", "E4"])
        code = run(["--out", tmp_path, "--threads", 2, "--format", "json",
                    "verify-all"])
        # a subset run must trip the operation-coverage gate even though
        # both experiments pass individually
        assert code == 1
        assert "missing" in capsys.readouterr().out
        for exp in ("E2", "E4"):
            rep = json.loads((tmp_path / f"{exp}.json").read_text())
            assert all(rep["pass"].values())
