import json
import os

from isokam.cli import main
from isokam.spectral import VectorFieldSpectrum


def witness_doc(amp=5e-4, k=1):
    return {"dim": 1, "modes": [{"k": [k], "re": [0.0], "im": [-amp / 2]}]}


def write_config(path, **overrides):
    doc = {
        "model": "circle:golden",
        "n": 1,
        "max_freq": 32,
        "grid_factor": 4,
        "target_residual": 1e-9,
        "min_truncation": 8.0,
        "witness": witness_doc(),
    }
    doc.update(overrides)
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return doc


class TestDiophantineCmd:
    def test_dolgopyat_finding_exit_2(self, tmp_path, capsys):
        out = tmp_path / "dol.json"
        rc = main(["diophantine", "--model", "periodic:2,3",
                   "--flavor", "dolgopyat", "--max-sqnorm", "10400",
                   "--out", str(out)])
        assert rc == 2
        text = capsys.readouterr().out
        assert "witness" in text
        doc = json.loads(out.read_text())
        assert doc["failed"]
        big = max(doc["witnesses"], key=lambda k: k[0] ** 2 + k[1] ** 2)
        assert big[0] ** 2 + big[1] ** 2 > 100 ** 2

    def test_box_exit_0_few_eigenvalues(self, tmp_path):
        out = tmp_path / "box.json"
        rc = main(["diophantine", "--model", "periodic:2,3",
                   "--flavor", "box", "--max-sqnorm", "400",
                   "--out", str(out), "--no-plots"])
        assert rc == 0
        doc = json.loads(out.read_text())
        vals = {round(r["min_nonzero"], 9) for r in doc["per_block"]
                if r["sqnorm"] > 0}
        assert len(vals) <= 6

    def test_golden_tau_near_two(self, tmp_path):
        out = tmp_path / "d0.json"
        rc = main(["diophantine", "--model", "circle:golden",
                   "--flavor", "d0", "--max-sqnorm", "10000",
                   "--out", str(out), "--no-plots"])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert 1.6 <= doc["tau"] <= 2.6

    def test_figure_rendered(self, tmp_path):
        out = tmp_path / "scan.json"
        rc = main(["diophantine", "--model", "circle:golden",
                   "--flavor", "d0", "--max-sqnorm", "400",
                   "--out", str(out)])
        assert rc == 0
        assert (tmp_path / "scan.png").exists()

    def test_malformed_model_exit_1(self):
        assert main(["diophantine", "--model", "nonsense:9",
                     "--flavor", "d0"]) == 1


class TestKamCmd:
    def test_witness_run_converges(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        outdir = tmp_path / "run"
        write_config(cfg, mode="analytic", r0=0.5)
        rc = main(["kam", "--config", str(cfg), "--out-dir", str(outdir)])
        assert rc == 0
        lines = (outdir / "steps.csv").read_text().splitlines()
        assert lines[0] == ("m,eps_m,N_m,sup_before,sup_after,sobolev2,tail,"
                            "obstruction,solver_residual,hardy_r_m,wall_ms")
        final = json.loads((outdir / "final.json").read_text())
        assert final["converged"]
        assert final["residual"] < 1e-9
        assert final["theoretical_R_hat"] > 0
        assert (outdir / "decay.png").exists()
        assert (outdir / "diagnostics.png").exists()
        # conjugacy spectrum stored for independent verification
        W = VectorFieldSpectrum.from_json_dict(final["W"])
        assert W.l2_norm() > 0
        assert final["analytic"]["passed"]
        assert (outdir / "analytic.png").exists()

    def test_torus2_model_run(self, tmp_path):
        cfg = tmp_path / "t2.json"
        outdir = tmp_path / "run"
        doc = {"model": "abelian:2:2", "n": 2, "max_freq": 16,
               "grid_factor": 4, "target_residual": 1e-8,
               "min_truncation": 6.0, "scan_sqnorm": 256,
               "witness": {"dim": 2, "modes": [
                   {"k": [1, 0], "re": [0.0, 0.0002],
                    "im": [-0.0004, 0.0]},
                   {"k": [0, 1], "re": [0.0002, 0.0],
                    "im": [0.0, -0.0004]}]}}
        cfg.write_text(json.dumps(doc))
        rc = main(["kam", "--config", str(cfg), "--out-dir", str(outdir),
                   "--no-plots"])
        assert rc == 0
        final = json.loads((outdir / "final.json").read_text())
        assert final["converged"] and final["initial_defect"] < 1e-9
        assert main(["verify", "--run", str(outdir)]) == 0

    def test_zero_perturbation_single_row(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_config(cfg, P0=[{"dim": 1, "modes": []}])
        doc = json.loads(cfg.read_text())
        del doc["witness"]
        cfg.write_text(json.dumps(doc))
        outdir = tmp_path / "run"
        rc = main(["kam", "--config", str(cfg), "--out-dir", str(outdir),
                   "--no-plots"])
        assert rc == 0
        final = json.loads((outdir / "final.json").read_text())
        assert final["converged"] and final["steps"] == 0

    def test_kernel_perturbation_exit_3(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_config(cfg, model="periodic:2", tau=0.0, sigma=1.0,
                     track_defect=False,
                     P0=[{"dim": 1,
                          "modes": [{"k": [2], "re": [0.0],
                                     "im": [-0.0005]}]}])
        doc = json.loads(cfg.read_text())
        del doc["witness"]
        cfg.write_text(json.dumps(doc))
        outdir = tmp_path / "run"
        rc = main(["kam", "--config", str(cfg), "--out-dir", str(outdir),
                   "--no-plots"])
        assert rc == 3

    def test_determinism_of_math_columns(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        write_config(cfg)
        rows = []
        for sub in ("a", "b"):
            outdir = tmp_path / sub
            rc = main(["kam", "--config", str(cfg), "--out-dir",
                       str(outdir), "--no-plots"])
            assert rc == 0
            lines = (outdir / "steps.csv").read_text().splitlines()
            rows.append([",".join(ln.split(",")[:-1]) for ln in lines])
        assert rows[0] == rows[1]

    def test_verify_roundtrip(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        outdir = tmp_path / "run"
        write_config(cfg)
        assert main(["kam", "--config", str(cfg), "--out-dir", str(outdir),
                     "--no-plots"]) == 0
        assert main(["verify", "--run", str(outdir)]) == 0

    def test_verify_detects_tampering(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        outdir = tmp_path / "run"
        write_config(cfg)
        main(["kam", "--config", str(cfg), "--out-dir", str(outdir),
              "--no-plots"])
        final = json.loads((outdir / "final.json").read_text())
        final["W"]["modes"] = [{"k": [1], "re": [0.01], "im": [0.0]}]
        (outdir / "final.json").write_text(json.dumps(final))
        assert main(["verify", "--run", str(outdir)]) == 2

    def test_missing_config_exit_1(self, tmp_path):
        assert main(["kam", "--config", str(tmp_path / "nope.json"),
                     "--out-dir", str(tmp_path / "x")]) == 1


class TestSmallCmds:
    def test_cyclic_order_three(self, capsys):
        assert main(["cyclic", "--order", "3"]) == 0
        out = capsys.readouterr().out
        assert "y = [3]" in out

    def test_cyclic_order_four(self, capsys):
        assert main(["cyclic", "--order", "4"]) == 0
        out = capsys.readouterr().out
        assert "y = [12, -2]" in out
        assert "16 = n^2" in out

    def test_spectrum_periodic(self, capsys, tmp_path):
        out = tmp_path / "spec.json"
        rc = main(["spectrum", "--model", "periodic:2", "--sqnorm", "4",
                   "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        by = {e["which"]: e for e in doc["spectra"]}
        assert by["d0d0*"]["kernel_dim"] == 2       # resonant block
        assert by["d1*d1"]["eigenvalues"] == [4.0, 4.0]
        assert (tmp_path / "spec.png").exists()

    def test_spectrum_empty_block_exit_1(self):
        assert main(["spectrum", "--model", "abelian:2:2",
                     "--sqnorm", "3"]) == 1

    def test_model_periodic(self, capsys):
        assert main(["model", "--model", "periodic:2,3",
                     "--max-sqnorm", "100"]) == 0
        out = capsys.readouterr().out
        assert "Dolgopyat fails" in out

    def test_model_sphere(self, capsys):
        assert main(["model", "--model", "sphere-z:6:golden",
                     "--max-sqnorm", "36"]) == 0


class TestSystemConfig:
    def test_diophantine_from_system_json(self, tmp_path):
        sysdoc = {"generators": 1,
                  "relations": [[1, 1]],
                  "action": {"kind": "torus-translation",
                             "alphas": [["1/2"]]}}
        cfg = tmp_path / "system.json"
        cfg.write_text(json.dumps(sysdoc))
        out = tmp_path / "scan.json"
        rc = main(["diophantine", "--config", str(cfg), "--flavor", "box",
                   "--max-sqnorm", "64", "--out", str(out), "--no-plots"])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["tau"] == 0.0

    def test_sphere_model_scan(self, tmp_path):
        rc = main(["diophantine", "--model", "sphere-z:20:golden",
                   "--flavor", "dolgopyat", "--max-sqnorm", "420",
                   "--no-plots"])
        assert rc == 2  # m = 0 modes are resonant in every band

    def test_kam_with_inline_system(self, tmp_path):
        doc = {
            "generators": 1, "relations": [],
            "action": {"kind": "torus-translation",
                       "alphas": [["golden"]]},
            "sigma": 1.0, "tau": 2.3, "n": 1,
            "max_freq": 32, "grid_factor": 4,
            "target_residual": 1e-9, "min_truncation": 8.0,
            "witness": witness_doc(),
        }
        cfg = tmp_path / "inline.json"
        cfg.write_text(json.dumps(doc))
        outdir = tmp_path / "run"
        rc = main(["kam", "--config", str(cfg), "--out-dir", str(outdir),
                   "--no-plots"])
        assert rc == 0
        assert main(["verify", "--run", str(outdir)]) == 0
