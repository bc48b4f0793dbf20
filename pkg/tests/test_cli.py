import json

from coupledforms.cli import main


def write_config(path, data):
    path.write_text(json.dumps(data, indent=1))
    return str(path)


def base_simulate_config(out, **overrides):
    config = {
        "schema_version": 1,
        "seed": 0,
        "output": out,
        "model": {"name": "ephaptic", "pattern": {"kind": "difference", "diffusion": 2.0, "coupling": 0.5}},
        "grid": {"n_cells": 32, "length": 1.0},
        "evolution": {"scheme": "implicit-euler", "dt": 0.01, "t_end": 0.2, "record_every": 2},
        "initial": {"kind": "in_phase", "amplitude": 1.0},
        "projection": {"kind": "averaging"},
    }
    config.update(overrides)
    return config


def read_rows(csv_path):
    lines = csv_path.read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestCertify:
    def test_passing_bundle_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "output": str(out),
                "constants": {"alpha": [[2, -1], [-1, 2]], "embedding_norm": 1.0},
            },
        )
        assert main(["certify", cfg]) == 0
        text = (out / "certify.txt").read_text()
        assert "[ellipticity] PASS alpha=1.0" in text
        assert "angle_rad=0.7853981633974483" in text
        captured = capsys.readouterr()
        assert "[gershgorin] PASS" in captured.out
        records = json.loads((out / "certify.json").read_text())
        assert records["schema_version"] == 1
        assert len(records["entries"]) == 6

    def test_failing_bundle_exit_one(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "output": str(tmp_path / "out"),
                "constants": {"alpha": [[1, -2], [-2, 1]]},
            },
        )
        assert main(["certify", cfg]) == 1
        text = (tmp_path / "out" / "certify.txt").read_text()
        assert "[ellipticity] FAIL" in text

    def test_malformed_file_exit_two(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["certify", str(bad)]) == 2

    def test_missing_schema_version_exit_two(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", {"constants": {"alpha": [[1]]}})
        assert main(["certify", cfg]) == 2

    def test_unknown_criterion_exit_two(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            {"schema_version": 1, "constants": {"alpha": [[1]]}, "criteria": ["nope"]},
        )
        assert main(["certify", cfg]) == 2


class TestSimulate:
    def test_in_phase_strip_column_stays_small(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path / "c.json", base_simulate_config(str(out)))
        assert main(["simulate", cfg, "--quiet"]) == 0
        header, rows = read_rows(out / "trajectory.csv")
        assert header == [
            "t",
            "h_norm",
            "comp_norm_1",
            "comp_norm_2",
            "strip_distance",
            "projection_norm",
            "min_value",
            "sup_norm",
        ]
        strip = [float(r[header.index("strip_distance")]) for r in rows]
        assert max(strip) <= 1e-8

    def test_zero_data_all_zero_columns(self, tmp_path):
        out = tmp_path / "out"
        config = base_simulate_config(str(out), initial={"kind": "zero"})
        cfg = write_config(tmp_path / "c.json", config)
        assert main(["simulate", cfg, "--quiet"]) == 0
        header, rows = read_rows(out / "trajectory.csv")
        for r in rows:
            assert float(r[header.index("h_norm")]) == 0.0
            assert float(r[header.index("sup_norm")]) == 0.0

    def test_missing_projection_gives_empty_fields(self, tmp_path):
        out = tmp_path / "out"
        config = base_simulate_config(str(out))
        del config["projection"]
        config["initial"] = {"kind": "random"}
        cfg = write_config(tmp_path / "c.json", config)
        assert main(["simulate", cfg, "--quiet"]) == 0
        header, rows = read_rows(out / "trajectory.csv")
        idx = header.index("strip_distance")
        assert all(r[idx] == "" and r[idx + 1] == "" for r in rows)

    def test_zero_dt_exit_two(self, tmp_path):
        config = base_simulate_config(str(tmp_path / "out"))
        config["evolution"]["dt"] = 0.0
        cfg = write_config(tmp_path / "c.json", config)
        assert main(["simulate", cfg, "--quiet"]) == 2

    def test_determinism_byte_identical(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        config = base_simulate_config("ignored", initial={"kind": "random"})
        cfg = write_config(tmp_path / "c.json", config)
        assert main(["simulate", cfg, "--quiet", "--out", str(out_a)]) == 0
        assert main(["simulate", cfg, "--quiet", "--out", str(out_b)]) == 0
        assert (out_a / "trajectory.csv").read_bytes() == (out_b / "trajectory.csv").read_bytes()

    def test_seed_flag_changes_random_run(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        config = base_simulate_config("ignored", initial={"kind": "random"})
        cfg = write_config(tmp_path / "c.json", config)
        assert main(["simulate", cfg, "--quiet", "--out", str(out_a), "--seed", "1"]) == 0
        assert main(["simulate", cfg, "--quiet", "--out", str(out_b), "--seed", "2"]) == 0
        assert (out_a / "trajectory.csv").read_bytes() != (out_b / "trajectory.csv").read_bytes()


class TestCheck:
    def test_dynamic_bc_suite(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "seed": 0,
                "output": str(out),
                "model": {"name": "dynamic_bc_heat"},
                "grid": {"n_cells": 32},
                "evolution": {"dt": 0.01, "t_end": 0.2},
                "checks": [
                    {"id": "positivity", "trials": 5},
                    {"id": "domination", "trials": 5},
                    {"id": "linf", "trials": 3},
                ],
            },
        )
        # the sup-norm ball is not invariant, so the run reports a failure
        assert main(["check", cfg, "--quiet"]) == 1
        text = (out / "checks.txt").read_text()
        assert "[positivity] PASS" in text
        assert "[domination] PASS" in text
        assert "[linf] FAIL" in text
        assert "witness_csv: witness_linf.csv" in text
        assert (out / "witness_linf.csv").exists()

    def test_balanced_ephaptic_all_pass(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "seed": 0,
                "output": str(out),
                "model": {
                    "name": "ephaptic",
                    "pattern": {"kind": "difference", "diffusion": 2.0, "coupling": 0.5},
                },
                "grid": {"n_cells": 32},
                "evolution": {"dt": 0.01, "t_end": 0.2},
                "checks": [
                    {"id": "row_sums"},
                    {"id": "subspace_C"},
                    {"id": "strip_runtime", "alpha_levels": [0.1, 1.0], "trials": 2},
                ],
            },
        )
        assert main(["check", cfg, "--quiet"]) == 0
        text = (out / "checks.txt").read_text()
        assert text.count("PASS") == 3

    def test_damped_wave_subspace_not_applicable_exit_zero(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "output": str(out),
                "model": {"name": "damped_wave", "alpha": 1.0},
                "grid": {"n_cells": 16},
                "evolution": {"dt": 0.01, "t_end": 0.1},
                "checks": [{"id": "subspace_C"}],
            },
        )
        assert main(["check", cfg, "--quiet"]) == 0
        assert "[subspace_C] NOT-APPLICABLE" in (out / "checks.txt").read_text()

    def test_damped_wave_parabola_and_mean_zero(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "output": str(out),
                "model": {"name": "damped_wave", "alpha": 1.0},
                "grid": {"n_cells": 16},
                "evolution": {"dt": 0.01, "t_end": 0.1},
                "checks": [
                    {"id": "parabola", "count": 200},
                    {"id": "product_subspace", "subspace": "mean_zero"},
                ],
            },
        )
        assert main(["check", cfg, "--quiet"]) == 0

    def test_sector_check_on_coupled_diffusion(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "output": str(out),
                "model": {"name": "constant_coupled", "coupling": [[2.0, -1.0], [-1.0, 2.0]]},
                "grid": {"n_cells": 16},
                "evolution": {"dt": 0.01, "t_end": 0.1},
                "checks": [{"id": "sector", "count": 300}],
            },
        )
        assert main(["check", cfg, "--quiet"]) == 0
        assert "[sector] PASS" in (out / "checks.txt").read_text()

    def test_invalid_check_model_combination_exit_two(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "output": str(tmp_path / "out"),
                "model": {"name": "damped_wave"},
                "grid": {"n_cells": 8},
                "evolution": {"dt": 0.01, "t_end": 0.1},
                "checks": [{"id": "row_sums"}],
            },
        )
        assert main(["check", cfg, "--quiet"]) == 2

    def test_unknown_check_exit_two(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            {
                "schema_version": 1,
                "output": str(tmp_path / "out"),
                "model": {"name": "dynamic_bc_heat"},
                "grid": {"n_cells": 8},
                "evolution": {"dt": 0.01, "t_end": 0.1},
                "checks": [{"id": "mystery"}],
            },
        )
        assert main(["check", cfg, "--quiet"]) == 2

    def test_exit_code_matches_report_verdicts(self, tmp_path):
        # exit 0 exactly when the written report carries no FAIL line
        for perturb, expected in ((None, 0), ({"i": 0, "j": 0, "delta": 0.6}, 1)):
            out = tmp_path / f"out_{expected}"
            model = {
                "name": "ephaptic",
                "pattern": {"kind": "difference", "diffusion": 2.0, "coupling": 0.5},
            }
            if perturb:
                model["perturb"] = perturb
            cfg = write_config(
                tmp_path / f"c{expected}.json",
                {
                    "schema_version": 1,
                    "output": str(out),
                    "model": model,
                    "grid": {"n_cells": 16},
                    "evolution": {"dt": 0.01, "t_end": 0.1},
                    "checks": [{"id": "row_sums"}, {"id": "subspace_C"}],
                },
            )
            code = main(["check", cfg, "--quiet"])
            assert code == expected
            text = (out / "checks.txt").read_text()
            assert (" FAIL" in text) == (code == 1)
