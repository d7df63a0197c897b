"""Command-line dispatch, file formats and run manifests."""

import csv
import io
import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import trapezoid

from sojourn_fields.covariance import GaussianExp
from sojourn_fields.cli import PROFILES, RunManifest, build_parser, main, parse_config
from sojourn_fields.experiments import ConfigError, config_hash
from sojourn_fields.fieldio import HEADER, MAGIC, load_field, read_binary, read_csv, save_field
from sojourn_fields.field_sim import centered_grid, simulate_vector_field
from sojourn_fields.special import c2, fisher_tail, student_cdf, student_hermite_c1

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"
SUBCOMMANDS = ["simulate", "derive", "excursion", "experiment", "constants", "geometry", "hermite", "stats"]
SMOKE = {
    "covariance": {"family": "gaussian"},
    "field": {"kind": "fisher", "m": 1, "n": 2},
    "theorem": "Th3",
    "radii": [4, 8],
    "spacing": 0.5,
    "master_seed": 5,
}


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def smoke_config(tmp_path):
    p = tmp_path / "smoke.cfg"
    p.write_text(json.dumps(SMOKE), encoding="utf-8")
    return p


class TestParser:
    """Help text, usage errors and exit codes."""

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["--help"])
        assert info.value.code == 0
        text = capsys.readouterr().out
        for name in SUBCOMMANDS:
            assert name in text

    def test_invalid_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["constants", "c2", "--bogus"])
        assert info.value.code == 1
        assert "usage:" in capsys.readouterr().err

    def test_missing_subcommand(self, capsys):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 1

    @pytest.mark.skipif(shutil.which("sojourn") is None, reason="console script not installed")
    def test_console_script(self):
        res = subprocess.run(["sojourn", "--help"], capture_output=True, text=True, check=False)
        assert res.returncode == 0
        assert "experiment" in res.stdout

    def test_module_invocation(self):
        res = subprocess.run([sys.executable, "-m", "sojourn_fields.cli", "constants", "c2"], capture_output=True, text=True)
        assert res.returncode == 0
        assert "c2" in res.stdout


class TestParseConfig:
    """Configuration files."""

    def test_minimal(self, tmp_path):
        p = tmp_path / "min.cfg"
        p.write_text(json.dumps({"covariance": "gaussian", "field": {"kind": "fisher", "n": 2}, "theorem": "Th3"}))
        cfg = parse_config(p)
        assert cfg.replications == 1000 and cfg.field.m == 1

    def test_th7_gaussian(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text(json.dumps(dict(SMOKE, theorem="Th7")))
        with pytest.raises(ConfigError) as info:
            parse_config(p)
        assert "Th7 requires long-range α ∈ (0, d/2)" in info.value.errors

    def test_unknown_key(self, tmp_path):
        raw = dict(SMOKE)
        raw["covarince"] = raw.pop("covariance")
        p = tmp_path / "typo.cfg"
        p.write_text(json.dumps(raw))
        with pytest.raises(ConfigError) as info:
            parse_config(p)
        assert any("'covarince'" in e and "'covariance'" in e for e in info.value.errors)

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.cfg")), ids=lambda p: p.name)
    def test_shipped_configs(self, path):
        assert parse_config(path).replications >= 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.cfg")

    def test_not_json(self, tmp_path):
        p = tmp_path / "broken.cfg"
        p.write_text("{covariance: ")
        with pytest.raises(ConfigError, match="JSON"):
            parse_config(p)

    def test_validation_exit_code(self, capsys, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text(json.dumps(dict(SMOKE, theorem="Th7")))
        code, _, err = run_cli(capsys, "experiment", "--config", str(p), "--out", str(tmp_path / "o"))
        assert code == 1
        assert "Th7 requires long-range" in err


class TestExperimentCommand:
    """End-to-end runs with manifests."""

    def test_smoke_profile(self, capsys, smoke_config, tmp_path):
        out = tmp_path / "run"
        code, _, err = run_cli(capsys, "experiment", "--config", str(smoke_config), "--out", str(out), "--profile", "smoke", "--workers", "1")
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "qq.csv", "records.csv", "summary.csv"]
        assert len(read_rows(out / "records.csv")) == 2 * PROFILES["smoke"]
        effective = json.loads(err.strip().splitlines()[0])["effective_config"]
        assert effective["replications"] == 100

    def test_manifest_contents(self, capsys, smoke_config, tmp_path):
        out = tmp_path / "run"
        run_cli(capsys, "experiment", "--config", str(smoke_config), "--out", str(out), "--profile", "smoke", "--workers", "1")
        man = json.loads((out / "manifest.json").read_text())
        for key in ("tool_version", "config_hash", "master_seed", "started", "finished", "timings"):
            assert key in man
        assert man["config_hash"] == config_hash(man["config"])
        assert man["master_seed"] == 5
        assert {"simulate", "derive", "measure", "normalize", "write"} <= set(man["timings"])

    def test_manifest_rerun(self, capsys, smoke_config, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        run_cli(capsys, "experiment", "--config", str(smoke_config), "--out", str(first), "--profile", "smoke", "--workers", "1")
        code, _, _ = run_cli(capsys, "experiment", "--config", str(first / "manifest.json"), "--out", str(second), "--workers", "2")
        assert code == 0
        for name in ("records.csv", "summary.csv", "qq.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_seed_override(self, capsys, smoke_config, tmp_path):
        run_cli(capsys, "experiment", "--config", str(smoke_config), "--out", str(tmp_path / "s"), "--seed", "99", "--profile", "smoke", "--workers", "1")
        assert json.loads((tmp_path / "s" / "manifest.json").read_text())["master_seed"] == 99

    def test_stats_qq(self, capsys, smoke_config, tmp_path):
        out = tmp_path / "run"
        run_cli(capsys, "experiment", "--config", str(smoke_config), "--out", str(out), "--profile", "smoke", "--workers", "1")
        code, _, _ = run_cli(capsys, "stats", "qq", "--in", str(out / "records.csv"), "--out", str(tmp_path / "qq.csv"))
        assert code == 0
        assert (tmp_path / "qq.csv").read_bytes() == (out / "qq.csv").read_bytes()

    def test_stats_requires_statistic(self, capsys, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("a,b\n1,2\n")
        code, _, err = run_cli(capsys, "stats", "qq", "--in", str(p))
        assert code == 1 and "statistic" in err


class TestFieldPipeline:
    """simulate, derive and excursion on files."""

    @pytest.mark.parametrize("suffix", [".bin", ".csv"])
    def test_simulate_roundtrip(self, capsys, tmp_path, suffix):
        path = tmp_path / f"field{suffix}"
        code, _, _ = run_cli(
            capsys, "simulate", "--covariance", "gaussian", "--p", "3", "--half-width", "2", "--spacing", "0.5", "--seed", "4", "--out", str(path)
        )
        assert code == 0
        v = load_field(path)
        ref = simulate_vector_field(GaussianExp(), 3, centered_grid(2, 2.0, 0.5), 4)
        assert v.grid.shape == ref.grid.shape and v.p == 3
        np.testing.assert_array_equal(v.stacked(), ref.stacked())

    def test_binary_header(self, capsys, tmp_path):
        path = tmp_path / "f.bin"
        run_cli(capsys, "simulate", "--covariance", "gaussian", "--p", "2", "--half-width", "2", "--spacing", "0.5", "--seed", "1", "--out", str(path))
        raw = path.read_bytes()
        magic, d, n0, n1, p, spacing = HEADER.unpack(raw[: HEADER.size])
        assert magic == MAGIC and (d, n0, n1, p, spacing) == (2, 8, 8, 2, 0.5)
        assert len(raw) == HEADER.size + 8 * p * n0 * n1

    def test_binary_csv_agree(self, tmp_path):
        v = simulate_vector_field(GaussianExp(), 2, centered_grid(2, 1.5, 0.5), 8)
        save_field(v, tmp_path / "a.bin")
        save_field(v, tmp_path / "a.csv")
        np.testing.assert_array_equal(read_binary(tmp_path / "a.bin").stacked(), read_csv(tmp_path / "a.csv").stacked())

    def test_embedding_failure_exit_code(self, capsys, tmp_path):
        # long-range Cauchy on an 8x8 grid cannot be embedded at the default tolerance
        args = ["simulate", "--p", "1", "--half-width", "2", "--spacing", "0.5", "--seed", "1"]
        code, _, err = run_cli(capsys, *args, "--out", str(tmp_path / "a.bin"))
        assert code == 2 and "EmbeddingError" in err
        code, _, _ = run_cli(capsys, *args, "--clip-tol", "1e-3", "--out", str(tmp_path / "b.bin"))
        assert code == 0 and (tmp_path / "b.bin").exists()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"x" * 64)
        with pytest.raises(ValueError, match="magic"):
            read_binary(p)

    def test_derive_and_excursion(self, capsys, tmp_path):
        field = tmp_path / "v.bin"
        run_cli(capsys, "simulate", "--covariance", "gaussian", "--p", "3", "--half-width", "8", "--spacing", "0.5", "--seed", "2", "--out", str(field))
        fisher = tmp_path / "f.bin"
        assert run_cli(capsys, "derive", "--in", str(field), "--kind", "fisher", "--m", "1", "--n", "2", "--out", str(fisher))[0] == 0
        table = tmp_path / "areas.csv"
        code, _, _ = run_cli(
            capsys, "excursion", "--in", str(fisher), "--level", "1", "--r", "2", "4", "--theorem", "Th3", "--covariance", "gaussian", "--out", str(table)
        )
        assert code == 0
        rows = read_rows(table)
        assert [float(r["r"]) for r in rows] == [2.0, 4.0]
        for row in rows:
            r, area = float(row["r"]), float(row["area"])
            expected = (area - math.pi * r * r * fisher_tail(1.0, 1, 2)) / r
            assert float(row["statistic"]) == pytest.approx(expected, rel=1e-12)
            assert row["theorem_tag"] == "Th3"

    def test_excursion_needs_scalar(self, capsys, tmp_path):
        field = tmp_path / "v.bin"
        run_cli(capsys, "simulate", "--covariance", "gaussian", "--p", "2", "--half-width", "2", "--spacing", "0.5", "--seed", "2", "--out", str(field))
        code, _, err = run_cli(capsys, "excursion", "--in", str(field), "--level", "1", "--r", "1")
        assert code == 1 and "scalar" in err


class TestNumericCommands:
    """constants, geometry and hermite tables."""

    def test_c2(self, capsys):
        code, out, _ = run_cli(capsys, "constants", "c2", "--d", "2", "--alpha", "0.5")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and float(rows[0]["value"]) == c2(2, 0.5)

    def test_cdf_rows(self, capsys):
        _, out, _ = run_cli(capsys, "constants", "cdf", "--a", "1.5", "--n", "3")
        rows = {r["name"]: float(r["value"]) for r in csv.DictReader(io.StringIO(out))}
        assert rows["student_cdf"] == student_cdf(1.5, 3)
        assert rows["fisher_cdf"] + rows["fisher_tail"] == pytest.approx(1.0, abs=1e-12)

    def test_geometry_psi(self, capsys, tmp_path):
        out = tmp_path / "psi.csv"
        run_cli(capsys, "geometry", "psi", "--r", "1", "--points", "41", "--out", str(out))
        rows = read_rows(out)
        rho = np.array([float(r["rho"]) for r in rows])
        psi = np.array([float(r["psi"]) for r in rows])
        assert len(rows) == 41 and rho[-1] == 2.0
        assert trapezoid(psi, rho) == pytest.approx(1.0, abs=5e-3)

    def test_geometry_c1_alpha_one(self, capsys):
        _, out, _ = run_cli(capsys, "geometry", "c1", "--kappa", "1", "--alpha", "1")
        row = next(csv.DictReader(io.StringIO(out)))
        # mean inverse distance in the unit disk is 16 / (3 pi)
        assert float(row["c1"]) == pytest.approx(16 / (3 * math.pi), rel=1e-8)

    def test_hermite_rank(self, capsys):
        _, out, _ = run_cli(capsys, "hermite", "rank", "--field", "fisher", "--samples", "200000", "--seed", "3")
        row = next(csv.DictReader(io.StringIO(out)))
        assert row["kappa"] == "2" and row["inconclusive"] == "0"

    def test_hermite_coeffs(self, capsys):
        _, out, _ = run_cli(capsys, "hermite", "coeffs", "--field", "student", "--order", "1", "--samples", "100000")
        rows = {r["nu"]: (float(r["estimate"]), float(r["stderr"])) for r in csv.DictReader(io.StringIO(out))}
        assert sorted(rows) == ["(0,0,0)", "(0,0,1)", "(0,1,0)", "(1,0,0)"]
        # centered indicator: only the numerator direction carries a linear term
        for nu in ("(0,0,0)", "(0,0,1)", "(0,1,0)"):
            assert abs(rows[nu][0]) < 4 * rows[nu][1]
        est, se = rows["(1,0,0)"]
        assert est == pytest.approx(student_hermite_c1(1.0, 2), abs=4 * se)


class TestRunManifest:
    """Manifest serialization."""

    def test_write_sorted(self, tmp_path):
        m = RunManifest("0", "h", 1, "s", "f", {"b": 1.0, "a": 2.0}, {"z": 1, "y": 2})
        m.write(tmp_path / "m.json")
        text = (tmp_path / "m.json").read_text()
        assert json.loads(text)["config"] == {"y": 2, "z": 1}
        assert text.index('"a"') < text.index('"b"')
