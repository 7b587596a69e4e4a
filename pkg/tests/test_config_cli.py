import csv
import hashlib
import json
import math
from pathlib import Path

import pytest

from hemodelay import (
    NumericalError,
    char_coeffs,
    default_params,
    linearize,
    positive_equilibrium,
)
from hemodelay.cli import main
from hemodelay.config import (
    ConfigError,
    RunOptions,
    default_config_path,
    parse_config,
)

import checks

BASE_CFG = default_config_path().read_text()

EQ_HEADER = ["tau", "Q_trivial", "M_trivial", "E_trivial",
             "Q_positive", "M_positive", "E_positive"]
COEFF_HEADER = ["tau", "A", "B", "C", "D", "G", "H",
                "a1", "a2", "a3", "a4", "a5", "a6", "b1", "b2", "b3"]
REQUIRED_KEYS = [
    "model.delta", "model.gamma", "model.mu", "model.k",
    "rates.hill.beta0", "rates.hill.G", "rates.hill.a",
    "rates.hill.K", "rates.hill.r",
]


def write_cfg(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "test.cfg"
    path.write_text(text)
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestParseConfig:
    def test_default_file_exists(self):
        assert default_config_path().is_file()

    def test_default_file_values(self):
        params, opts = parse_config(default_config_path())
        assert params.delta == 0.01
        assert params.gamma == 0.2
        assert params.mu == 0.02
        assert params.k == 2.8
        assert params.tau == 0.0
        r = params.rates
        assert (r.beta0, r.G, r.a, r.K, r.r) == (0.5, 0.04, 6570.0, 0.0382, 7.0)
        assert opts == RunOptions()

    def test_run_section(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG + (
            "\n[run]\ntau = 1.4\nt_end = 500\ntransient = 50\nmax_step = 0.02\n"
            "history = equilibrium*1.2\ngrid_step = 0.01\nn_max = 2\nseed = 7\n"
        ))
        params, opts = parse_config(cfg)
        assert params.tau == 1.4
        assert opts == RunOptions(tau=1.4, t_end=500.0, transient=50.0,
                                  max_step=0.02, history="equilibrium*1.2",
                                  grid_step=0.01, n_max=2, seed=7)

    def test_comments_and_blank_lines(self, tmp_path):
        noisy = "# leading comment\n; alt comment\n\n" + BASE_CFG
        params, _ = parse_config(write_cfg(tmp_path, noisy))
        assert params.delta == 0.01

    def test_empty_file_lists_required_keys(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            parse_config(write_cfg(tmp_path, ""))
        msg = str(exc.value)
        assert "missing required keys" in msg
        for key in REQUIRED_KEYS:
            assert key in msg

    def test_unknown_key_names_line(self, tmp_path):
        with pytest.raises(ConfigError, match=r"line 2: unknown key model\.zz"):
            parse_config(write_cfg(tmp_path, "[model]\nzz = 1\n"))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match=r"line 1: unknown section \[foo\]"):
            parse_config(write_cfg(tmp_path, "[foo]\n"))

    def test_malformed_section_header(self, tmp_path):
        with pytest.raises(ConfigError, match="malformed section header"):
            parse_config(write_cfg(tmp_path, "[model\n"))

    def test_key_outside_section(self, tmp_path):
        with pytest.raises(ConfigError, match="outside any section"):
            parse_config(write_cfg(tmp_path, "delta = 1\n"))

    def test_missing_equals(self, tmp_path):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config(write_cfg(tmp_path, "[model]\ndelta 1\n"))

    def test_duplicate_key_cites_both_lines(self, tmp_path):
        text = BASE_CFG + "\n[model]\ndelta = 0.5\n"
        dup_line = len(text.splitlines())
        first_line = next(
            i for i, l in enumerate(BASE_CFG.splitlines(), 1)
            if l.strip().startswith("delta")
        )
        with pytest.raises(ConfigError) as exc:
            parse_config(write_cfg(tmp_path, text))
        msg = str(exc.value)
        assert f"line {dup_line}: duplicate key model.delta" in msg
        assert f"first at line {first_line}" in msg

    def test_bad_number_names_key_and_line(self, tmp_path):
        with pytest.raises(ConfigError, match=r"model\.delta expects a number.*'abc'"):
            parse_config(write_cfg(tmp_path, BASE_CFG.replace("delta = 0.01", "delta = abc")))

    def test_nonfinite_number_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="finite"):
            parse_config(write_cfg(tmp_path, BASE_CFG.replace("delta = 0.01", "delta = inf")))

    def test_int_key_rejects_float(self, tmp_path):
        with pytest.raises(ConfigError, match=r"run\.n_max expects an integer"):
            parse_config(write_cfg(tmp_path, BASE_CFG + "\n[run]\nn_max = 1.5\n"))

    def test_model_validation_runs(self, tmp_path):
        with pytest.raises(ConfigError, match="rate parameter r must exceed 1"):
            parse_config(write_cfg(tmp_path, BASE_CFG.replace("r = 7", "r = 0.5")))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            parse_config(tmp_path / "nope.cfg")


def load_manifest(out_dir: Path) -> dict:
    return json.loads((out_dir / "manifest.json").read_text())


class TestEquilibriaCommand:
    def test_csv_and_manifest(self, tmp_path):
        out = tmp_path / "out"
        assert main(["equilibria", "--out-dir", str(out), "--grid-step", "0.3"]) == 0
        header, rows = read_csv(out / "equilibria.csv")
        assert header == EQ_HEADER
        taus = [float(r[0]) for r in rows]
        assert taus[0] == 0.0
        assert taus == pytest.approx([0.3 * i for i in range(len(taus))])
        assert taus[-1] < checks.TAU_MAX_DEFAULT
        for row in rows:
            assert float(row[3]) == checks.TRIVIAL_E
            assert float(row[4]) > 0.0  # positive branch exists below tau_max

        manifest = load_manifest(out)
        assert manifest["subcommand"] == "equilibria"
        expected_sha = hashlib.sha256(default_config_path().read_bytes()).hexdigest()
        assert manifest["config_sha256"] == expected_sha
        assert manifest["resolved"]["tau_max"] == pytest.approx(
            checks.TAU_MAX_DEFAULT, rel=1e-12
        )
        assert isinstance(manifest["duration_seconds"], float)
        for name in manifest["outputs"]:
            p = Path(name)
            assert p.is_file() and p.stat().st_size > 0

    def test_grid_step_too_coarse_for_span(self, tmp_path):
        assert main(["equilibria", "--out-dir", str(tmp_path), "--grid-step", "5.0"]) == 2

    def test_out_dir_blocked_by_file(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("x")
        code = main(["equilibria", "--out-dir", str(blocker / "sub"), "--grid-step", "0.3"])
        assert code == 2


class TestCoeffsCommand:
    def test_rows_match_direct_computation(self, tmp_path):
        out = tmp_path / "out"
        assert main(["coeffs", "--out-dir", str(out), "--grid-step", "0.3"]) == 0
        header, rows = read_csv(out / "coeffs.csv")
        assert header == COEFF_HEADER
        for row in rows:
            assert float(row[14]) > 0.0  # b2
            assert float(row[15]) < 0.0  # b3
        row = next(r for r in rows if float(r[0]) == 0.3)
        p = default_params(tau=0.3)
        eq = positive_equilibrium(p, 0.3)
        lc = linearize(p, eq, 0.3)
        cc = char_coeffs(lc, p.mu, p.k)
        expected = (lc.A, lc.B, lc.C, lc.D, lc.G, lc.H,
                    cc.a1, cc.a2, cc.a3, cc.a4, cc.a5, cc.a6,
                    cc.b1, cc.b2, cc.b3)
        assert [float(v) for v in row[1:]] == list(expected)


class TestScanCommand:
    def test_outputs_and_crossings(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["scan", "--out-dir", str(out), "--grid-step", "0.01"]) == 0
        header, rows = read_csv(out / "switches.csv")
        assert header[:4] == ["tau_star", "omega_star", "n", "branch"]
        assert len(rows) == 2
        assert abs(float(rows[0][0]) - checks.TAU_STAR_1) < 1e-8
        assert abs(float(rows[1][0]) - checks.TAU_STAR_2) < 1e-8
        assert rows[0][5] == "destabilizing"
        assert rows[1][5] == "stabilizing"

        _, s1_rows = read_csv(out / "s1_curve.csv")
        assert s1_rows and all(float(r[2]) < 0.0 for r in s1_rows)

        _, part = read_csv(out / "partition.csv")
        assert [r[2] for r in part] == ["stable", "unstable", "stable"]
        assert float(part[0][0]) == 0.0
        assert float(part[0][1]) == pytest.approx(checks.TAU_STAR_1, abs=1e-8)
        assert float(part[2][1]) == pytest.approx(checks.TAU_MAX_DEFAULT, rel=1e-12)

        printed = capsys.readouterr().out
        assert "crossing: tau*=1.373422" in printed
        assert "crossing: tau*=2.823997" in printed

    def test_spacing_beyond_runtime_cap(self, tmp_path):
        assert main(["scan", "--out-dir", str(tmp_path), "--grid-step", "0.2"]) == 2

    def test_bad_n_max(self, tmp_path):
        code = main(["scan", "--out-dir", str(tmp_path), "--grid-step", "0.01",
                     "--n-max", "0"])
        assert code == 2

    def test_numerical_failure_exit_code(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise NumericalError("forced failure")

        monkeypatch.setattr("hemodelay.cli.run_scan", boom)
        code = main(["scan", "--out-dir", str(tmp_path), "--grid-step", "0.01"])
        assert code == 3


class TestSimulateCommand:
    def run(self, tmp_path, *extra: str) -> Path:
        out = tmp_path / "out"
        code = main(["simulate", "--out-dir", str(out), "--t-end", "50",
                     "--transient", "10", *extra])
        assert code == 0
        return out

    def test_requires_tau(self, tmp_path):
        assert main(["simulate", "--out-dir", str(tmp_path)]) == 2

    def test_trajectory_csv(self, tmp_path):
        out = self.run(tmp_path, "--tau", "0.5")
        header, rows = read_csv(out / "sim_tau0.5.csv")
        assert header == ["t", "Q", "M", "E"]
        # dt = 0.5/64 over 50 days
        assert len(rows) == 6401
        eq = positive_equilibrium(default_params(tau=0.5), 0.5)
        assert float(rows[0][0]) == 0.0
        assert float(rows[0][1]) == 1.1 * eq.Q
        assert float(rows[0][2]) == 1.1 * eq.M
        assert float(rows[0][3]) == 1.1 * eq.E
        manifest = load_manifest(out)
        assert manifest["resolved"]["tau"] == 0.5
        assert manifest["resolved"]["verdict"] in (
            "converging", "sustained-oscillation", "diverging", "unclassified"
        )
        assert "period" in manifest["resolved"]

    def test_stride(self, tmp_path):
        out = self.run(tmp_path, "--tau", "0.5", "--stride", "100")
        _, rows = read_csv(out / "sim_tau0.5.csv")
        assert len(rows) == 65

    def test_stride_must_be_positive(self, tmp_path):
        code = main(["simulate", "--out-dir", str(tmp_path), "--tau", "0.5",
                     "--t-end", "50", "--transient", "10", "--stride", "0"])
        assert code == 2

    def test_explicit_out_path(self, tmp_path):
        target = tmp_path / "traj.csv"
        out = self.run(tmp_path, "--tau", "0.5", "--out", str(target))
        assert target.is_file()
        assert str(target) in load_manifest(out)["outputs"]

    def test_history_triple(self, tmp_path):
        out = self.run(tmp_path, "--tau", "0.5", "--history", "1,2,3")
        _, rows = read_csv(out / "sim_tau0.5.csv")
        assert [float(v) for v in rows[0][1:]] == [1.0, 2.0, 3.0]

    def test_history_equilibrium_unscaled(self, tmp_path):
        out = self.run(tmp_path, "--tau", "0.5", "--history", "equilibrium")
        _, rows = read_csv(out / "sim_tau0.5.csv")
        eq = positive_equilibrium(default_params(tau=0.5), 0.5)
        assert [float(v) for v in rows[0][1:]] == [eq.Q, eq.M, eq.E]

    @pytest.mark.parametrize("spec", ["equilibrium*x", "garbage", "1,2", "1,2,x"])
    def test_bad_history_spec(self, tmp_path, spec):
        code = main(["simulate", "--out-dir", str(tmp_path), "--tau", "0.5",
                     "--t-end", "50", "--transient", "10", "--history", spec])
        assert code == 2

    def test_negative_history_component(self, tmp_path):
        code = main(["simulate", "--out-dir", str(tmp_path), "--tau", "0.5",
                     "--t-end", "50", "--transient", "10", "--history=-1,2,3"])
        assert code == 2

    def test_transient_must_precede_t_end(self, tmp_path):
        code = main(["simulate", "--out-dir", str(tmp_path), "--tau", "0.5",
                     "--t-end", "10", "--transient", "10"])
        assert code == 2

    def test_config_run_tau_and_flag_override(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE_CFG + "\n[run]\ntau = 0.5\n")
        out = tmp_path / "a"
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(out),
                     "--t-end", "30", "--transient", "5"]) == 0
        assert (out / "sim_tau0.5.csv").is_file()
        out2 = tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(out2),
                     "--t-end", "30", "--transient", "5", "--tau", "0.3"]) == 0
        assert (out2 / "sim_tau0.3.csv").is_file()


class TestSweepCommand:
    def test_small_sweep(self, tmp_path):
        out = tmp_path / "out"
        code = main(["sweep", "--out-dir", str(out), "--tau-max", "0.2",
                     "--tau-step", "0.1", "--t-end", "30", "--transient", "5"])
        assert code == 0
        header, rows = read_csv(out / "sweep.csv")
        assert header == ["tau", "verdict", "period", "period_std", "amplitude_ratio"]
        assert [float(r[0]) for r in rows] == [0.0, 0.1, 0.2]
        assert all(r[1] for r in rows)

    def test_requires_tau_max(self, tmp_path):
        assert main(["sweep", "--out-dir", str(tmp_path)]) == 2

    @pytest.mark.parametrize(
        "flags",
        [["--tau-min", "2", "--tau-max", "1"], ["--tau-max", "1", "--tau-step", "-0.1"]],
    )
    def test_bad_range(self, tmp_path, flags):
        assert main(["sweep", "--out-dir", str(tmp_path), *flags,
                     "--t-end", "30", "--transient", "5"]) == 2


@pytest.fixture(scope="module")
def repro(tmp_path_factory):
    """Two reproduction runs on the shipped parameters, for determinism checks."""
    dirs = []
    codes = []
    for name in ("repro_a", "repro_b"):
        d = tmp_path_factory.mktemp(name)
        codes.append(main(["reproduce", "--out-dir", str(d)]))
        dirs.append(d)
    return codes, dirs


class TestReproduceCommand:
    def test_exit_code_and_check_summary(self, repro):
        codes, dirs = repro
        # two reference checks ask for values the shipped parameter set does
        # not produce (the near-threshold equilibrium sits far from the
        # trivial one, and the root window ends near 2.909); they fail, the
        # other four pass, and the command reports that with exit code 4
        assert codes == [4, 4]
        manifest = load_manifest(dirs[0])
        status = {c["name"]: c["passed"] for c in manifest["checks"]}
        assert status == {
            "existence_threshold": True,
            "trivial_limit": False,
            "root_window": False,
            "stability_switches": True,
            "regimes": True,
            "oscillation_periods": True,
        }

    def test_expected_artifacts(self, repro):
        _, dirs = repro
        names = {p.name for p in dirs[0].iterdir()}
        assert names == {
            "manifest.json", "equilibria.csv", "coeffs.csv",
            "s0_curve.csv", "s1_curve.csv", "switches.csv", "partition.csv",
            "sim_tau0.5.csv", "sim_tau1.4.csv", "sim_tau2.8.csv", "sim_tau2.9.csv",
        }

    def test_byte_identical_outputs(self, repro):
        _, dirs = repro
        first = {p.name: p.read_bytes() for p in dirs[0].glob("*.csv")}
        second = {p.name: p.read_bytes() for p in dirs[1].glob("*.csv")}
        assert first.keys() == second.keys()
        for name, blob in first.items():
            assert blob == second[name], f"{name} differs between runs"

    def test_manifest_lists_real_csvs(self, repro):
        _, dirs = repro
        manifest = load_manifest(dirs[0])
        assert manifest["subcommand"] == "reproduce"
        outputs = [Path(name) for name in manifest["outputs"]]
        assert len(outputs) == 10
        for path in outputs:
            assert path.is_file() and path.stat().st_size > 0
            header, rows = read_csv(path)
            assert rows, f"{path.name} has no data rows"
            assert all(len(r) == len(header) for r in rows)

    def test_switch_values(self, repro):
        _, dirs = repro
        _, rows = read_csv(dirs[0] / "switches.csv")
        assert len(rows) == 2
        assert abs(float(rows[0][0]) - 1.40) <= 0.05
        assert abs(float(rows[1][0]) - 2.82) <= 0.02
        assert float(rows[0][6]) < 1e-8
        assert float(rows[1][6]) < 1e-8

    def test_no_equilibrium_note(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE_CFG.replace("beta0 = 0.5", "beta0 = 0.01"))
        out = tmp_path / "out"
        assert main(["reproduce", "--config", str(cfg), "--out-dir", str(out)]) == 0
        assert "no positive equilibrium" in capsys.readouterr().out
        manifest = load_manifest(out)
        assert manifest["note"] == "no positive equilibrium"
        assert manifest["resolved"]["tau_max"] is None
        assert [Path(p).name for p in manifest["outputs"]] == ["equilibria.csv"]
        _, rows = read_csv(out / "equilibria.csv")
        assert all(r[4] == "" and r[5] == "" and r[6] == "" for r in rows)
