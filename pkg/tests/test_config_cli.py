import math
import os
from pathlib import Path

import numpy as np
import pytest

from levysir.cli import main
from levysir.config import ConfigError, format_config, load_config, parse_config

REPO = Path(__file__).resolve().parent.parent
PERSISTENCE_CFG = REPO / "configs" / "persistence.cfg"
EXTINCTION_CFG = REPO / "configs" / "extinction.cfg"


def config_text(
    A=0.09,
    sigmas=(0.02, 0.08, 0.01),
    eta=(0.05, 0.02, 0.01),
    t_end=5.0,
    dt=0.01,
    seed=42,
    record_stride=10,
    couple_aux=False,
    n_paths=2,
    workers=1,
    out="out",
    atoms=True,
    initial=(0.4, 0.3, 0.1),
):
    lines = [
        f"model.A = {A}",
        "model.mu1 = 0.05",
        "model.alpha = 0.04",
        "model.beta = 0.06",
        "model.gamma = 0.01",
        f"noise.sigma1 = {sigmas[0]}",
        f"noise.sigma2 = {sigmas[1]}",
        f"noise.sigma3 = {sigmas[2]}",
    ]
    if atoms:
        lines += [
            "noise.atom.0.weight = 1.0",
            f"noise.atom.0.eta1 = {eta[0]}",
            f"noise.atom.0.eta2 = {eta[1]}",
            f"noise.atom.0.eta3 = {eta[2]}",
        ]
    lines += [
        f"scheme.dt = {dt}",
        f"scheme.t_end = {t_end}",
        f"scheme.seed = {seed}",
        f"scheme.record_stride = {record_stride}",
        f"scheme.couple_aux = {str(couple_aux).lower()}",
        f"scheme.initial_s = {initial[0]}",
        f"scheme.initial_i = {initial[1]}",
        f"scheme.initial_r = {initial[2]}",
        f"ensemble.n_paths = {n_paths}",
        f"ensemble.workers = {workers}",
        f"output.dir = {out}",
    ]
    return "\n".join(lines) + "\n"


class TestParse:
    def test_committed_baseline_config(self):
        config = load_config(PERSISTENCE_CFG)
        assert config.params.A == 0.09
        assert config.params.mu2 == pytest.approx(0.09)
        assert config.noise.sigma2 == 0.08
        assert config.noise.measure.atoms[0].eta1 == 0.05
        assert config.noise.measure.atoms[0].label == "shock"
        assert config.initial.S == 0.4
        assert config.n_paths == 15000
        assert config.seed == 42

    def test_comments_and_blanks_ignored(self):
        text = "# header\n\n" + config_text() + "\n# trailing\n"
        parse_config(text)

    def test_unknown_key_reports_line(self):
        text = config_text() + "model.typo = 1\n"
        lineno = len(text.strip().splitlines())
        with pytest.raises(ConfigError, match=f"line {lineno}.*model.typo"):
            parse_config(text)

    def test_bad_number_reports_line(self):
        with pytest.raises(ConfigError, match="line 1.*number"):
            parse_config("model.A = fast\n" + config_text().split("\n", 1)[1])

    def test_missing_model_field(self):
        text = "\n".join(
            line for line in config_text().splitlines() if "mu1" not in line
        )
        with pytest.raises(ConfigError, match="mu1"):
            parse_config(text)

    def test_incomplete_atom(self):
        text = config_text(atoms=False) + "noise.atom.0.weight = 1.0\n"
        with pytest.raises(ConfigError, match="noise.atom.0 incomplete"):
            parse_config(text)

    def test_invalid_model_rejected(self):
        with pytest.raises(ConfigError, match="A must be > 0"):
            parse_config(config_text(A=-1.0))

    def test_amplitude_floor_rejected_before_simulation(self):
        with pytest.raises(ConfigError, match="1 \\+ eta2 <= 0 at atom 0"):
            parse_config(config_text(eta=(0.05, -1.0, 0.01)))

    def test_bad_scheme_rejected(self):
        with pytest.raises(ConfigError, match="scheme"):
            parse_config(config_text(t_end=0.001, dt=0.01))

    def test_round_trip_is_identity(self):
        first = parse_config(config_text(couple_aux=True))
        second = parse_config(format_config(first))
        assert first == second

    def test_round_trip_committed_configs(self):
        for path in (PERSISTENCE_CFG, EXTINCTION_CFG):
            config = load_config(path)
            assert parse_config(format_config(config)) == config


def run_cli(args):
    return main([str(a) for a in args])


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestThresholdCommand:
    def test_persistent_values(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, config_text(A=0.09, out=tmp_path / "out"))
        assert run_cli(["threshold", cfg]) == 0
        out = capsys.readouterr().out
        assert "t0s = 1.046026" in out
        assert "regime = ergodic" in out
        assert (tmp_path / "out" / "threshold.csv").exists()

    def test_extinct_values(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, config_text(A=0.08, out=tmp_path / "out"))
        assert run_cli(["threshold", cfg]) == 0
        out = capsys.readouterr().out
        assert "t0s = 0.926026" in out
        assert "regime = extinct" in out

    def test_zero_noise_threshold_equals_r0(self, tmp_path, capsys):
        cfg = write_cfg(
            tmp_path,
            config_text(sigmas=(0, 0, 0), atoms=False, out=tmp_path / "out"),
        )
        assert run_cli(["threshold", cfg]) == 0
        lines = capsys.readouterr().out.splitlines()
        values = {
            line.split(" = ")[0]: line.split(" = ")[1]
            for line in lines
            if " = " in line
        }
        assert values["t0s"] == values["r0"] == "1.080000"

    def test_verbose_adds_alternative_exponent(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, config_text(out=tmp_path / "out"))
        run_cli(["threshold", cfg, "--verbose"])
        assert "extinction_exponent_alt" in capsys.readouterr().out


class TestSimulateCommand:
    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        cfg_a = write_cfg(tmp_path, config_text(out=out_a), "a.cfg")
        cfg_b = write_cfg(tmp_path, config_text(out=out_b), "b.cfg")
        assert run_cli(["simulate", cfg_a]) == 0
        assert run_cli(["simulate", cfg_b]) == 0
        assert (out_a / "trajectory.csv").read_bytes() == (
            out_b / "trajectory.csv"
        ).read_bytes()

    def test_seed_override_changes_output(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_cfg(tmp_path, config_text(out=out))
        run_cli(["simulate", cfg])
        first = (out / "trajectory.csv").read_text()
        run_cli(["simulate", cfg, "--seed", "7"])
        second = (out / "trajectory.csv").read_text()
        assert first != second

    def test_row_count_on_committed_config(self, tmp_path, capsys, monkeypatch):
        config = load_config(PERSISTENCE_CFG)
        text = format_config(config).replace(
            f"output.dir = {config.output_dir}", f"output.dir = {tmp_path}"
        )
        cfg = write_cfg(tmp_path, text)
        assert run_cli(["simulate", cfg]) == 0
        lines = (tmp_path / "trajectory.csv").read_text().strip().splitlines()
        assert len(lines) == 702  # header + 701 recorded points

    def test_extinct_config_infection_decays(self, tmp_path, capsys):
        config = load_config(EXTINCTION_CFG)
        text = format_config(config).replace(
            f"output.dir = {config.output_dir}", f"output.dir = {tmp_path}"
        )
        cfg = write_cfg(tmp_path, text)
        assert run_cli(["simulate", cfg]) == 0
        rows = (tmp_path / "trajectory.csv").read_text().strip().splitlines()[1:]
        first_I = float(rows[0].split(",")[2])
        last_I = float(rows[-1].split(",")[2])
        assert math.log(last_I) < math.log(first_I)

    def test_divergent_run_exits_2_with_partial_csv(self, tmp_path, capsys):
        text = config_text(
            t_end=1.0,
            record_stride=1,
            initial=(1e300, 0.3, 0.1),
            out=tmp_path / "out",
        )
        cfg = write_cfg(tmp_path, text)
        assert run_cli(["simulate", cfg]) == 2
        assert "divergence at step" in capsys.readouterr().out
        lines = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()
        assert len(lines) >= 2  # header plus the clean prefix

    def test_svg_written_when_requested(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, config_text(t_end=1.0, out=tmp_path / "out"))
        run_cli(["simulate", cfg, "--svg"])
        assert (tmp_path / "out" / "trajectory.svg").exists()


class TestEnsembleCommand:
    def test_outputs_written(self, tmp_path, capsys):
        cfg = write_cfg(
            tmp_path,
            config_text(t_end=2.0, n_paths=3, out=tmp_path / "out"),
        )
        assert run_cli(["ensemble", cfg]) == 0
        for name in ("summary.csv", "moments.csv", "histogram_S.csv",
                     "histogram_I.csv", "histogram_R.csv"):
            assert (tmp_path / "out" / name).exists(), name

    def test_worker_count_invariance(self, tmp_path, capsys):
        # spans two noise blocks so the pool genuinely splits the work
        out_a, out_b = tmp_path / "w1", tmp_path / "w2"
        base = config_text(t_end=0.5, record_stride=10, n_paths=1040)
        cfg_a = write_cfg(tmp_path, base + f"\noutput.dir = {out_a}\n", "w1.cfg")
        cfg_b = write_cfg(
            tmp_path,
            base.replace("ensemble.workers = 1", "ensemble.workers = 4")
            + f"\noutput.dir = {out_b}\n",
            "w2.cfg",
        )
        assert run_cli(["ensemble", cfg_a]) == 0
        assert run_cli(["ensemble", cfg_b]) == 0
        assert (out_a / "summary.csv").read_bytes() == (
            out_b / "summary.csv"
        ).read_bytes()

    def test_env_var_overrides_workers(self, tmp_path, capsys, monkeypatch):
        out = tmp_path / "out"
        cfg = write_cfg(tmp_path, config_text(t_end=0.5, n_paths=4, out=out))
        monkeypatch.setenv("LEVYSIR_WORKERS", "2")
        assert run_cli(["ensemble", cfg]) == 0
        assert (out / "summary.csv").exists()


class TestVerifyCommand:
    def test_smoke_run_routes_by_regime(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_cfg(tmp_path, config_text(A=0.08, out=out))
        code = run_cli(["verify", cfg, "--smoke"])
        printed = capsys.readouterr().out
        assert code == 0
        assert "extinction_slope" in printed
        assert "SKIP ergodic_survival" in printed
        verdicts = (out / "verdicts.csv").read_text().splitlines()
        assert verdicts[0] == "check,measured,target,tolerance,pass"

    def test_smoke_run_ergodic_regime(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_cfg(tmp_path, config_text(A=0.09, out=out))
        assert run_cli(["verify", cfg, "--smoke"]) == 0
        printed = capsys.readouterr().out
        assert "ergodic_window_ks_I" in printed
        assert "SKIP extinction_slope" in printed


class TestErrors:
    def test_unknown_key_exits_1(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, config_text() + "model.oops = 3\n")
        assert run_cli(["threshold", cfg]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exits_1(self, tmp_path, capsys):
        assert run_cli(["threshold", tmp_path / "nope.cfg"]) == 1

    def test_amplitude_floor_fails_before_simulation(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, config_text(eta=(0.05, -1.0, 0.01)))
        assert run_cli(["verify", cfg, "--smoke"]) == 1
        assert "1 + eta2 <= 0 at atom 0" in capsys.readouterr().err
