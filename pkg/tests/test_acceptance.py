"""Acceptance suite: every exit criterion at its stated tolerance.

The heavy fixtures run the full verification plan once per regime and are
shared across criteria; each test prints one pass/fail line (visible with
pytest -s). Expected wall time for the whole module is several minutes.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from levysir import (
    basic_reproduction_number,
    run_ensemble,
    run_verification,
    simulate_path,
    stochastic_threshold,
    zero_noise,
)
from levysir.cli import main
from levysir.config import load_config
from levysir.diagnostics import (
    build_summary,
    ensemble_violation_rates,
    is_unimodal,
)
from levysir.engine import format_trajectory_csv
from levysir.verify import VerifyPlan

from test_config_cli import EXTINCTION_CFG, PERSISTENCE_CFG


def announce(criterion, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {criterion}] {status}: {detail}")


@pytest.fixture(scope="module")
def ergodic_config():
    return load_config(PERSISTENCE_CFG)


@pytest.fixture(scope="module")
def extinct_config():
    return load_config(EXTINCTION_CFG)


@pytest.fixture(scope="module")
def ergodic_report(ergodic_config):
    return run_verification(ergodic_config.sim_config(), VerifyPlan())


@pytest.fixture(scope="module")
def extinct_report(extinct_config):
    return run_verification(extinct_config.sim_config(), VerifyPlan())


@pytest.fixture(scope="module")
def figure_ensemble(ergodic_config):
    # terminal snapshot of 15000 paths at t = 700; only the endpoints of
    # the grid are recorded
    sim = replace(ergodic_config.sim_config(), record_stride=70000)
    return run_ensemble(sim, 15000)


def test_criterion_1_threshold_reproduction(capsys):
    assert main(["threshold", str(PERSISTENCE_CFG)]) == 0
    out_persistent = capsys.readouterr().out
    assert main(["threshold", str(EXTINCTION_CFG)]) == 0
    out_extinct = capsys.readouterr().out

    def printed_value(text, key):
        for line in text.splitlines():
            if line.startswith(f"{key} = "):
                return float(line.split(" = ")[1])
        raise AssertionError(f"{key} not printed")

    high = printed_value(out_persistent, "t0s")
    low = printed_value(out_extinct, "t0s")
    assert abs(high - 1.046026) <= 5e-5
    assert abs(low - 0.926026) <= 5e-5
    assert "regime = ergodic" in out_persistent
    assert "regime = extinct" in out_extinct
    announce(1, True, f"t0s reported as {high:.6f} and {low:.6f}")


def test_criterion_2_noise_free_reduction(ergodic_config):
    params = ergodic_config.params
    r0 = basic_reproduction_number(params)
    quiet = stochastic_threshold(params, zero_noise())
    assert quiet == pytest.approx(r0, abs=1e-15)
    assert r0 == pytest.approx(1.08, rel=1e-12)
    announce(2, True, f"threshold equals r0 = {r0:.12f} without noise")


def test_criterion_3_aux_time_average(ergodic_report):
    check = ergodic_report["aux_time_average"]
    announce(3, check.passed,
             f"fraction of seeds within 3% of A/mu1: {check.measured:.2f} "
             f"(need >= 0.95); {check.note}")
    assert check.passed, check.line()


def test_criterion_4_extinction_rate(extinct_report):
    slope = extinct_report["extinction_slope"]
    terminal = extinct_report["extinction_terminal"]
    announce(4, slope.passed and terminal.passed,
             f"median slope {slope.measured:.5f} in [-0.012, -0.003] "
             f"(prediction {slope.target:.5f}); "
             f"terminal extinction fraction {terminal.measured:.2f} (need >= 0.90)")
    assert slope.passed, slope.line()
    assert terminal.passed, terminal.line()


def test_criterion_5i_ergodic_window_stability(ergodic_report):
    check = ergodic_report["ergodic_window_ks_I"]
    announce("5i", check.passed,
             f"window KS distance {check.measured:.4f} (need <= 0.05)")
    assert check.passed, check.line()


def test_criterion_5ii_time_vs_ensemble_average(ergodic_report):
    check = ergodic_report["ergodic_time_vs_ensemble_I"]
    announce("5ii", check.passed,
             f"|time avg - ensemble mean| = {check.measured:.5f} "
             f"(tolerance {check.tolerance:.5f}); {check.note}")
    assert check.passed, check.line()


def test_criterion_5iii_ergodic_survival(ergodic_report):
    check = ergodic_report["ergodic_survival"]
    announce("5iii", check.passed,
             f"fraction of paths with I(5000) > 1e-3: {check.measured:.3f} "
             f"(need >= 0.95)")
    assert check.passed, check.line()


def test_criterion_6_moment_bound(ergodic_report):
    check = ergodic_report["moment_bound"]
    announce(6, check.passed and not check.skipped,
             f"bound holds at fraction {check.measured:.3f} of checkpoints "
             f"(need >= 0.99); {check.note}")
    assert not check.skipped
    assert check.passed, check.line()


def test_criterion_7_comparison_bound(ergodic_report, ergodic_config):
    check = ergodic_report["comparison_rate"]
    # deterministic sub-case: exact zero against the noise-free dynamics
    quiet = replace(
        ergodic_config.sim_config(),
        noise=zero_noise(),
        t_end=700.0,
        record_stride=1,
        couple_aux=True,
    )
    rates = ensemble_violation_rates(run_ensemble(quiet, 1))
    announce(7, check.passed and rates.max() == 0.0,
             f"worst stochastic violation rate {check.measured:.2e} "
             f"(need <= 1e-3); deterministic rate {rates.max():.0e}")
    assert rates.max() == 0.0
    assert check.passed, check.line()


def test_criterion_8_positivity_and_reproducibility(
    ergodic_report, extinct_report, figure_ensemble, ergodic_config
):
    for report in (ergodic_report, extinct_report):
        check = report["positivity"]
        assert check.passed, check.line()
    clean = figure_ensemble.clean_mask
    assert figure_ensemble.n_diverged == 0
    for name in ("S", "I", "R"):
        assert float(figure_ensemble.component(name)[:, clean].min()) > 0.0

    sim = replace(ergodic_config.sim_config(), t_end=5.0, record_stride=10)
    csv_a = format_trajectory_csv(simulate_path(sim))
    csv_b = format_trajectory_csv(simulate_path(sim))
    assert csv_a == csv_b

    serial = run_ensemble(sim, 1040, workers=1)
    parallel = run_ensemble(sim, 1040, workers=2)
    assert np.array_equal(serial.I, parallel.I)
    announce(8, True, "states positive everywhere; reruns and worker counts "
                      "byte-identical")


def test_supplementary_ergodic_slope_is_flat(ergodic_config):
    # persistent regime: stationarity implies a zero asymptotic log-slope;
    # the median over 100 seeds lands in [-0.002, +0.002]
    sim = replace(
        ergodic_config.sim_config(),
        t_end=5000.0,
        record_stride=1000,
    )
    ensemble = run_ensemble(sim, 100)
    from levysir.diagnostics import tail_slopes

    slopes = tail_slopes(ensemble.times, ensemble.I[:, ensemble.clean_mask])
    median = float(np.median(slopes))
    print(f"[supplementary] ergodic median ln I slope {median:+.5f}")
    assert -0.002 <= median <= 0.002


def test_criterion_9_terminal_histogram_shape(figure_ensemble):
    summary = build_summary(figure_ensemble, n_bins=50)
    results = {}
    for name in ("S", "I", "R"):
        hist = summary.histograms[name]
        results[name] = (is_unimodal(hist.counts), hist.interior_mode(),
                         hist.mode_bin)
    detail = "; ".join(
        f"{name}: unimodal={u} interior={i} mode_bin={m}"
        for name, (u, i, m) in results.items()
    )
    announce(9, all(u and i for u, i, _ in results.values()), detail)
    for name, (unimodal, interior, mode_bin) in results.items():
        assert unimodal, f"{name} histogram is not unimodal"
        assert interior, f"{name} histogram mode at bin {mode_bin} is not interior"
