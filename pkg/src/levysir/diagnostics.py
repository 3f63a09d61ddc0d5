"""Empirical verdicts on the model's asymptotic claims.

Each check reduces trajectories or ensembles to a measured number, compares
it against its target at an explicit tolerance, and reports pass/fail with a
short description of the limit law or bound being tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import EnsembleResult, TrajectoryRecord
from .model import MomentConstants, StateTriple

COMPARISON_SLACK = 1e-6  # relative headroom allowed before S > psi counts


@dataclass
class VerdictCheck:
    """One named check: measured vs target at a tolerance."""

    name: str
    measured: float
    target: float
    tolerance: float
    passed: bool
    provenance: str = ""
    skipped: bool = False
    note: str = ""

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        txt = (
            f"{status:4s} {self.name}: measured={self.measured:.6g} "
            f"target={self.target:.6g} tolerance={self.tolerance:.6g}"
        )
        if self.note:
            txt += f"  ({self.note})"
        return txt


@dataclass
class VerdictReport:
    """Collection of checks with aggregate outcome."""

    checks: list[VerdictCheck] = field(default_factory=list)

    def add(self, check: VerdictCheck) -> VerdictCheck:
        self.checks.append(check)
        return check

    def __getitem__(self, name: str) -> VerdictCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    @property
    def n_failed(self) -> int:
        return sum(1 for c in self.checks if not c.skipped and not c.passed)

    @property
    def all_passed(self) -> bool:
        return self.n_failed == 0

    def to_text(self) -> str:
        lines = [c.line() for c in self.checks]
        lines.append(
            f"{len(self.checks)} checks, {self.n_failed} failed, "
            f"{sum(1 for c in self.checks if c.skipped)} skipped"
        )
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["check,measured,target,tolerance,pass"]
        for c in self.checks:
            status = "skip" if c.skipped else ("true" if c.passed else "false")
            lines.append(
                f"{c.name},{c.measured:.17g},{c.target:.17g},"
                f"{c.tolerance:.17g},{status}"
            )
        return "\n".join(lines) + "\n"


def _trapezoid_mean(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Time average by trapezoidal rule; values may be (n,) or (n, paths)."""
    span = times[-1] - times[0]
    if span <= 0:
        raise ValueError("window must have positive length")
    return np.trapezoid(values, times, axis=0) / span


def time_average(
    traj: TrajectoryRecord, component: str = "S", burn_in: float = 0.0
) -> float:
    """Trapezoidal time average of a component over [burn_in, t_end].

    Raises:
        ValueError: if the window [burn_in, t_end] contains fewer than two
            recorded points.
    """
    mask = traj.times >= burn_in
    if mask.sum() < 2:
        raise ValueError("empty averaging window")
    return float(_trapezoid_mean(traj.times[mask], traj.component(component)[mask]))


def lyapunov_slope(
    traj: TrajectoryRecord, tail_fraction: float = 0.5
) -> tuple[float, float]:
    """Least-squares slope of ln I(t) over the tail of the record.

    Returns (slope, confidence half-width), the half-width being 1.96 times
    the regression standard error. Requires at least 100 recorded points in
    the tail window.
    """
    if not (0 < tail_fraction <= 1):
        raise ValueError("tail_fraction must be in (0, 1]")
    n = len(traj.times)
    start = int(math.floor(n * (1.0 - tail_fraction)))
    t = traj.times[start:]
    y = traj.log_infected[start:]
    if len(t) < 100:
        raise ValueError("need at least 100 recorded points in the tail window")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    dof = len(t) - 2
    ss_t = np.sum((t - t.mean()) ** 2)
    se = math.sqrt(float(resid @ resid) / dof / ss_t)
    return float(slope), 1.96 * se


def tail_slopes(times: np.ndarray, values: np.ndarray, tail_fraction: float = 0.5):
    """Per-column least-squares slopes of ln(values) over the tail window."""
    n = len(times)
    start = int(math.floor(n * (1.0 - tail_fraction)))
    t = times[start:]
    y = np.log(values[start:])
    return np.polyfit(t, y, 1)[0]


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov sup distance between empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(sample_b, dtype=np.float64).ravel())
    if len(a) == 0 or len(b) == 0:
        raise ValueError("samples must be non-empty")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / len(a)
    cdf_b = np.searchsorted(b, pooled, side="right") / len(b)
    return float(np.abs(cdf_a - cdf_b).max())


@dataclass(frozen=True)
class Histogram:
    """Plain counting histogram; edges has one more entry than counts."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def mode_bin(self) -> int:
        return int(np.argmax(self.counts))

    def interior_mode(self) -> bool:
        return 0 < self.mode_bin < len(self.counts) - 1

    def to_csv(self) -> str:
        lines = ["bin_left,bin_right,count"]
        for left, right, count in zip(self.edges[:-1], self.edges[1:], self.counts):
            lines.append(f"{left:.17g},{right:.17g},{int(count)}")
        return "\n".join(lines) + "\n"


def empirical_distribution(values, n_bins: int) -> Histogram:
    values = np.asarray(values, dtype=np.float64).ravel()
    if len(values) == 0:
        raise ValueError("sample must be non-empty")
    counts, edges = np.histogram(values, bins=n_bins)
    return Histogram(edges=edges, counts=counts)


def is_unimodal(counts, smooth: int = 5, tolerance_frac: float = 0.05) -> bool:
    """Rise-then-fall shape test on (smoothed) histogram counts.

    Counts are smoothed by a centered moving average of width `smooth`; dips
    before the peak or bumps after it are tolerated up to tolerance_frac of
    the peak height, which absorbs bin-level sampling noise.
    """
    c = np.asarray(counts, dtype=np.float64)
    if smooth > 1:
        pad = smooth // 2
        padded = np.concatenate([c[:1].repeat(pad), c, c[-1:].repeat(pad)])
        c = np.convolve(padded, np.ones(smooth) / smooth, mode="valid")
    peak = int(np.argmax(c))
    tol = tolerance_frac * c[peak]
    rising = c[: peak + 1]
    falling = c[peak:]
    rise_ok = np.all(rising[1:] >= np.maximum.accumulate(rising[:-1]) - tol)
    fall_ok = np.all(falling[1:] <= np.minimum.accumulate(falling[:-1]) + tol)
    return bool(rise_ok and fall_ok)


def comparison_violation_rate(traj: TrajectoryRecord) -> float:
    """Fraction of recorded grid points where S exceeds psi beyond slack.

    Raises:
        ValueError: if the trajectory has no aux channel.
    """
    psi = traj.component("psi")
    return float(np.mean(traj.S > psi * (1.0 + COMPARISON_SLACK)))


def ensemble_violation_rates(ensemble: EnsembleResult) -> np.ndarray:
    """Per-path comparison violation rates over the recorded grid."""
    psi = ensemble.component("psi")
    clean = ensemble.clean_mask
    return np.mean(
        ensemble.S[:, clean] > psi[:, clean] * (1.0 + COMPARISON_SLACK), axis=0
    )


@dataclass
class MomentBoundResult:
    """Moment bound evaluation at a set of checkpoint times."""

    times: np.ndarray
    empirical_mean: np.ndarray
    standard_error: np.ndarray
    bound: np.ndarray
    holds: np.ndarray
    pass_fraction: float
    skipped: bool = False
    note: str = ""


def _checkpoint_rows(times: np.ndarray, checkpoints) -> np.ndarray:
    rows = []
    for t in checkpoints:
        k = int(np.argmin(np.abs(times - t)))
        if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"checkpoint {t} not on the recorded grid")
        rows.append(k)
    return np.array(rows, dtype=np.int64)


def moment_bound_check(
    ensemble: EnsembleResult,
    constants: MomentConstants,
    initial: StateTriple,
    checkpoints,
    se_mult: float = 3.0,
    min_pass_frac: float = 0.99,
) -> MomentBoundResult:
    """Compare cross-sectional means of (S+I)^(2p) against the decay bound.

    At each checkpoint the empirical mean plus se_mult Monte Carlo standard
    errors must sit below the bound; the overall check passes when the bound
    holds at min_pass_frac of the checkpoints. Skipped (with a note) when
    the decay rate is not positive, since the bound is then unavailable.
    """
    if not constants.decay_rate_positive:
        empty = np.array([])
        return MomentBoundResult(
            times=empty,
            empirical_mean=empty,
            standard_error=empty,
            bound=empty,
            holds=np.array([], dtype=bool),
            pass_fraction=0.0,
            skipped=True,
            note="moment decay rate is not positive for this exponent; "
            "bound unavailable",
        )
    rows = _checkpoint_rows(ensemble.times, checkpoints)
    clean = ensemble.clean_mask
    mass = ensemble.S[np.ix_(rows, np.flatnonzero(clean))] + ensemble.I[
        np.ix_(rows, np.flatnonzero(clean))
    ]
    moments = mass ** (2.0 * constants.p)
    n = moments.shape[1]
    mean = moments.mean(axis=1)
    se = moments.std(axis=1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(rows))
    m0 = initial.S + initial.I
    bound = np.array([constants.bound_at(m0, t) for t in ensemble.times[rows]])
    holds = mean + se_mult * se <= bound
    return MomentBoundResult(
        times=ensemble.times[rows],
        empirical_mean=mean,
        standard_error=se,
        bound=bound,
        holds=holds,
        pass_fraction=float(holds.mean()),
        note=f"bound holds at {holds.sum()}/{len(holds)} checkpoints",
    )


def _thin_rows(times: np.ndarray, min_spacing: float) -> int:
    spacing = float(np.min(np.diff(times))) if len(times) > 1 else min_spacing
    return max(1, int(math.ceil(min_spacing / spacing - 1e-9)))


def batch_mean_standard_error(values: np.ndarray, n_batches: int = 10) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    n = len(values)
    if n < 2 * n_batches:
        raise ValueError("series too short for batch means")
    usable = n - n % n_batches
    batches = values[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / math.sqrt(n_batches))


def window_stability_ks(
    times: np.ndarray, values: np.ndarray, thin_spacing: float = 1.0
) -> float:
    """KS distance of a component between [T/2, 3T/4) and [3T/4, T].

    Samples are thinned to at least thin_spacing time units apart to tame
    serial correlation; values may be a single path (n,) or an ensemble
    matrix (n, paths), in which case paths are pooled.
    """
    T = times[-1]
    stride = _thin_rows(times, thin_spacing)
    idx = np.arange(0, len(times), stride)
    t = times[idx]
    vals = values[idx]
    first = vals[(t >= T / 2) & (t < 3 * T / 4)]
    second = vals[t >= 3 * T / 4]
    return ks_distance(first, second)


def ergodicity_check(
    ensemble: EnsembleResult,
    regime: str,
    component: str = "I",
    ks_max: float = 0.05,
    se_mult: float = 3.0,
    burn_in_frac: float = 0.1,
    thin_spacing: float = 1.0,
) -> list[VerdictCheck]:
    """Empirical signatures of an ergodic stationary regime.

    (i) Window stability: the pooled distribution of the component over
        [T/2, 3T/4) matches the one over [3T/4, T] within ks_max.
    (ii) Time-ensemble agreement (needs >= 2 paths): the time average along
        one path matches the terminal cross-sectional mean within se_mult
        combined standard errors. The per-path standard error is taken from
        the cross-path spread of time averages, which stays honest for
        series whose mixing time approaches the window length (batch means
        underestimate it badly there).

    Raises:
        ValueError: when the supplied regime is not "ergodic"; the claims
            under test are out of scope elsewhere.
    """
    if regime != "ergodic":
        raise ValueError(f"regime is {regime}")
    values = ensemble.component(component)[:, ensemble.clean_mask]
    times = ensemble.times
    checks = []

    ks = window_stability_ks(times, values, thin_spacing)
    checks.append(
        VerdictCheck(
            name=f"ergodic_window_ks_{component}",
            measured=ks,
            target=0.0,
            tolerance=ks_max,
            passed=ks <= ks_max,
            provenance="stationary-window stability of the empirical law",
        )
    )

    if values.shape[1] < 2:
        # one path has no cross-section to compare against
        return checks

    burn_in = burn_in_frac * times[-1]
    window = times >= burn_in
    path_averages = _trapezoid_mean(times[window], values[window])
    avg = float(path_averages[0])
    se_time = float(path_averages.std(ddof=1))
    terminal = values[-1]
    se_ens = float(terminal.std(ddof=1) / math.sqrt(len(terminal)))
    combined = math.hypot(se_time, se_ens)
    diff = abs(avg - float(terminal.mean()))
    checks.append(
        VerdictCheck(
            name=f"ergodic_time_vs_ensemble_{component}",
            measured=diff,
            target=0.0,
            tolerance=se_mult * combined,
            passed=diff <= se_mult * combined,
            provenance="time average along one path vs ensemble mean",
            note=f"time_avg={avg:.5g} ensemble_mean={terminal.mean():.5g}",
        )
    )
    return checks


@dataclass
class EnsembleSummary:
    """Cross-sectional statistics of an ensemble on the recorded grid."""

    n_paths: int
    n_diverged: int
    times: np.ndarray
    means: dict
    quantile_levels: tuple
    quantiles: dict
    histograms: dict
    moment_times: np.ndarray | None = None
    moment_mean: np.ndarray | None = None
    moment_se: np.ndarray | None = None

    def summary_csv(self) -> str:
        comps = list(self.means)
        header = ["t"]
        for c in comps:
            header.append(f"mean_{c}")
            header.extend(f"q{int(q * 100):02d}_{c}" for q in self.quantile_levels)
        lines = [",".join(header)]
        for k, t in enumerate(self.times):
            row = [f"{t:.17g}"]
            for c in comps:
                row.append(f"{self.means[c][k]:.17g}")
                row.extend(f"{self.quantiles[c][j, k]:.17g}"
                           for j in range(len(self.quantile_levels)))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def moments_csv(self) -> str:
        lines = ["t,mean,se"]
        for t, m, s in zip(self.moment_times, self.moment_mean, self.moment_se):
            lines.append(f"{t:.17g},{m:.17g},{s:.17g}")
        return "\n".join(lines) + "\n"


def build_summary(
    ensemble: EnsembleResult,
    n_bins: int = 50,
    quantile_levels: tuple = (0.05, 0.25, 0.5, 0.75, 0.95),
    p: float = 1.0,
    checkpoints=None,
) -> EnsembleSummary:
    """Reduce an ensemble to per-time means/quantiles and terminal histograms.

    Diverged paths are excluded from every statistic. Checkpoints, when
    given, add the cross-sectional (S+I)^(2p) moment trajectory.
    """
    clean = np.flatnonzero(ensemble.clean_mask)
    if len(clean) == 0:
        raise ValueError("no clean paths in ensemble")
    comps = ["S", "I", "R"] + (["psi"] if ensemble.psi is not None else [])
    means = {}
    quantiles = {}
    histograms = {}
    for c in comps:
        matrix = ensemble.component(c)[:, clean]
        means[c] = matrix.mean(axis=1)
        quantiles[c] = np.quantile(matrix, quantile_levels, axis=1)
        histograms[c] = empirical_distribution(matrix[-1], n_bins)
    summary = EnsembleSummary(
        n_paths=ensemble.n_paths,
        n_diverged=ensemble.n_diverged,
        times=ensemble.times,
        means=means,
        quantile_levels=tuple(quantile_levels),
        quantiles=quantiles,
        histograms=histograms,
    )
    if checkpoints is not None:
        rows = _checkpoint_rows(ensemble.times, checkpoints)
        mass = ensemble.S[np.ix_(rows, clean)] + ensemble.I[np.ix_(rows, clean)]
        moments = mass ** (2.0 * p)
        n = moments.shape[1]
        summary.moment_times = ensemble.times[rows]
        summary.moment_mean = moments.mean(axis=1)
        summary.moment_se = (
            moments.std(axis=1, ddof=1) / math.sqrt(n)
            if n > 1
            else np.zeros(len(rows))
        )
    return summary
