"""Positivity-preserving integrator for the jump-diffusion SIR system.

The system

    dS = (A - mu1 S - beta S I) dt + sigma1 S dW1 + jumps(eta1, S)
    dI = (beta S I - (mu2+gamma) I) dt + sigma2 I dW2 + jumps(eta2, I)
    dR = (gamma I - mu1 R) dt + sigma3 R dW3 + jumps(eta3, R)

is integrated in log coordinates, which keeps every state strictly positive
by construction and makes jumps exact multiplications by 1 + eta. Per unit
time the log drift of each component (left-endpoint, Ito convention) is

    dlnS = A/S - mu1 - beta I - sigma1^2/2 - P1
    dlnI = beta S - (mu2+gamma) - sigma2^2/2 - P2
    dlnR = gamma I/R - mu1 - sigma3^2/2 - P3

with P_i the jump penalty integral of eta_i (eta - ln(1+eta) against the
jump measure). One step of length dt then applies

    ln X += dlnX * dt + sigma_X dW_X
            + sum_events ln(1 + eta_X(u_k)) * count_k - dt * m_X,

where count_k ~ Poisson(w_k dt) are the per-atom jump counts and
m_X = integral of ln(1 + eta_X). The subtracted m_X term centers the raw
counts so that the realized jump contribution is the compensated (mean-zero)
martingale increment and the expected log increment matches dlnX exactly.

An auxiliary process psi with d psi = (A - mu1 psi) dt + sigma1 psi dW1 +
jumps(eta1, psi), psi(0) = S(0), can be co-simulated against the *same*
Brownian increments and jump counts as S; under shared drivers psi
dominates S pathwise, which makes the comparison bound testable per
realization.

Each path draws its noise from an independent stream keyed by
(seed, path_index), so ensemble results do not depend on scheduling order
or worker count. Paths are advanced in fixed-size vectorized blocks.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .levy import NoiseSpec
from .model import ModelParams, StateTriple

# |ln state| beyond this is treated as divergence (double exp range).
LOG_LIMIT = 700.0
# Noise is pre-generated in chunks of this many steps; the schedule is fixed
# so the per-path stream is identical no matter how paths are grouped.
CHUNK_STEPS = 8192
# Paths per vectorized block; blocks are global, workers take whole blocks.
BLOCK_SIZE = 1024


@dataclass(frozen=True)
class SimConfig:
    """One simulation setup: model, noise, grid and reproducibility key."""

    params: ModelParams
    noise: NoiseSpec
    initial: StateTriple
    t_end: float
    dt: float
    seed: int = 0
    record_stride: int = 1
    couple_aux: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and self.dt <= self.t_end):
            raise ValueError("need 0 < dt <= t_end")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.initial.require_positive()

    @property
    def n_steps(self) -> int:
        n = round(self.t_end / self.dt)
        if abs(n * self.dt - self.t_end) > 1e-6 * max(1.0, abs(self.t_end)):
            raise ValueError("t_end must be an integer multiple of dt")
        return n

    def digest(self) -> str:
        """Short stable fingerprint of the effective configuration."""
        parts = (
            self.params,
            self.noise.sigma1,
            self.noise.sigma2,
            self.noise.sigma3,
            self.noise.measure.atoms,
            self.initial,
            self.t_end,
            self.dt,
            self.seed,
            self.record_stride,
            self.couple_aux,
        )
        return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]


@dataclass
class TrajectoryRecord:
    """Recorded grid and states of one realization.

    times is strictly increasing and every recorded state is strictly
    positive; psi is present iff the run was coupled. diverged_at is the
    step index at which the log state left the representable range (the
    record is then truncated to the clean prefix), or None.
    """

    times: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    log_infected: np.ndarray
    psi: np.ndarray | None
    seed: int
    config_digest: str
    diverged_at: int | None = None

    def component(self, name: str) -> np.ndarray:
        if name == "psi":
            if self.psi is None:
                raise ValueError("trajectory has no aux channel")
            return self.psi
        if name not in ("S", "I", "R"):
            raise ValueError(f"unknown component {name!r}")
        return getattr(self, name)

    def state_at(self, index: int) -> StateTriple:
        return StateTriple(
            float(self.S[index]), float(self.I[index]), float(self.R[index])
        )

    def to_csv(self, path) -> None:
        """Write t,S,I,R[,psi] rows at full double precision."""
        with open(path, "w", newline="") as fh:
            fh.write(format_trajectory_csv(self))


def format_trajectory_csv(record: TrajectoryRecord) -> str:
    cols = [record.times, record.S, record.I, record.R]
    header = "t,S,I,R"
    if record.psi is not None:
        cols.append(record.psi)
        header += ",psi"
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join("%.17g" % v for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class EnsembleResult:
    """Recorded paths of an ensemble, one column per path.

    diverged_step holds -1 for clean paths, otherwise the step index of
    divergence; diverged columns are NaN from that point on and are
    excluded by the clean_mask.
    """

    times: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    psi: np.ndarray | None
    diverged_step: np.ndarray
    seed: int
    config_digest: str

    @property
    def n_paths(self) -> int:
        return self.S.shape[1]

    @property
    def clean_mask(self) -> np.ndarray:
        return self.diverged_step < 0

    @property
    def n_diverged(self) -> int:
        return int((~self.clean_mask).sum())

    def component(self, name: str) -> np.ndarray:
        if name == "psi":
            if self.psi is None:
                raise ValueError("ensemble has no aux channel")
            return self.psi
        if name not in ("S", "I", "R"):
            raise ValueError(f"unknown component {name!r}")
        return getattr(self, name)

    def terminal(self, name: str, clean_only: bool = True) -> np.ndarray:
        values = self.component(name)[-1]
        return values[self.clean_mask] if clean_only else values

    def path(self, index: int) -> TrajectoryRecord:
        """View of one path as a trajectory record."""
        if not self.clean_mask[index]:
            raise ValueError(f"path {index} diverged")
        return TrajectoryRecord(
            times=self.times,
            S=self.S[:, index].copy(),
            I=self.I[:, index].copy(),
            R=self.R[:, index].copy(),
            log_infected=np.log(self.I[:, index]),
            psi=None if self.psi is None else self.psi[:, index].copy(),
            seed=self.seed,
            config_digest=self.config_digest,
        )


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one path of an ensemble."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index),))
    return np.random.default_rng(ss)


class _Kernel:
    """Precomputed per-step constants shared by all integration entry points."""

    def __init__(self, params: ModelParams, noise: NoiseSpec, dt: float):
        p = params
        self.A = p.A
        self.beta = p.beta
        self.gamma = p.gamma
        self.dt = dt
        self.sqrt_dt = math.sqrt(dt)
        # log1p amplitudes, (n_atoms, 3); empty measure -> (0, 3)
        self.log1p_eta = np.log1p(noise.measure.amplitudes)
        self.n_atoms = self.log1p_eta.shape[0]
        self.lam_dt = noise.measure.weights * dt
        jump_mean = [noise.jump_mean(i) for i in (1, 2, 3)]
        sig = [noise.sigma1, noise.sigma2, noise.sigma3]
        # Constant part of the per-step log increment. jump_mean is the full
        # compensator of the raw-count jump term: it equals the penalty
        # integral plus the mean log jump, so raw Poisson counts against
        # log1p_eta land centered on the Ito log drift.
        self.const_S = (-p.mu1 - 0.5 * sig[0] ** 2 - jump_mean[0]) * dt
        self.const_I = (-(p.mu2 + p.gamma) - 0.5 * sig[1] ** 2 - jump_mean[1]) * dt
        self.const_R = (-p.mu1 - 0.5 * sig[2] ** 2 - jump_mean[2]) * dt
        self.sig_sqdt = np.array(sig) * self.sqrt_dt

    def draw_noise(self, rng: np.random.Generator, n: int):
        """Scaled Brownian increments (n, 3) and jump counts (n, n_atoms)."""
        normals = rng.standard_normal((n, 3))
        normals *= self.sig_sqdt
        if self.n_atoms:
            counts = rng.poisson(self.lam_dt, (n, self.n_atoms)).astype(np.float64)
        else:
            counts = np.zeros((n, 0))
        return normals, counts

    def advance(self, lnS, lnI, lnR, lnPsi, S, I, R, psi, dW, counts):
        """One in-place step over a block of paths. Arrays are 1-d over paths."""
        jumps = counts @ self.log1p_eta if self.n_atoms else None
        dt = self.dt
        lnS += (self.A / S - self.beta * I) * dt + self.const_S + dW[:, 0]
        lnI += (self.beta * S) * dt + self.const_I + dW[:, 1]
        lnR += (self.gamma * I / R) * dt + self.const_R + dW[:, 2]
        if lnPsi is not None:
            lnPsi += (self.A / psi) * dt + self.const_S + dW[:, 0]
        if jumps is not None:
            lnS += jumps[:, 0]
            lnI += jumps[:, 1]
            lnR += jumps[:, 2]
            if lnPsi is not None:
                lnPsi += jumps[:, 0]
        np.exp(lnS, out=S)
        np.exp(lnI, out=I)
        np.exp(lnR, out=R)
        if lnPsi is not None:
            np.exp(lnPsi, out=psi)


def log_drift_rates(
    state: StateTriple, params: ModelParams, noise: NoiseSpec
) -> tuple[float, float, float]:
    """Per-unit-time drift of (ln S, ln I, ln R) at a state (Ito convention).

    Raises:
        ValueError: if the state is not strictly positive.
    """
    state.require_positive()
    p = params
    pen = [noise.jump_penalty(i) for i in (1, 2, 3)]
    dlnS = p.A / state.S - p.mu1 - p.beta * state.I - 0.5 * noise.sigma1**2 - pen[0]
    dlnI = p.beta * state.S - (p.mu2 + p.gamma) - 0.5 * noise.sigma2**2 - pen[1]
    dlnR = (
        p.gamma * state.I / state.R - p.mu1 - 0.5 * noise.sigma3**2 - pen[2]
    )
    return (dlnS, dlnI, dlnR)


def aux_log_drift_rate(psi: float, params: ModelParams, noise: NoiseSpec) -> float:
    """Per-unit-time drift of ln psi for the auxiliary process."""
    if psi <= 0:
        raise ValueError("psi must be strictly positive")
    return (
        params.A / psi - params.mu1 - 0.5 * noise.sigma1**2 - noise.jump_penalty(1)
    )


class DivergenceError(RuntimeError):
    """Log state left the representable range during a single-step call."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


def step(
    state: StateTriple,
    params: ModelParams,
    noise: NoiseSpec,
    dt: float,
    rng: np.random.Generator,
) -> StateTriple:
    """Advance one state by a single step of length dt.

    Draws three Brownian increments and one jump batch from rng; the output
    is strictly positive by construction. Deterministic given the rng state.
    """
    state.require_positive()
    if dt <= 0:
        raise ValueError("dt must be > 0")
    kern = _Kernel(params, noise, dt)
    normals = rng.standard_normal(3) * kern.sig_sqdt
    batch = noise.measure.sample_jump_batch(dt, rng)
    jumps = np.zeros(3)
    for atom_index, count in batch.events:
        jumps += kern.log1p_eta[atom_index] * count
    ln = np.array([math.log(state.S), math.log(state.I), math.log(state.R)])
    drift = np.array(
        [
            (params.A / state.S - params.beta * state.I) * dt + kern.const_S,
            (params.beta * state.S) * dt + kern.const_I,
            (params.gamma * state.I / state.R) * dt + kern.const_R,
        ]
    )
    ln += drift + normals + jumps
    if np.any(np.abs(ln) > LOG_LIMIT):
        raise DivergenceError("log state beyond representable range", step_index=0)
    return StateTriple(*np.exp(ln))


@dataclass
class _BlockOutput:
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    psi: np.ndarray | None
    diverged_step: np.ndarray


def _record_times(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Recorded step indices and times; the final step is always kept."""
    n = config.n_steps
    idx = np.arange(0, n + 1, config.record_stride)
    if idx[-1] != n:
        idx = np.append(idx, n)
    return idx, idx * config.dt


def _simulate_block(config: SimConfig, lo: int, hi: int) -> _BlockOutput:
    """Advance paths [lo, hi) of the ensemble keyed by config.seed."""
    kern = _Kernel(config.params, config.noise, config.dt)
    n_steps = config.n_steps
    rec_idx, _ = _record_times(config)
    b = hi - lo
    rngs = [path_rng(config.seed, i) for i in range(lo, hi)]

    lnS = np.full(b, math.log(config.initial.S))
    lnI = np.full(b, math.log(config.initial.I))
    lnR = np.full(b, math.log(config.initial.R))
    lnPsi = lnS.copy() if config.couple_aux else None
    S, I, R = np.exp(lnS), np.exp(lnI), np.exp(lnR)
    psi = S.copy() if config.couple_aux else None

    n_rec = len(rec_idx)
    recS = np.empty((n_rec, b))
    recI = np.empty((n_rec, b))
    recR = np.empty((n_rec, b))
    recPsi = np.empty((n_rec, b)) if config.couple_aux else None
    diverged = np.full(b, -1, dtype=np.int64)

    def record(row):
        recS[row], recI[row], recR[row] = S, I, R
        if recPsi is not None:
            recPsi[row] = psi

    record(0)
    rec_pos = 1
    next_rec = rec_idx[rec_pos] if n_rec > 1 else n_steps + 1

    done = 0
    while done < n_steps:
        length = min(CHUNK_STEPS, n_steps - done)
        normals = np.empty((b, length, 3))
        counts = np.empty((b, length, kern.n_atoms))
        for j, rng in enumerate(rngs):
            nrm, cnt = kern.draw_noise(rng, length)
            normals[j] = nrm
            counts[j] = cnt

        # Snapshot at chunk start: if anything blows up inside the chunk the
        # chunk is replayed step by step to pin the exact divergence index.
        snapshot = (lnS.copy(), lnI.copy(), lnR.copy(),
                    None if lnPsi is None else lnPsi.copy())
        snap_rec_pos = rec_pos

        def log_arrays():
            return [lnS, lnI, lnR] + ([lnPsi] if lnPsi is not None else [])

        def out_of_range():
            bad = np.zeros(b, dtype=bool)
            for arr in log_arrays():
                bad |= ~np.isfinite(arr) | (np.abs(arr) > LOG_LIMIT)
            return bad & (diverged < 0)

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for i in range(length):
                kern.advance(lnS, lnI, lnR, lnPsi, S, I, R, psi,
                             normals[:, i, :], counts[:, i, :])
                if done + i + 1 == next_rec:
                    record(rec_pos)
                    rec_pos += 1
                    next_rec = rec_idx[rec_pos] if rec_pos < n_rec else n_steps + 1

            if out_of_range().any():
                # A path counts as diverged when its log state is out of
                # range at a chunk boundary; the reported index is its first
                # out-of-range step, found by replaying the chunk. Checking
                # only at boundaries keeps the verdict identical however the
                # paths are grouped into blocks.
                lnS[:], lnI[:], lnR[:] = snapshot[0], snapshot[1], snapshot[2]
                if lnPsi is not None:
                    lnPsi[:] = snapshot[3]
                np.exp(lnS, out=S); np.exp(lnI, out=I); np.exp(lnR, out=R)
                if psi is not None:
                    np.exp(lnPsi, out=psi)
                rec_pos = snap_rec_pos
                next_rec = rec_idx[rec_pos] if rec_pos < n_rec else n_steps + 1
                first_bad = np.full(b, -1, dtype=np.int64)
                chunk_rows = []
                for i in range(length):
                    kern.advance(lnS, lnI, lnR, lnPsi, S, I, R, psi,
                                 normals[:, i, :], counts[:, i, :])
                    crossed = out_of_range() & (first_bad < 0)
                    if crossed.any():
                        first_bad[crossed] = done + i + 1
                    if done + i + 1 == next_rec:
                        record(rec_pos)
                        chunk_rows.append((rec_pos, done + i + 1))
                        rec_pos += 1
                        next_rec = rec_idx[rec_pos] if rec_pos < n_rec else n_steps + 1
                newly = out_of_range() & (first_bad >= 0)
                if newly.any():
                    diverged[newly] = first_bad[newly]
                    for arr in log_arrays():
                        arr[newly] = np.nan
                    S[newly] = I[newly] = R[newly] = np.nan
                    if psi is not None:
                        psi[newly] = np.nan
                    # recorded rows from the first bad step on are untrusted
                    for row, step_index in chunk_rows:
                        stale = newly & (first_bad <= step_index)
                        recS[row, stale] = np.nan
                        recI[row, stale] = np.nan
                        recR[row, stale] = np.nan
                        if recPsi is not None:
                            recPsi[row, stale] = np.nan
        done += length

    return _BlockOutput(recS, recI, recR, recPsi, diverged)


def simulate_path(config: SimConfig, path_index: int = 0) -> TrajectoryRecord:
    """Integrate one path from t = 0 to t_end.

    The path's noise stream is keyed by (config.seed, path_index), so the
    same path of an ensemble and a standalone run coincide. On divergence
    the record is truncated to the clean prefix and diverged_at is set.
    """
    _, times = _record_times(config)
    out = _simulate_block(config, path_index, path_index + 1)
    S, I, R = out.S[:, 0], out.I[:, 0], out.R[:, 0]
    psi = None if out.psi is None else out.psi[:, 0]
    diverged_at = None
    if out.diverged_step[0] >= 0:
        diverged_at = int(out.diverged_step[0])
        keep = times <= (diverged_at - 1) * config.dt + 1e-12
        times, S, I, R = times[keep], S[keep], I[keep], R[keep]
        if psi is not None:
            psi = psi[keep]
    return TrajectoryRecord(
        times=times,
        S=S,
        I=I,
        R=R,
        log_infected=np.log(I),
        psi=psi,
        seed=config.seed,
        config_digest=config.digest(),
        diverged_at=diverged_at,
    )


def _block_spans(n_paths: int) -> list[tuple[int, int]]:
    # Block boundaries depend only on the global path index, never on the
    # worker count, so grouping (and thus every result) is scheduling-proof.
    return [
        (lo, min(lo + BLOCK_SIZE, n_paths)) for lo in range(0, n_paths, BLOCK_SIZE)
    ]


def _block_worker(payload):
    config, lo, hi = payload
    out = _simulate_block(config, lo, hi)
    return lo, out


def resolve_workers(requested: int | None) -> int:
    """Worker count with the LEVYSIR_WORKERS environment override."""
    env = os.environ.get("LEVYSIR_WORKERS")
    if env is not None:
        return max(1, int(env))
    return max(1, requested or 1)


def run_ensemble(config: SimConfig, n_paths: int, workers: int = 1) -> EnsembleResult:
    """Simulate n_paths independent paths and stack the recorded grids.

    Paths are advanced in fixed global blocks; workers > 1 distributes whole
    blocks over processes. Results are identical for any worker count.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    _, times = _record_times(config)
    n_rec = len(times)
    S = np.empty((n_rec, n_paths))
    I = np.empty((n_rec, n_paths))
    R = np.empty((n_rec, n_paths))
    psi = np.empty((n_rec, n_paths)) if config.couple_aux else None
    diverged = np.full(n_paths, -1, dtype=np.int64)

    spans = _block_spans(n_paths)
    workers = min(resolve_workers(workers), len(spans))

    def fill(lo: int, out: _BlockOutput):
        hi = lo + out.S.shape[1]
        S[:, lo:hi] = out.S
        I[:, lo:hi] = out.I
        R[:, lo:hi] = out.R
        if psi is not None:
            psi[:, lo:hi] = out.psi
        diverged[lo:hi] = out.diverged_step

    if workers <= 1:
        for lo, hi in spans:
            fill(lo, _simulate_block(config, lo, hi))
    else:
        payloads = [(config, lo, hi) for lo, hi in spans]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for lo, out in pool.map(_block_worker, payloads):
                fill(lo, out)

    return EnsembleResult(
        times=times,
        S=S,
        I=I,
        R=R,
        psi=psi,
        diverged_step=diverged,
        seed=config.seed,
        config_digest=config.digest(),
    )
