"""Model parameters, admissibility checks, and moment-bound constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levy import NoiseSpec


@dataclass(frozen=True)
class ModelParams:
    """Rate constants of the SIR model.

    A is the recruitment rate, mu1 the natural mortality rate, alpha the
    disease-related death rate, beta the transmission rate and gamma the
    recovery rate. The general mortality rate of the infected class is
    derived as mu2 = mu1 + alpha, which keeps the pair consistent by
    construction.
    """

    A: float
    mu1: float
    alpha: float
    beta: float
    gamma: float

    @property
    def mu2(self) -> float:
        return self.mu1 + self.alpha


@dataclass(frozen=True)
class StateTriple:
    """One point (S, I, R) of the positive orthant."""

    S: float
    I: float
    R: float

    def require_positive(self) -> None:
        if not (self.S > 0 and self.I > 0 and self.R > 0):
            raise ValueError(f"state must be strictly positive, got {self}")


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of parameter validation: empty violations means accepted."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_params(params: ModelParams) -> ValidationResult:
    """Accept iff every rate is strictly positive and finite.

    Each violated constraint is reported by field name, e.g. "A must be > 0".
    """
    violations = []
    for name in ("A", "mu1", "alpha", "beta", "gamma"):
        value = getattr(params, name)
        if not math.isfinite(value):
            violations.append(f"{name} must be finite")
        elif value <= 0:
            violations.append(f"{name} must be > 0")
    return ValidationResult(tuple(violations))


@dataclass(frozen=True)
class MomentConstants:
    """Constants of the second-moment (2p-th moment) bound for S + I.

    For exponent p >= 1/2:

        jump_moment       = integral of (1 + eta1 v eta2)^(2p) - 1 - eta1 ^ eta2
        moment_decay_rate = mu1 - (2p-1)/2 * max(sigma1^2, sigma2^2)
                            - jump_moment / (2p)
        envelope_peak     = sup over x > 0 of  A x^(2p-1) - decay/2 * x^(2p)
        log_jump_variance = max over kernels of integral of ln(1 + eta_i)^2

    (v = pointwise max, ^ = pointwise min.) When the decay rate is positive
    the 2p-th moment of S + I stays below

        (S0 + I0)^(2p) * exp(-p * decay * t) + 2 * envelope_peak / decay.

    With a non-positive decay rate the supremum is infinite and the bound is
    unavailable; envelope_peak is then reported as inf.
    """

    p: float
    jump_moment: float
    moment_decay_rate: float
    envelope_peak: float
    log_jump_variance: float

    @property
    def decay_rate_positive(self) -> bool:
        return self.moment_decay_rate > 0

    @property
    def stationary_bound(self) -> float:
        """Long-run ceiling 2 * envelope_peak / moment_decay_rate."""
        if not self.decay_rate_positive:
            return math.inf
        return 2.0 * self.envelope_peak / self.moment_decay_rate

    def bound_at(self, initial_mass: float, t: float) -> float:
        """Moment bound at time t for initial S + I = initial_mass."""
        if not self.decay_rate_positive:
            return math.inf
        decay = math.exp(-self.p * self.moment_decay_rate * t)
        return initial_mass ** (2.0 * self.p) * decay + self.stationary_bound


def _envelope_peak(A: float, decay: float, p: float) -> float:
    # sup over x > 0 of A x^(2p-1) - decay/2 * x^(2p); stationary point at
    # x* = A (2p-1) / (decay * p) for p > 1/2.
    if p == 0.5:
        return A if decay >= 0 else math.inf
    if decay <= 0:
        return math.inf
    x_star = A * (2.0 * p - 1.0) / (decay * p)
    return A * x_star ** (2.0 * p - 1.0) - 0.5 * decay * x_star ** (2.0 * p)


def compute_moment_constants(
    params: ModelParams, noise: NoiseSpec, p: float = 1.0
) -> MomentConstants:
    """Evaluate the moment-bound constants exactly from the atom weights.

    Args:
        params: model rates.
        noise: diffusion intensities and jump measure.
        p: moment exponent, must be >= 1/2 (default 1).

    Returns:
        MomentConstants for the given exponent. A non-positive decay rate is
        not an error here (it only disables the moment diagnostics), but it
        does make envelope_peak infinite.

    Raises:
        ValueError: if p < 1/2.
    """
    if p < 0.5:
        raise ValueError("moment exponent p must be >= 1/2")
    measure = noise.measure

    def integrand(atom):
        hi = max(atom.eta1, atom.eta2)
        lo = min(atom.eta1, atom.eta2)
        return (1.0 + hi) ** (2.0 * p) - 1.0 - lo

    jump_moment = measure.integrate(integrand)
    decay = (
        params.mu1
        - 0.5 * (2.0 * p - 1.0) * max(noise.sigma1**2, noise.sigma2**2)
        - jump_moment / (2.0 * p)
    )
    peak = _envelope_peak(params.A, decay, p)
    log_var = max(noise.log_jump_second_moment(i) for i in (1, 2, 3))
    return MomentConstants(
        p=p,
        jump_moment=jump_moment,
        moment_decay_rate=decay,
        envelope_peak=peak,
        log_jump_variance=log_var,
    )


def envelope_peak_by_grid(
    A: float, decay: float, p: float, x_max: float = 100.0, dx: float = 1e-4
) -> float:
    """Brute-force maximization of A x^(2p-1) - decay/2 * x^(2p) over (0, x_max].

    Independent cross-check for the closed-form envelope_peak.
    """
    x = np.arange(dx, x_max + dx, dx)
    g = A * x ** (2.0 * p - 1.0) - 0.5 * decay * x ** (2.0 * p)
    return float(g.max())


@dataclass(frozen=True)
class AssumptionReport:
    """Admissibility report for a (params, noise, p) configuration.

    The jump coefficients are linear in the state, so the local Lipschitz
    requirement on them holds structurally and is recorded as a fact rather
    than computed. The amplitude floor 1 + eta_i > 0 is enforced when the
    measure is built; violations listed here name the atom and kernel.
    """

    violations: tuple[str, ...]
    jump_penalties: tuple[float, float, float]
    constants: MomentConstants
    amplitude_floor_ok: bool = True
    lipschitz_structural: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations


def check_assumptions(
    params: ModelParams, noise: NoiseSpec, p: float = 1.0
) -> AssumptionReport:
    """Verify admissibility of the noise and collect the derived constants.

    Hard failures (amplitude floor, non-finite integrals) are listed in
    violations. A non-positive moment decay rate is reported through the
    constants but is not a hard failure: simulation stays meaningful, only
    the moment diagnostics are disabled.
    """
    violations: list[str] = []
    floor_ok = True
    for k, atom in enumerate(noise.measure.atoms):
        for i in (1, 2, 3):
            if 1.0 + atom.amplitude(i) <= 0.0:
                violations.append(f"1 + eta{i} <= 0 at atom {k}")
                floor_ok = False
    penalties = []
    for i in (1, 2, 3):
        try:
            penalties.append(noise.jump_penalty(i))
        except ValueError as err:
            violations.append(f"jump penalty integral for eta{i} failed: {err}")
            penalties.append(math.nan)
    constants = compute_moment_constants(params, noise, p)
    for name, value in (
        ("jump_moment", constants.jump_moment),
        ("log_jump_variance", constants.log_jump_variance),
    ):
        if not math.isfinite(value):
            violations.append(f"{name} is not finite")
    return AssumptionReport(
        violations=tuple(violations),
        jump_penalties=tuple(penalties),
        constants=constants,
        amplitude_floor_ok=floor_ok,
    )
