"""Closed-form epidemic thresholds and regime classification.

The deterministic model persists iff the basic reproduction number

    R0 = beta * A / (mu1 * (mu2 + gamma))

exceeds 1. Under diffusion and jumps on the infected class the relevant
quantity becomes the stochastic threshold

    T = (mu2 + gamma)^-1 * (beta * A / mu1 - sigma2^2 / 2 - P2),

where P2 is the jump penalty integral of eta2 (eta - ln(1+eta) against the
jump measure). Noise only subtracts, so T <= R0 with equality iff sigma2 = 0
and eta2 vanishes. T > 1 gives an ergodic stationary regime, T < 1 gives
almost-sure exponential extinction of I at predicted rate
(mu2 + gamma) * (T - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

from .levy import NoiseSpec
from .model import ModelParams

DEFAULT_MARGIN = 1e-6


def basic_reproduction_number(params: ModelParams) -> float:
    """R0 = beta * A / (mu1 * (mu2 + gamma))."""
    return params.beta * params.A / (params.mu1 * (params.mu2 + params.gamma))


def stochastic_threshold(params: ModelParams, noise: NoiseSpec) -> float:
    """Noise-penalized threshold; only sigma2 and eta2 enter."""
    penalty = noise.jump_penalty(2)
    return (
        params.beta * params.A / params.mu1 - 0.5 * noise.sigma2**2 - penalty
    ) / (params.mu2 + params.gamma)


def extinction_exponent(params: ModelParams, noise: NoiseSpec) -> float:
    """Predicted asymptotic slope of ln I(t) / t: (mu2 + gamma) * (T - 1).

    Negative in the extinct regime; in the ergodic regime it is only an
    upper bound on the slope, not an extinction prediction.
    """
    t = stochastic_threshold(params, noise)
    return (params.mu2 + params.gamma) * (t - 1.0)


def extinction_exponent_alt(params: ModelParams, noise: NoiseSpec) -> float:
    """Slope with the alternative prefactor (mu2 - gamma), for cross-checking."""
    t = stochastic_threshold(params, noise)
    return (params.mu2 - params.gamma) * (t - 1.0)


def classify(threshold: float, margin: float = DEFAULT_MARGIN) -> str:
    """Map a threshold value to "ergodic", "extinct" or "critical".

    "critical" flags values within +-margin of 1, where neither asymptotic
    claim applies.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if threshold > 1.0 + margin:
        return "ergodic"
    if threshold < 1.0 - margin:
        return "extinct"
    return "critical"


@dataclass(frozen=True)
class ThresholdReport:
    """Threshold values with the implied regime."""

    r0: float
    t0s: float
    extinction_exponent: float
    extinction_exponent_alt: float
    regime: str


def threshold_report(
    params: ModelParams, noise: NoiseSpec, margin: float = DEFAULT_MARGIN
) -> ThresholdReport:
    t = stochastic_threshold(params, noise)
    return ThresholdReport(
        r0=basic_reproduction_number(params),
        t0s=t,
        extinction_exponent=(params.mu2 + params.gamma) * (t - 1.0),
        extinction_exponent_alt=(params.mu2 - params.gamma) * (t - 1.0),
        regime=classify(t, margin),
    )
