"""Finite jump measures and compound-Poisson sampling.

The jump driver is represented as a finite set of weighted atoms. Each atom
carries one amplitude per compartment (eta1 for S, eta2 for I, eta3 for R),
so every jump integral reduces to an exact weighted sum and jump events over
a time step form independent Poisson counts per atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class LevyAtom:
    """One weighted mark of the jump measure.

    The mark itself is an opaque label; all dynamics enter through the three
    amplitudes. Relative jump sizes must stay above -1 so that states remain
    positive after a jump.
    """

    weight: float
    eta1: float
    eta2: float
    eta3: float
    label: str = ""

    def amplitude(self, kernel_index: int) -> float:
        """Amplitude for kernel 1, 2 or 3."""
        return (self.eta1, self.eta2, self.eta3)[kernel_index - 1]


@dataclass(frozen=True)
class JumpBatch:
    """Jump events realized over one time step: (atom index, count) pairs."""

    events: tuple[tuple[int, int], ...] = ()

    def __bool__(self) -> bool:
        return bool(self.events)


class FiniteLevyMeasure:
    """Finite jump intensity measure given as weighted atoms.

    Invariants enforced at construction: every weight is strictly positive
    and finite, and 1 + eta_i > 0 at every atom for each kernel i (states
    stay in the positive orthant across jumps).
    """

    def __init__(self, atoms: Sequence[LevyAtom]):
        self.atoms: tuple[LevyAtom, ...] = tuple(atoms)
        for k, atom in enumerate(self.atoms):
            if not (math.isfinite(atom.weight) and atom.weight > 0):
                raise ValueError(f"weight must be > 0 and finite at atom {k}")
            for i in (1, 2, 3):
                eta = atom.amplitude(i)
                if not math.isfinite(eta):
                    raise ValueError(f"eta{i} must be finite at atom {k}")
                if 1.0 + eta <= 0.0:
                    raise ValueError(f"1 + eta{i} <= 0 at atom {k}")
        self.weights = np.array([a.weight for a in self.atoms], dtype=np.float64)
        # (n_atoms, 3): column i-1 holds the eta_i amplitudes
        self.amplitudes = np.array(
            [[a.eta1, a.eta2, a.eta3] for a in self.atoms], dtype=np.float64
        ).reshape(len(self.atoms), 3)

    def __repr__(self) -> str:
        return f"FiniteLevyMeasure({len(self.atoms)} atoms, mass={self.total_mass():g})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FiniteLevyMeasure) and self.atoms == other.atoms

    def total_mass(self) -> float:
        """Total jump intensity (events per unit time)."""
        return float(self.weights.sum()) if self.atoms else 0.0

    def integrate(self, f: Callable[[LevyAtom], float]) -> float:
        """Exact integral of a per-atom function: sum of weight * f(atom).

        Raises:
            ValueError: if f evaluates to a non-finite value at some atom.
        """
        total = 0.0
        for k, atom in enumerate(self.atoms):
            value = float(f(atom))
            if not math.isfinite(value):
                raise ValueError(f"integrand is not finite at atom {k}")
            total += atom.weight * value
        return total

    def kernel_integral(self, g: Callable[[float], float], kernel_index: int) -> float:
        """Integral of g(eta_i(u)) over the measure, for kernel i."""
        return self.integrate(lambda atom: g(atom.amplitude(kernel_index)))

    def sample_jump_batch(self, dt: float, rng: np.random.Generator) -> JumpBatch:
        """Draw the jump events over a step of length dt.

        Counts are independent Poisson(weight * dt) per atom; dt == 0 yields
        an empty batch. Samples deterministically given the rng state.
        """
        if dt < 0:
            raise ValueError("dt must be >= 0")
        if dt == 0.0 or not self.atoms:
            return JumpBatch()
        counts = rng.poisson(self.weights * dt)
        events = tuple(
            (k, int(c)) for k, c in enumerate(np.atleast_1d(counts)) if c > 0
        )
        return JumpBatch(events)


def pure_diffusion_measure() -> FiniteLevyMeasure:
    """Measure with no atoms (diffusion-only model)."""
    return FiniteLevyMeasure(())


def single_atom_measure(
    eta1: float, eta2: float, eta3: float, weight: float = 1.0
) -> FiniteLevyMeasure:
    """Convenience constructor for the common one-atom configuration."""
    return FiniteLevyMeasure((LevyAtom(weight, eta1, eta2, eta3),))


@dataclass(frozen=True)
class NoiseSpec:
    """Diffusion intensities plus the jump measure.

    sigma1, sigma2, sigma3 scale the Brownian drivers of S, I and R; the
    measure carries the jump amplitudes. All sigmas must be finite and >= 0.
    """

    sigma1: float
    sigma2: float
    sigma3: float
    measure: FiniteLevyMeasure = field(default_factory=pure_diffusion_measure)

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "sigma3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be >= 0 and finite")

    def sigma(self, kernel_index: int) -> float:
        return (self.sigma1, self.sigma2, self.sigma3)[kernel_index - 1]

    def jump_penalty(self, kernel_index: int) -> float:
        """Integral of eta_i - ln(1 + eta_i): the log-space drift cost of jumps.

        Non-negative for every admissible kernel since x - ln(1+x) >= 0 on
        x > -1.
        """
        return self.measure.kernel_integral(lambda e: e - math.log1p(e), kernel_index)

    def jump_mean(self, kernel_index: int) -> float:
        """Integral of eta_i: mean relative jump displacement per unit time."""
        return self.measure.kernel_integral(lambda e: e, kernel_index)

    def log_jump_mean(self, kernel_index: int) -> float:
        """Integral of ln(1 + eta_i): mean log displacement of jumps per unit time."""
        return self.measure.kernel_integral(math.log1p, kernel_index)

    def log_jump_second_moment(self, kernel_index: int) -> float:
        """Integral of ln(1 + eta_i)^2: quadratic variation rate of the jump log."""
        return self.measure.kernel_integral(lambda e: math.log1p(e) ** 2, kernel_index)


def zero_noise() -> NoiseSpec:
    """No diffusion and no jumps: the deterministic model."""
    return NoiseSpec(0.0, 0.0, 0.0, pure_diffusion_measure())
