import numpy as np
import pytest

from levysir import (
    LevyAtom,
    FiniteLevyMeasure,
    ModelParams,
    NoiseSpec,
    SimConfig,
    StateTriple,
)

# Baseline experiment: weakly supercritical unless A is lowered to 0.08.
BASE_A = 0.09
EXTINCT_A = 0.08


def make_params(A=BASE_A):
    return ModelParams(A=A, mu1=0.05, alpha=0.04, beta=0.06, gamma=0.01)


def make_noise(eta=(0.05, 0.02, 0.01), sigmas=(0.02, 0.08, 0.01), weight=1.0):
    measure = FiniteLevyMeasure([LevyAtom(weight, *eta)])
    return NoiseSpec(*sigmas, measure=measure)


def make_config(A=BASE_A, t_end=700.0, dt=0.01, seed=42, record_stride=100,
                couple_aux=False, noise=None):
    return SimConfig(
        params=make_params(A),
        noise=noise if noise is not None else make_noise(),
        initial=StateTriple(0.4, 0.3, 0.1),
        t_end=t_end,
        dt=dt,
        seed=seed,
        record_stride=record_stride,
        couple_aux=couple_aux,
    )


@pytest.fixture
def params():
    return make_params()


@pytest.fixture
def noise():
    return make_noise()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
