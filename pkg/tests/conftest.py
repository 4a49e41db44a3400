"""Shared fixtures: the pinned random system battery and helper systems."""

import numpy as np
import pytest

from fracctrl import FracSystem, kalman_rank

# Pinned battery seed: chosen so that no controllable draw lands inside the
# numerical gray zone around the Gramian rcond threshold (1e-8) at either
# test horizon, where the double-precision rank<->Gramian equivalence is
# undecidable.  See notes in the repository docs for the margin measurement.
BATTERY_SEED = 18
ALPHAS = (0.3, 0.5, 0.7, 0.9)
HORIZONS = (1.0, 5.0)


def make_battery(count=20, seed=BATTERY_SEED):
    """Random controllable systems (n <= 3, m <= 2, entries in [-1, 1]) with
    cycling orders and horizons, plus steering endpoints."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        A = rng.uniform(-1.0, 1.0, (n, n))
        B = rng.uniform(-1.0, 1.0, (n, m))
        if kalman_rank(FracSystem(A, B, alpha=0.5)).rank < n:
            continue
        a = rng.uniform(-1.0, 1.0, n)
        b = rng.uniform(-1.0, 1.0, n)
        k = len(out)
        sys = FracSystem(A, B, alpha=ALPHAS[k % 4])
        out.append((sys, a, b, HORIZONS[k % 2]))
    return out


def make_uncontrollable(count=10, seed=7):
    """Systems with an unreachable direction by construction (block-triangular
    in a random orthogonal basis with a zeroed input row)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(2, 4))
        A = rng.uniform(-1.0, 1.0, (n, n))
        B = rng.uniform(-1.0, 1.0, (n, 1))
        V = np.linalg.qr(rng.uniform(-1.0, 1.0, (n, n)))[0]
        Ad = V.T @ A @ V
        Ad[-1, :-1] = 0.0
        Bd = V.T @ B
        Bd[-1] = 0.0
        A2 = V @ Ad @ V.T
        B2 = V @ Bd
        sys = FracSystem(A2, B2, alpha=ALPHAS[len(out) % 4])
        if kalman_rank(sys).rank == n:
            continue
        out.append(sys)
    return out


@pytest.fixture(scope="session")
def battery():
    return make_battery()


@pytest.fixture(scope="session")
def uncontrollable_battery():
    return make_uncontrollable()


@pytest.fixture
def example1_system():
    return FracSystem(np.array([[0.0, 1.0], [0.0, 0.0]]),
                      np.array([[0.0], [1.0]]), alpha=0.5)


@pytest.fixture
def example2_system():
    return FracSystem(np.array([[0.0, 1.0], [-1.0, 0.0]]),
                      np.array([[0.0], [1.0]]), alpha=0.5)


@pytest.fixture
def scalar_system():
    def make(alpha):
        return FracSystem(np.zeros((1, 1)), np.ones((1, 1)), alpha=alpha)

    return make
