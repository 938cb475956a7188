"""Shared fixtures: reference drift specs and random-problem generators."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from hypoco import DriftSpec


def kinetic_drift() -> np.ndarray:
    """Position-velocity pair with quarter-strength restoring force.

    Defective: double eigenvalue 1/2 in a single 2x2 Jordan block, so the
    abscissa is 1/2 with critical index 2; noise acts on the velocity only.
    """
    return np.array([[0.0, -1.0], [0.25, 1.0]])


def kinetic_diffusion() -> np.ndarray:
    return np.diag([0.0, 1.0])


@pytest.fixture
def kinetic_spec() -> DriftSpec:
    return DriftSpec(B=kinetic_drift(), D=kinetic_diffusion())


def random_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def random_stable_pair(rng: np.random.Generator, d: int, floor: float = 0.3):
    """Random drift with abscissa >= floor and a random full-rank PSD diffusion."""
    B = rng.standard_normal((d, d))
    shift = floor - np.linalg.eigvals(B).real.min()
    B = B + shift * np.eye(d)
    G = rng.standard_normal((d, d))
    D = G @ G.T + 0.5 * np.eye(d)
    return B, D


def planted_jordan(rng: np.random.Generator, block_sizes, eigenvalues):
    """Orthogonal similarity of a block-diagonal Jordan matrix.

    Orthogonal transforms keep the eigenvalue scatter of a size-k block at
    the bare eps**(1/k) level, which the default clustering tolerance
    absorbs for the sizes used in these tests (k <= 3).
    """
    blocks = []
    for size, lam in zip(block_sizes, eigenvalues):
        J = lam * np.eye(size) + np.diag(np.ones(size - 1), 1) if size > 1 else np.array([[lam]])
        blocks.append(J)
    J = scipy.linalg.block_diag(*blocks)
    Q = random_orthogonal(rng, J.shape[0])
    return Q @ J @ Q.T
