"""Spectral certification of Ornstein-Uhlenbeck drift matrices.

The diffusion under study is ``dX = -B X dt + sqrt(2 D) dW`` with generator
``L f = -(Bx).grad f + div(D grad f)``.  Its long-time behaviour is governed
by three integers/reals extracted from ``(B, D)``:

* ``rho``    - the spectral abscissa, ``min Re sigma(B)``;
* ``big_n``  - the largest Jordan block among eigenvalues achieving ``rho``;
* ``(M, r)`` - the Kalman certificate: smallest ``M`` with
  ``sum_{k<=M} B^k D (B^T)^k >= r > 0``, which certifies hypoellipticity.

Everything here is a pure function of immutable inputs and may be called
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NumericalFailureError

__all__ = [
    "DriftSpec",
    "SpectralCertificate",
    "KalmanResult",
    "spectral_abscissa",
    "critical_jordan_index",
    "rank_staircase",
    "kalman_certificate",
    "decay_envelope",
    "coercivity_profile",
    "certify",
]

#: default relative tolerance for all rank / eigenvalue decisions
DEFAULT_TOL = 1e-9

_SYM_RTOL = 1e-12  # required relative symmetry of D
_PSD_RTOL = 1e-12  # allowed relative negativity of D's spectrum


def _as_square_matrix(A, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"{name}: expected a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        raise InvalidArgumentError(f"{name}: empty matrix")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError(f"{name}: entries must be finite")
    return A


def _check_symmetric_psd(A: np.ndarray, name: str) -> np.ndarray:
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > _SYM_RTOL * max(scale, 1e-300):
        raise InvalidArgumentError(f"{name}: matrix is not symmetric to relative 1e-12")
    A = 0.5 * (A + A.T)
    w = np.linalg.eigvalsh(A)
    if w.size and w[0] < -_PSD_RTOL * max(abs(w[-1]), 1e-300):
        raise InvalidArgumentError(
            f"{name}: matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})"
        )
    return A


def _freeze(A: np.ndarray) -> np.ndarray:
    A = np.array(A, dtype=float)
    A.flags.writeable = False
    return A


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Drift matrix ``B`` and diffusion matrix ``D`` of a linear diffusion.

    ``D`` must be symmetric positive semidefinite (within 1e-12 relative);
    both matrices are stored read-only.
    """

    B: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        B = _as_square_matrix(self.B, "B")
        D = _as_square_matrix(self.D, "D")
        if D.shape != B.shape:
            raise InvalidArgumentError(
                f"D: shape {D.shape} does not match B shape {B.shape}"
            )
        D = _check_symmetric_psd(D, "D")
        object.__setattr__(self, "B", _freeze(B))
        object.__setattr__(self, "D", _freeze(D))

    @property
    def dim(self) -> int:
        return self.B.shape[0]

    def to_json(self) -> dict:
        return {"B": self.B.tolist(), "D": self.D.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "DriftSpec":
        if not isinstance(data, dict) or "B" not in data or "D" not in data:
            raise InvalidArgumentError("DriftSpec JSON must contain keys 'B' and 'D'")
        return cls(B=data["B"], D=data["D"])


class KalmanResult(NamedTuple):
    hypoelliptic: bool
    brackets: int  # number of commutators needed (0 when D is elliptic)
    reach: float   # smallest eigenvalue of the final Kalman sum


@dataclass(frozen=True)
class SpectralCertificate:
    """Summary of the decay structure of a drift spec.

    ``rank_margins`` records, for each staircase level of the winning
    critical eigenvalue, the smallest retained singular value divided by the
    rank threshold.  Values close to 1 flag a fragile Jordan decision.
    """

    rho: float
    big_n: int
    hypoelliptic: bool
    brackets: int
    reach: float
    rank_margins: tuple[float, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "rho": self.rho,
            "big_n": self.big_n,
            "hypoelliptic": self.hypoelliptic,
            "brackets": self.brackets,
            "reach": self.reach,
            "rank_margins": list(self.rank_margins),
        }


def _eigvals(B: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.eigvals(B)
    except Exception as exc:  # LAPACK non-convergence
        raise NumericalFailureError(f"eigenvalue computation failed: {exc}") from exc


def spectral_abscissa(spec: DriftSpec) -> float:
    """Smallest real part over the spectrum of ``B``."""
    return float(_eigvals(spec.B).real.min())


def _cluster_eigenvalues(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group eigenvalues that agree up to sqrt(tol)*(1+|lambda|).

    Defective eigenvalues of a size-k block scatter like eps**(1/k) under
    round-off, so exact comparisons are meaningless; sqrt(tol) absorbs the
    scatter of the block sizes this toolkit certifies while keeping genuinely
    distinct eigenvalues (separated by >> sqrt(tol)) apart.  The cluster mean
    is a far better eigenvalue estimate than any member (the scatter is
    nearly centred).
    """
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    thr = math.sqrt(tol)
    for i in range(n):
        for j in range(i + 1, n):
            gap = abs(values[i] - values[j])
            if gap <= thr * (1.0 + max(abs(values[i]), abs(values[j]))):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [values[idx] for idx in groups.values()]


def _power_rank(
    s: np.ndarray, tol: float, d: int, level: int, m_norm: float
) -> tuple[int, float]:
    """Numerical rank of the ``level``-th power from its singular values.

    The threshold is ``tol * sigma_max * dim`` but never below the round-off
    floor ``16 * dim * level * eps * ||M||^level``: a power whose largest
    singular value sits at that floor is the zero matrix up to accumulated
    rounding (the factor 16 covers the constants of the product-error
    bound), and judging it relative to its own (pure noise) sigma_max would
    wrongly report full rank.
    """
    floor = 16.0 * d * level * np.finfo(float).eps * m_norm ** level
    if s[0] <= floor:
        return 0, math.inf
    thr = max(tol * s[0] * d, floor)
    rank = int(np.count_nonzero(s > thr))
    margin = math.inf if rank == 0 else float(s[rank - 1] / thr)
    return rank, margin


def rank_staircase(
    B: np.ndarray, lam: complex, tol: float = DEFAULT_TOL, max_level: int | None = None
) -> tuple[list[int], list[float]]:
    """Kernel dimensions of ``(B - lam I)^k`` for k = 1, 2, ... until stable.

    Rank decisions use singular values with threshold ``tol * sigma_max * dim``
    recomputed at every power (with a round-off floor, see ``_power_rank``).
    Returns ``(dims, margins)`` where ``dims[k-1]`` is
    ``dim ker (B - lam I)^k`` and ``margins[k-1]`` is the smallest retained
    singular value over the threshold (``inf`` when the power vanishes).
    """
    if tol <= 0.0:
        raise InvalidArgumentError(f"tol: must be positive, got {tol}")
    B = np.asarray(B)
    d = B.shape[0]
    M = B.astype(complex) - complex(lam) * np.eye(d)
    m_norm = float(np.linalg.norm(M, 2))
    dims: list[int] = []
    margins: list[float] = []
    P = np.eye(d, dtype=complex)
    prev = 0
    limit = d if max_level is None else min(max_level, d)
    for level in range(1, limit + 1):
        P = P @ M
        try:
            s = scipy.linalg.svdvals(P)
        except Exception as exc:
            raise NumericalFailureError(f"SVD failed in rank staircase: {exc}") from exc
        if s[0] == 0.0:
            rank, margin = 0, math.inf
        else:
            rank, margin = _power_rank(s, tol, d, level, m_norm)
        dims.append(d - rank)
        margins.append(margin)
        if dims[-1] == prev:
            break
        prev = dims[-1]
    return dims, margins


def _staircase_block_size(dims: Sequence[int]) -> int:
    size = 0
    prev = 0
    for k, dk in enumerate(dims, start=1):
        if dk > prev:
            size = k
        prev = dk
    return max(size, 1)


def _critical_clusters(ev: np.ndarray, tol: float) -> list[np.ndarray]:
    """Clusters of eigenvalues whose real part achieves the abscissa.

    Clustering happens first, over all eigenvalues, so that the round-off
    scatter of a defective eigenvalue collapses onto its mean; criticality
    is then decided on the cluster means with the same sqrt(tol) scatter
    allowance used by the clustering itself (a raw ``tol`` window would be
    narrower than the scatter and split defective groups).
    """
    clusters = _cluster_eigenvalues(ev, tol)
    means = [complex(c.mean()) for c in clusters]
    rho = min(m.real for m in means)
    window = math.sqrt(tol) * (1.0 + abs(rho))
    return [c for c, m in zip(clusters, means) if m.real <= rho + window]


def critical_jordan_index(spec: DriftSpec, tol: float = DEFAULT_TOL) -> int:
    """Largest Jordan block size among eigenvalues with ``Re = rho``.

    Eigenvalues achieving the abscissa (up to the scatter tolerance) form
    the critical set; within it, eigenvalues are clustered (conjugate pairs
    and round-off scatter collapse onto their mean) and the rank staircase
    of ``(B - lam I)^k`` is walked over the complex field.
    """
    if tol <= 0.0:
        raise InvalidArgumentError(f"tol: must be positive, got {tol}")
    ev = _eigvals(spec.B)
    best = 1
    for cluster in _critical_clusters(ev, tol):
        lam = complex(cluster.mean())
        # no multiplicity cap: the staircase stalls by itself, and capping
        # would turn a split cluster into an undercounted block
        dims, _ = rank_staircase(spec.B, lam, tol)
        best = max(best, _staircase_block_size(dims))
    return best


def kalman_certificate(spec: DriftSpec, max_brackets: int | None = None) -> KalmanResult:
    """Hypoellipticity test via the Kalman sum ``sum_k B^k D (B^T)^k``.

    Returns the smallest ``M <= max_brackets`` making the partial sum
    strictly positive definite, together with its smallest eigenvalue ``r``.
    ``max_brackets`` defaults to ``dim - 1``; by Cayley-Hamilton further
    terms cannot enlarge the range, so that default is conclusive.
    """
    d = spec.dim
    if max_brackets is None:
        max_brackets = d - 1
    if max_brackets < 0:
        raise InvalidArgumentError(f"max_brackets: must be >= 0, got {max_brackets}")
    B, D = spec.B, spec.D
    term = D.copy()
    total = D.copy()
    for m in range(max_brackets + 1):
        if m > 0:
            term = B @ term @ B.T
            total += term
        sym = 0.5 * (total + total.T)
        w = np.linalg.eigvalsh(sym)
        r = float(w[0])
        if r > DEFAULT_TOL * max(float(w[-1]), 1e-300):
            return KalmanResult(True, m, r)
    return KalmanResult(False, max_brackets, r)


def decay_envelope(rho: float, big_n: int, t) -> np.ndarray | float:
    """Decay envelope ``(1 + t^(2(N-1))) * exp(-2 rho t)``.

    For ``big_n == 1`` the power term is the constant 1 (``t**0 == 1`` at
    every ``t`` including 0), so the envelope is ``2 exp(-2 rho t)``; the
    factor 2 is part of the convention, not a bug.
    """
    if big_n < 1:
        raise InvalidArgumentError(f"big_n: must be >= 1, got {big_n}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise InvalidArgumentError("t: must be nonnegative")
    # t**0 == 1 in IEEE semantics, which is exactly the convention wanted here
    out = (1.0 + t_arr ** (2 * (big_n - 1))) * np.exp(-2.0 * rho * t_arr)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def coercivity_profile(kappa: float, brackets: int, t) -> np.ndarray | float:
    """Sub-exponential decay profile ``exp(-kappa t (1 - e^-t)^(2M))``.

    ``M = brackets`` counts the commutators needed to certify
    hypoellipticity; for ``M == 0`` the profile is plain ``exp(-kappa t)``,
    and for any ``M`` it behaves like ``exp(-kappa t)`` once ``t >> 1``.
    """
    if kappa <= 0.0:
        raise InvalidArgumentError(f"kappa: must be positive, got {kappa}")
    if brackets < 0:
        raise InvalidArgumentError(f"brackets: must be >= 0, got {brackets}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise InvalidArgumentError("t: must be nonnegative")
    out = np.exp(-kappa * t_arr * (-np.expm1(-t_arr)) ** (2 * brackets))
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def certify(
    spec: DriftSpec, tol: float = DEFAULT_TOL, max_brackets: int | None = None
) -> SpectralCertificate:
    """Assemble the full spectral certificate for a drift spec."""
    if tol <= 0.0:
        raise InvalidArgumentError(f"tol: must be positive, got {tol}")
    ev = _eigvals(spec.B)
    rho = float(ev.real.min())
    best, best_margins = 1, ()
    for cluster in _critical_clusters(ev, tol):
        lam = complex(cluster.mean())
        dims, margins = rank_staircase(spec.B, lam, tol)
        size = _staircase_block_size(dims)
        if size >= best:
            best, best_margins = size, tuple(margins)
    kal = kalman_certificate(spec, max_brackets)
    return SpectralCertificate(
        rho=rho,
        big_n=best,
        hypoelliptic=kal.hypoelliptic,
        brackets=kal.brackets,
        reach=kal.reach,
        rank_margins=best_margins,
    )
