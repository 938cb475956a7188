"""Distorted-norm machinery for non-normal stable drifts.

A stable but non-normal drift ``B`` contracts no Euclidean ball, yet for a
well chosen symmetric positive definite ``P`` the weighted quadratic form
``x^T P x`` decays at a rate arbitrarily close to the spectral abscissa:

    P B + B^T P >= 2 kappa P,   kappa >= rho - C eps,

where ``P`` is assembled from an eps-scaled (generalized) eigenbasis of
``B``.  The price is a condition number of ``P`` that blows up as eps -> 0
on defective matrices; both sides of that trade-off are reported.

The module also evaluates the explicit rate formulas used by the coercivity
profiles: the Poincare-boosted rate ``2 rho / (1 + beta c)`` and the
astronomically large worst-case constants ``c_* = (100/lambda (N_c^2 +
Lambda^2/lambda + m))^{20 N_c^2}``, ``kappa_* = rho / (c_* K)`` kept in
log10 space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NumericalFailureError
from .spectra import (
    DEFAULT_TOL,
    _as_square_matrix,
    _cluster_eigenvalues,
    _freeze,
    _power_rank,
)

__all__ = [
    "DistortionCertificate",
    "HypocoerciveRate",
    "ExplicitConstants",
    "build_distortion",
    "verify_lmi",
    "hypocoercive_rate",
    "explicit_constants",
]

_OVERFLOW_LOG10 = 300.0


@dataclass(frozen=True, eq=False)
class DistortionCertificate:
    """Distortion matrix ``P`` with its certified contraction rate.

    ``kappa`` is the largest rate with ``P B + B^T P >= 2 kappa P``;
    ``cond_p`` is the 2-norm condition number of ``P`` and ``epsilon`` the
    nilpotent scaling used in the construction.
    """

    P: np.ndarray
    kappa: float
    cond_p: float
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "P", _freeze(self.P))

    def to_json(self) -> dict:
        return {
            "P": self.P.tolist(),
            "kappa": self.kappa,
            "cond_p": self.cond_p,
            "epsilon": self.epsilon,
        }


class HypocoerciveRate(NamedTuple):
    rate: float
    prefactor: float


def _jordan_chains(B: np.ndarray, tol: float) -> list[list[np.ndarray]]:
    """Jordan chains of ``B`` grouped over clustered eigenvalues.

    Each chain is ``[v_1, ..., v_k]`` with ``B v_1 = lam v_1`` and
    ``B v_j = lam v_j + v_{j-1}``.  Seeds are chosen orthonormal to the
    lower kernel and to chains already passing through the level, which
    keeps the basis as well conditioned as the eigenvalue geometry allows.
    """
    d = B.shape[0]
    ev, vecs = scipy.linalg.eig(B)
    chains: list[list[np.ndarray]] = []
    for cluster_vals in _cluster_eigenvalues(ev, tol):
        m = len(cluster_vals)
        if m == 1:
            # simple eigenvalue: LAPACK's eigenvector is already fine
            idx = int(np.argmin(np.abs(ev - cluster_vals[0])))
            chains.append([vecs[:, idx].astype(complex)])
            continue
        lam = complex(cluster_vals.mean())
        M = B.astype(complex) - lam * np.eye(d)
        m_norm = float(np.linalg.norm(M, 2))
        kernels: list[np.ndarray] = [np.zeros((d, 0), dtype=complex)]
        dims = [0]
        P = np.eye(d, dtype=complex)
        level = 0
        while dims[-1] < m and level < d:
            level += 1
            P = P @ M
            U, s, Vh = scipy.linalg.svd(P)
            rank = 0 if s[0] == 0.0 else _power_rank(s, tol, d, level, m_norm)[0]
            kernels.append(Vh[rank:].conj().T)
            if d - rank == dims[-1]:
                break
            dims.append(d - rank)
        if dims[-1] != m:
            raise NumericalFailureError(
                f"could not resolve a Jordan basis near eigenvalue {lam:.6g} "
                f"(kernel reached dimension {dims[-1]} of multiplicity {m})"
            )
        depth = len(dims) - 1
        cluster_chains: list[list[np.ndarray]] = []
        for k in range(depth, 0, -1):
            have = sum(1 for c in cluster_chains if len(c) >= k)
            want = (dims[k] - dims[k - 1]) - have
            if want <= 0:
                continue
            avoid_cols = [kernels[k - 1]] + [
                c[k - 1][:, None] for c in cluster_chains if len(c) >= k
            ]
            A = np.concatenate(avoid_cols, axis=1)
            if A.shape[1]:
                Q, _ = np.linalg.qr(A)
                resid = kernels[k] - Q @ (Q.conj().T @ kernels[k])
            else:
                resid = kernels[k]
            Us, ss, _ = scipy.linalg.svd(resid, full_matrices=False)
            if np.count_nonzero(ss > 0.1) < want:
                raise NumericalFailureError(
                    f"Jordan seed extraction failed at level {k} for eigenvalue {lam:.6g}"
                )
            for col in range(want):
                seed = Us[:, col]
                chain = [seed]
                for _ in range(k - 1):
                    chain.append(M @ chain[-1])
                chain.reverse()  # chain[0] is the eigenvector end
                cluster_chains.append(chain)
        chains.extend(cluster_chains)
    if sum(len(c) for c in chains) != d:
        raise NumericalFailureError("Jordan chains do not span the whole space")
    return chains


def build_distortion(
    B, epsilon: float, tol: float = DEFAULT_TOL
) -> DistortionCertificate:
    """Construct the eps-scaled distortion matrix for a stable drift.

    The scaled basis ``V`` has one column ``eps^(j-1) v_j`` per chain vector,
    so that ``V^{-1} B V`` is a Jordan form with ``eps`` on the
    superdiagonal; ``P = (V V^*)^{-1}`` (equivalently ``V^{-T} V^{-1}`` built
    from the dual basis of left eigenvectors of ``B``, i.e. eigenvectors of
    ``B^T``).  Then ``P B + B^T P >= 2 (rho - eps) P``, with equality
    ``kappa = rho`` whenever ``B`` is diagonalizable, since no scaling is
    involved.  Conjugate eigenvalue pairs contribute conjugate chains, so
    ``P`` is real.
    """
    B = _as_square_matrix(B, "B")
    if not 0.0 < epsilon < 1.0:
        raise InvalidArgumentError(f"epsilon: must lie in (0, 1), got {epsilon}")
    rho = float(np.linalg.eigvals(B).real.min())
    if rho <= 0.0:
        raise InvalidArgumentError(
            f"B: spectral abscissa must be positive, got {rho:.6g}"
        )
    cols = []
    for chain in _jordan_chains(B, tol):
        scale = np.linalg.norm(chain[0])
        if scale <= 0.0 or not np.isfinite(scale):
            raise NumericalFailureError("degenerate Jordan chain (zero eigenvector)")
        for j, v in enumerate(chain):
            cols.append((epsilon ** j) * v / scale)
    V = np.column_stack(cols)
    M = V @ V.conj().T
    if np.linalg.norm(M.imag) > 1e-10 * np.linalg.norm(M.real):
        raise NumericalFailureError("distortion matrix has a non-real part")
    M = M.real
    try:
        P = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"scaled basis is numerically singular: {exc}") from exc
    P = 0.5 * (P + P.T)
    # kappa via the generalized symmetric pencil sym(PB) u = kappa P u; this
    # is deliberately a different code path from verify_lmi
    S = 0.5 * (P @ B + B.T @ P)
    try:
        kappa = float(scipy.linalg.eigh(S, P, eigvals_only=True)[0])
    except Exception as exc:
        raise NumericalFailureError(f"generalized eigensolve failed: {exc}") from exc
    return DistortionCertificate(
        P=P, kappa=kappa, cond_p=float(np.linalg.cond(P)), epsilon=float(epsilon)
    )


def verify_lmi(P, B) -> float:
    """Largest ``kappa`` with ``P B + B^T P >= 2 kappa P``.

    Evaluated explicitly as the smallest eigenvalue of
    ``1/2 P^{-1/2} (P B + B^T P) P^{-1/2}``; independent of (and a check on)
    :func:`build_distortion`, which solves a generalized pencil instead.
    """
    P = _as_square_matrix(P, "P")
    B = _as_square_matrix(B, "B")
    if B.shape != P.shape:
        raise InvalidArgumentError("P and B must have the same shape")
    if np.linalg.norm(P - P.T) > 1e-10 * max(np.linalg.norm(P), 1e-300):
        raise InvalidArgumentError("P: must be symmetric")
    w, U = np.linalg.eigh(0.5 * (P + P.T))
    if w[0] <= 0.0:
        raise InvalidArgumentError("P: must be positive definite")
    inv_half = (U * (1.0 / np.sqrt(w))) @ U.T
    S = 0.5 * (P @ B + B.T @ P)
    A = inv_half @ S @ inv_half
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def hypocoercive_rate(rho: float, beta: float, c: float) -> HypocoerciveRate:
    """Decay obtained by trading a functional inequality against coercivity.

    A reference inequality with constant ``c`` and a defect parameter
    ``beta`` degrade the bare rate ``2 rho`` to ``2 rho / (1 + beta c)``
    at the price of the prefactor ``1 + beta c``; as ``beta -> 0`` the
    coercive case ``(2 rho, 1)`` is recovered.
    """
    if rho <= 0.0 or beta <= 0.0 or c <= 0.0:
        raise InvalidArgumentError("rho, beta, c must all be positive")
    prefactor = 1.0 + beta * c
    return HypocoerciveRate(rate=2.0 * rho / prefactor, prefactor=prefactor)


@dataclass(frozen=True)
class ExplicitConstants:
    """Worst-case constants of the general coercivity estimate.

    ``c_star`` is reported in log10 alongside the float value; past 1e300
    the float is ``inf`` and ``overflow`` is set.  ``kappa_star`` underflows
    to 0.0 in the same regime, so its log10 is authoritative.
    """

    c_star: float
    c_star_log10: float
    overflow: bool
    kappa_star: float
    kappa_star_log10: float
    eps_star: float
    b1: float
    b2: float
    b3: float

    def to_json(self) -> dict:
        return {
            "c_star": self.c_star,
            "c_star_log10": self.c_star_log10,
            "overflow": self.overflow,
            "kappa_star": self.kappa_star,
            "kappa_star_log10": self.kappa_star_log10,
            "eps_star": self.eps_star,
            "b1": self.b1,
            "b2": self.b2,
            "b3": self.b3,
        }


def explicit_constants(
    nc: int, lam: float, big_lambda: float, m: float, rho: float, big_k: float
) -> ExplicitConstants:
    """Evaluate the explicit constants of the iterated-commutator estimate.

    Inputs follow the normalization ``rho, lam <= 1 <= big_lambda, big_k, m``
    (always reachable by rescaling); ``nc >= 1`` is the commutator depth.
    Formulas::

        eps_star  = lam / (10 m nc)
        b1        = 7 (nc^2 + big_lambda^2 / lam + m)
        b2        = lam / 2
        b3        = 3 big_lambda^2 / lam
        c_star    = (100/lam (nc^2 + big_lambda^2/lam + m))^(20 nc^2)
        kappa_star = rho / (c_star big_k)

    ``c_star`` is computed in log space so that it stays printable for any
    ``nc``; these are valid certified choices, not sharp ones.
    """
    if nc < 1 or int(nc) != nc:
        raise InvalidArgumentError(f"nc: must be an integer >= 1, got {nc}")
    if not 0.0 < rho <= 1.0:
        raise InvalidArgumentError(f"rho: normalization requires 0 < rho <= 1, got {rho}")
    if not 0.0 < lam <= 1.0:
        raise InvalidArgumentError(f"lam: normalization requires 0 < lam <= 1, got {lam}")
    if big_lambda < 1.0:
        raise InvalidArgumentError(f"big_lambda: normalization requires >= 1, got {big_lambda}")
    if m < 1.0:
        raise InvalidArgumentError(f"m: normalization requires >= 1, got {m}")
    if big_k < 1.0:
        raise InvalidArgumentError(f"big_k: normalization requires >= 1, got {big_k}")
    nc = int(nc)
    bulk = nc ** 2 + big_lambda ** 2 / lam + m
    c_log10 = 20.0 * nc ** 2 * math.log10(100.0 / lam * bulk)
    overflow = c_log10 > _OVERFLOW_LOG10
    c_star = math.inf if overflow else 10.0 ** c_log10
    k_log10 = math.log10(rho) - math.log10(big_k) - c_log10
    kappa_star = 0.0 if k_log10 < -_OVERFLOW_LOG10 else 10.0 ** k_log10
    return ExplicitConstants(
        c_star=c_star,
        c_star_log10=c_log10,
        overflow=overflow,
        kappa_star=kappa_star,
        kappa_star_log10=k_log10,
        eps_star=lam / (10.0 * m * nc),
        b1=7.0 * bulk,
        b2=0.5 * lam,
        b3=3.0 * big_lambda ** 2 / lam,
    )
