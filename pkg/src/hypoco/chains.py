"""Stochastic simulation of an interacting particle chain.

Particles ``0 .. n`` sit on a path and attract their neighbours through an
even, strongly convex pair potential ``W``; thermal noise enters only at
the boundary particles.  Two recurrent variants are supported:

* ``fixed``    - particle 0 is pinned at the origin, noise ``sigma_n`` acts
  on particle ``n``;
* ``centered`` - the free chain is simulated and observed relative to its
  centre of mass, noise on particles 0 and ``n``.

For the quadratic potential the chain is an Ornstein-Uhlenbeck process
whose drift is the (pinned) chain Laplacian, so every simulated statistic
has an exact Gaussian oracle through :func:`quadratic_reduction` and
:mod:`hypoco.gaussian`.

Ensembles are integrated by Euler-Maruyama, vectorised across trajectories.
Noise comes from a single counter-based Philox stream keyed by the config
seed with a fixed step-major draw order, and all reductions are numpy's
deterministic pairwise sums, so results are bit-reproducible for a given
``(config, seed)`` regardless of how the hosting process schedules work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import graphs
from .errors import InvalidArgumentError, NumericalFailureError
from .gaussian import solve_lyapunov
from .spectra import DriftSpec, _freeze

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pure-numpy fallback keeps the module functional
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

__all__ = [
    "PotentialSpec",
    "ChainConfig",
    "TrajectoryStats",
    "CouplingEstimate",
    "LsiConstants",
    "default_dt",
    "drift",
    "simulate",
    "couple",
    "quadratic_reduction",
    "lsi_constant_quadratic",
]

_OBSERVABLES = ("coords", "norm2")
_MAX_OUTPUT_POINTS = 50
_CI_Z = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class PotentialSpec:
    """Even strongly convex pair potential.

    ``quadratic``: ``W(x) = lam/2 |x|^2``;
    ``quartic``:   ``W(x) = lam/2 |x|^2 + alpha/4 |x|^4``.
    Both have Hessian >= lam, and their gradients are odd, which is what the
    conservation and coupling arguments rely on.
    """

    kind: str
    lam: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("quadratic", "quartic"):
            raise InvalidArgumentError(
                f"potential.kind: expected 'quadratic' or 'quartic', got {self.kind!r}"
            )
        if not (self.lam > 0.0 and np.isfinite(self.lam)):
            raise InvalidArgumentError(f"potential.lam: must be positive, got {self.lam}")
        if not (self.alpha >= 0.0 and np.isfinite(self.alpha)):
            raise InvalidArgumentError(f"potential.alpha: must be >= 0, got {self.alpha}")
        if self.kind == "quadratic" and self.alpha != 0.0:
            raise InvalidArgumentError("potential.alpha: must be 0 for a quadratic potential")

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Gradient of W applied blockwise along the last axis."""
        if self.kind == "quadratic":
            return self.lam * x
        sq = np.sum(x * x, axis=-1, keepdims=True)
        return (self.lam + self.alpha * sq) * x

    def to_json(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, "alpha": self.alpha}

    @classmethod
    def from_json(cls, data: dict) -> "PotentialSpec":
        if not isinstance(data, dict) or "kind" not in data or "lambda" not in data:
            raise InvalidArgumentError("potential JSON must contain 'kind' and 'lambda'")
        return cls(kind=data["kind"], lam=data["lambda"], alpha=data.get("alpha", 0.0))


def default_dt(lam: float, n: int) -> float:
    """Step size respecting the stiffest Laplacian mode (about ``4 lam``)."""
    return 0.01 / lam * min(1.0, 1.0 / (4.0 * n))


@dataclass(frozen=True)
class ChainConfig:
    """Particle count ``n`` (particles ``0..n``), block dimension ``d``,
    potential, boundary noise amplitudes, integrator step and RNG seed."""

    n: int
    d: int
    potential: PotentialSpec
    sigma0: float
    sigma_n: float
    dt: float
    seed: int
    mode: str

    def __post_init__(self):
        if self.n < 1 or int(self.n) != self.n:
            raise InvalidArgumentError(f"n: must be an integer >= 1, got {self.n}")
        if self.d < 1 or int(self.d) != self.d:
            raise InvalidArgumentError(f"d: must be an integer >= 1, got {self.d}")
        if not (self.sigma0 >= 0.0 and np.isfinite(self.sigma0)):
            raise InvalidArgumentError(f"sigma0: must be >= 0, got {self.sigma0}")
        if not (self.sigma_n >= 0.0 and np.isfinite(self.sigma_n)):
            raise InvalidArgumentError(f"sigma_n: must be >= 0, got {self.sigma_n}")
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise InvalidArgumentError(f"dt: must be positive, got {self.dt}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise InvalidArgumentError("seed: must fit in 64 bits")
        if self.mode not in ("fixed", "centered"):
            raise InvalidArgumentError(f"mode: expected 'fixed' or 'centered', got {self.mode!r}")

    @property
    def dim(self) -> int:
        return (self.n + 1) * self.d

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "potential": self.potential.to_json(),
            "sigma0": self.sigma0,
            "sigmaN": self.sigma_n,
            "dt": self.dt,
            "seed": self.seed,
            "mode": self.mode,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChainConfig":
        if not isinstance(data, dict):
            raise InvalidArgumentError("chain config must be a JSON object")
        for key in ("n", "d", "potential", "sigmaN", "seed", "mode"):
            if key not in data:
                raise InvalidArgumentError(f"chain config: missing field {key!r}")
        pot = PotentialSpec.from_json(data["potential"])
        dt = data.get("dt")
        if dt is None:
            dt = default_dt(pot.lam, int(data["n"]))
        return cls(
            n=int(data["n"]),
            d=int(data["d"]),
            potential=pot,
            sigma0=float(data.get("sigma0", 0.0)),
            sigma_n=float(data["sigmaN"]),
            dt=float(dt),
            seed=int(data["seed"]),
            mode=data["mode"],
        )


@dataclass(frozen=True, eq=False)
class TrajectoryStats:
    """Ensemble statistics on the output grid.

    ``mean``/``var``/``ci_halfwidth`` are per coordinate of the recorded
    state (centred coordinates in centered mode); ``cov`` is the full
    ensemble covariance.  ``norm2_*`` track the scalar observable ``|x|^2``
    when requested, else are None.
    """

    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    cov: np.ndarray
    ci_halfwidth: np.ndarray
    norm2_mean: np.ndarray | None = None
    norm2_var: np.ndarray | None = None
    norm2_ci: np.ndarray | None = None

    def __post_init__(self):
        for name in ("times", "mean", "var", "cov", "ci_halfwidth"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))


class CouplingEstimate(NamedTuple):
    """Synchronous-coupling contraction estimate.

    ``rate`` is the ensemble mean of ``-log(|X_T - Y_T| / |X_0 - Y_0|) / T``
    and equals the coupling log-distance slope; ``distances`` holds the
    pairwise separations ``|X_t - Y_t|`` on the output grid (columns are
    coupled pairs).
    """

    rate: float
    ci_halfwidth: float
    n_pairs: int
    t_final: float
    times: np.ndarray
    distances: np.ndarray


class LsiConstants(NamedTuple):
    exact: float        # optimal Gaussian constant, lambda_max(Sigma)/2
    paper_bound: float  # spectral bound lambda_max(D_reduced)/(2 rho_D)


def _blocked(x: np.ndarray, n: int, d: int) -> np.ndarray:
    return x.reshape(x.shape[:-1] + (n + 1, d))


@_njit(cache=True)
def _synced_pair_steps(X, Y, noise, lam, alpha, dt, sigma_root_dt, pinned):
    """Advance coupled scalar-block chains in place by Euler steps.

    ``X`` and ``Y`` are ``(pairs, sites)`` state arrays sharing the noise
    rows of ``noise`` (one standard normal per pair per step, applied to the
    last site of both copies).  Bond forces are evaluated at the pre-step
    state by carrying each site's old value through the in-place walk.
    """
    steps = noise.shape[0]
    pairs = X.shape[0]
    sites = X.shape[1]
    for s in range(steps):
        for i in range(pairs):
            x = X[i]
            y = Y[i]
            x_prev = x[0]
            y_prev = y[0]
            for e in range(sites - 1):
                x_cur = x[e + 1]
                diff = x_prev - x_cur
                g = (lam + alpha * diff * diff) * diff * dt
                x[e] -= g
                x[e + 1] += g
                x_prev = x_cur
                y_cur = y[e + 1]
                diff = y_prev - y_cur
                g = (lam + alpha * diff * diff) * diff * dt
                y[e] -= g
                y[e + 1] += g
                y_prev = y_cur
            xi = sigma_root_dt * noise[s, i]
            x[sites - 1] += xi
            y[sites - 1] += xi
            if pinned:
                x[0] = 0.0
                y[0] = 0.0


def _pair_forces(potential: PotentialSpec, xb: np.ndarray) -> np.ndarray:
    """Drift blocks ``-sum_{j ~ i} grad W(x_i - x_j)`` on the chain.

    Each bond's gradient enters once with either sign, so the blocks sum to
    zero up to round-off and the whole field is translation invariant.
    """
    g = potential.grad(xb[..., :-1, :] - xb[..., 1:, :])
    out = np.zeros_like(xb)
    out[..., :-1, :] -= g
    out[..., 1:, :] += g
    return out


def drift(config: ChainConfig, x) -> np.ndarray:
    """Drift field of the chain at state ``x`` (flat length ``(n+1) d``).

    Accepts a single state or a batch with states in the last axis; the
    fixed-mode pin is enforced by the integrator, not here, so the
    conservation identity ``sum_i drift_i = 0`` holds for every state.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != config.dim:
        raise InvalidArgumentError(
            f"x: last axis must have length {config.dim}, got {x.shape[-1]}"
        )
    xb = _blocked(x, config.n, config.d)
    return _pair_forces(config.potential, xb).reshape(x.shape)


def _validate_x0(config: ChainConfig, x0, name: str) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (config.dim,):
        raise InvalidArgumentError(f"{name}: expected shape ({config.dim},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise InvalidArgumentError(f"{name}: entries must be finite")
    if config.mode == "fixed" and np.any(x0[: config.d] != 0.0):
        raise InvalidArgumentError(f"{name}: block 0 must be pinned at the origin in fixed mode")
    return x0


def _output_steps(n_steps: int) -> list[int]:
    stride = max(1, n_steps // _MAX_OUTPUT_POINTS)
    steps = list(range(0, n_steps + 1, stride))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


def simulate(
    config: ChainConfig, x0, t_final: float, n_traj: int, observables=("coords",)
) -> TrajectoryStats:
    """Euler-Maruyama ensemble of ``n_traj`` chains from the point mass ``x0``.

    Noise ``sigma_n dB`` acts on block ``n`` and, in centered mode,
    ``sigma0 dB`` on block 0; in fixed mode block 0 stays pinned.  The
    recorded state is raw in fixed mode and recentred (``x - mean block``)
    in centered mode.  Output times are multiples of ``dt``; a non-finite
    state aborts with the offending step index.
    """
    if not (t_final > 0.0 and np.isfinite(t_final)):
        raise InvalidArgumentError(f"t_final: must be positive, got {t_final}")
    if n_traj < 1:
        raise InvalidArgumentError(f"n_traj: must be >= 1, got {n_traj}")
    for obs in observables:
        if obs not in _OBSERVABLES:
            raise InvalidArgumentError(
                f"observables: unknown observable {obs!r}, supported: {_OBSERVABLES}"
            )
    x0 = _validate_x0(config, x0, "x0")
    n_steps = max(1, int(round(t_final / config.dt)))
    record = _output_steps(n_steps)
    record_set = set(record)

    n, d, dt = config.n, config.d, config.dt
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    X = np.tile(x0, (n_traj, 1)).reshape(n_traj, n + 1, d)
    root_dt = np.sqrt(dt)
    want_norm2 = "norm2" in observables

    times, means, variances, covs, cis = [], [], [], [], []
    n2_mean, n2_var, n2_ci = [], [], []

    def snapshot(step: int):
        if not np.all(np.isfinite(X)):
            raise NumericalFailureError(f"non-finite state at step {step}")
        Y = X - X.mean(axis=1, keepdims=True) if config.mode == "centered" else X
        flat = Y.reshape(n_traj, -1)
        m = flat.mean(axis=0)
        Z = flat - m
        if n_traj > 1:
            C = (Z.T @ Z) / (n_traj - 1)
        else:
            C = np.zeros((flat.shape[1], flat.shape[1]))
        v = np.diag(C).copy()
        times.append(step * dt)
        means.append(m)
        variances.append(v)
        covs.append(C)
        cis.append(_CI_Z * np.sqrt(v / n_traj))
        if want_norm2:
            r2 = np.sum(flat * flat, axis=1)
            mu = float(r2.mean())
            var = float(r2.var(ddof=1)) if n_traj > 1 else 0.0
            n2_mean.append(mu)
            n2_var.append(var)
            n2_ci.append(_CI_Z * np.sqrt(var / n_traj))

    snapshot(0)
    for step in range(1, n_steps + 1):
        X += dt * _pair_forces(config.potential, X)
        if config.sigma_n > 0.0:
            X[:, n, :] += (config.sigma_n * root_dt) * rng.standard_normal((n_traj, d))
        if config.mode == "centered":
            if config.sigma0 > 0.0:
                X[:, 0, :] += (config.sigma0 * root_dt) * rng.standard_normal((n_traj, d))
        else:
            X[:, 0, :] = 0.0
        if step in record_set:
            snapshot(step)

    kw = {}
    if want_norm2:
        kw = {
            "norm2_mean": _freeze(np.array(n2_mean)),
            "norm2_var": _freeze(np.array(n2_var)),
            "norm2_ci": _freeze(np.array(n2_ci)),
        }
    return TrajectoryStats(
        times=np.array(times),
        mean=np.array(means),
        var=np.array(variances),
        cov=np.array(covs),
        ci_halfwidth=np.array(cis),
        **kw,
    )


def couple(config: ChainConfig, x0, y0, t_final: float, n_traj: int) -> CouplingEstimate:
    """Synchronous-coupling contraction rate between two starting points.

    Both copies see identical Brownian increments, so their difference
    evolves by the drift difference alone.  For a quadratic potential that
    difference obeys the deterministic linear ODE ``z' = -lam L z``
    independently of the noise path; it is integrated once with the same
    Euler step and every pair reports the identical rate (zero confidence
    width).  Non-quadratic potentials are simulated as genuine coupled
    ensembles.
    """
    if not (t_final > 0.0 and np.isfinite(t_final)):
        raise InvalidArgumentError(f"t_final: must be positive, got {t_final}")
    if n_traj < 1:
        raise InvalidArgumentError(f"n_traj: must be >= 1, got {n_traj}")
    x0 = _validate_x0(config, x0, "x0")
    y0 = _validate_x0(config, y0, "y0")
    z0 = x0 - y0
    dist0 = float(np.linalg.norm(z0))
    if dist0 == 0.0:
        raise InvalidArgumentError("x0 and y0 must differ")
    if config.mode == "centered":
        block_mean = z0.reshape(config.n + 1, config.d).mean(axis=0)
        if np.linalg.norm(block_mean) > 1e-12 * dist0:
            raise InvalidArgumentError(
                "centered mode: x0 - y0 must have a zero mean block"
            )
    n, d, dt = config.n, config.d, config.dt
    n_steps = max(1, int(round(t_final / dt)))
    record = _output_steps(n_steps)
    record_set = set(record)
    t_eff = n_steps * dt

    if config.potential.kind == "quadratic":
        z = z0.reshape(1, n + 1, d).copy()
        dists = []
        if 0 in record_set:
            dists.append(float(np.linalg.norm(z)))
        for step in range(1, n_steps + 1):
            z += dt * _pair_forces(config.potential, z)
            if config.mode == "fixed":
                z[:, 0, :] = 0.0
            if step in record_set:
                dists.append(float(np.linalg.norm(z)))
        if not np.all(np.isfinite(dists)) or dists[-1] <= 0.0:
            raise NumericalFailureError("coupled difference collapsed or blew up")
        rate = -np.log(dists[-1] / dist0) / t_eff
        distances = np.tile(np.asarray(dists)[:, None], (1, n_traj))
        return CouplingEstimate(
            rate=float(rate),
            ci_halfwidth=0.0,
            n_pairs=n_traj,
            t_final=t_eff,
            times=np.array(record, dtype=float) * dt,
            distances=distances,
        )

    rng = np.random.Generator(np.random.Philox(key=config.seed))
    X = np.tile(x0, (n_traj, 1)).reshape(n_traj, n + 1, d)
    Y = np.tile(y0, (n_traj, 1)).reshape(n_traj, n + 1, d)
    root_dt = np.sqrt(dt)
    dists = []

    def sep() -> np.ndarray:
        return np.linalg.norm((X - Y).reshape(n_traj, -1), axis=1)

    # scalar blocks with boundary noise only admit a compiled stepping
    # kernel; the draw order (one row of pair noises per step) matches the
    # generic path, so both engines consume the same Philox stream
    use_kernel = (
        _HAVE_NUMBA
        and d == 1
        and (config.mode == "fixed" or config.sigma0 == 0.0)
    )
    noise_block = 256

    def advance(n_sub: int) -> None:
        nonlocal X, Y
        if use_kernel:
            Xv = X.reshape(n_traj, n + 1)
            Yv = Y.reshape(n_traj, n + 1)
            done = 0
            while done < n_sub:
                chunk = min(noise_block, n_sub - done)
                if config.sigma_n > 0.0:
                    noise = rng.standard_normal((chunk, n_traj))
                else:
                    noise = np.zeros((chunk, n_traj))
                _synced_pair_steps(
                    Xv, Yv, noise,
                    config.potential.lam, config.potential.alpha, dt,
                    config.sigma_n * root_dt, config.mode == "fixed",
                )
                done += chunk
            return
        for _ in range(n_sub):
            X += dt * _pair_forces(config.potential, X)
            Y += dt * _pair_forces(config.potential, Y)
            if config.sigma_n > 0.0:
                xi = (config.sigma_n * root_dt) * rng.standard_normal((n_traj, d))
                X[:, n, :] += xi
                Y[:, n, :] += xi
            if config.mode == "centered":
                if config.sigma0 > 0.0:
                    xi = (config.sigma0 * root_dt) * rng.standard_normal((n_traj, d))
                    X[:, 0, :] += xi
                    Y[:, 0, :] += xi
            else:
                X[:, 0, :] = 0.0
                Y[:, 0, :] = 0.0

    if 0 in record_set:
        dists.append(sep())
    for prev_step, step in zip(record, record[1:]):
        advance(step - prev_step)
        dists.append(sep())
    distances = np.asarray(dists)
    if not np.all(np.isfinite(distances)):
        raise NumericalFailureError("coupled ensemble produced non-finite separations")
    final = distances[-1]
    if np.any(final <= 0.0):
        raise NumericalFailureError("coupled pair coincided; rate is undefined")
    rates = -np.log(final / dist0) / t_eff
    ci = _CI_Z * float(rates.std(ddof=1)) / np.sqrt(n_traj) if n_traj > 1 else 0.0
    return CouplingEstimate(
        rate=float(rates.mean()),
        ci_halfwidth=ci,
        n_pairs=n_traj,
        t_final=t_eff,
        times=np.array(record, dtype=float) * dt,
        distances=distances,
    )


def quadratic_reduction(config: ChainConfig) -> DriftSpec:
    """Ornstein-Uhlenbeck reduction of the quadratic chain.

    ``B = lam * (chain Laplacian) (x) I_d`` with the row and column of the
    pinned particle removed in fixed mode, and ``D`` the diagonal noise
    matrix ``1/2 diag(..., sigma0^2, 0, ..., 0, sigma_n^2)`` restricted the
    same way.  Feeding the result to :mod:`hypoco.spectra` and
    :mod:`hypoco.gaussian` yields exact gaps, covariances and decay curves
    for the simulated chain.
    """
    if config.potential.kind != "quadratic":
        raise InvalidArgumentError(
            f"quadratic_reduction needs a quadratic potential, got {config.potential.kind!r}"
        )
    lam = config.potential.lam
    A = -graphs.laplacian(graphs.InteractionGraph.chain(config.n, lam))
    n_sites = config.n + 1
    noise = np.zeros(n_sites)
    noise[-1] = 0.5 * config.sigma_n ** 2
    if config.mode == "centered":
        noise[0] = 0.5 * config.sigma0 ** 2
    else:
        A = A[1:, 1:]
        noise = noise[1:]
    eye_d = np.eye(config.d)
    return DriftSpec(B=np.kron(A, eye_d), D=np.kron(np.diag(noise), eye_d))


def lsi_constant_quadratic(config: ChainConfig) -> LsiConstants:
    """Log-Sobolev constants of the pinned quadratic chain.

    ``exact`` is the optimal constant in the density form of the inequality
    for the invariant Gaussian law, ``lambda_max(Sigma)/2``; ``paper_bound``
    is the conservative spectral estimate ``lambda_max(D)/(2 rho_D)``.  The
    exact constant never exceeds the bound.  Only the fixed problem has an
    invariant law on the full state space, so centered configs are
    rejected.
    """
    if config.mode != "fixed":
        raise InvalidArgumentError(
            "lsi_constant_quadratic: only the fixed problem has an invariant law "
            "on the full space; use mode='fixed'"
        )
    if config.sigma_n <= 0.0:
        raise InvalidArgumentError("lsi_constant_quadratic: sigma_n must be positive")
    spec = quadratic_reduction(config)
    sigma = solve_lyapunov(spec).cov
    exact = 0.5 * float(np.linalg.eigvalsh(sigma)[-1])
    rho_d = graphs.dirichlet_eigenvalue(
        graphs.InteractionGraph.chain(config.n, config.potential.lam), 0
    )
    paper_bound = (0.5 * config.sigma_n ** 2) / (2.0 * rho_d)
    return LsiConstants(exact=exact, paper_bound=paper_bound)
