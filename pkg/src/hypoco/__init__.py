"""Numerical certification of convergence rates for degenerate linear
diffusions and overdamped interacting-particle chains.

Modules:

* :mod:`hypoco.spectra`    - spectral abscissa, Jordan structure, Kalman
  hypoellipticity certificates, decay envelopes.
* :mod:`hypoco.gaussian`   - exact Gaussian computations (Lyapunov
  covariances, transient laws, Wasserstein-2, relative entropy, operator
  norms).
* :mod:`hypoco.distortion` - distorted-norm contraction certificates and
  explicit rate constants.
* :mod:`hypoco.graphs`     - discrete Laplacian spectral gaps, Dirichlet
  eigenvalues, Cheeger constants, chain bounds.
* :mod:`hypoco.chains`     - Euler-Maruyama ensembles, synchronous
  couplings, exact Ornstein-Uhlenbeck reductions of quadratic chains.
* :mod:`hypoco.cli`        - the ``hypoco`` scenario runner.
"""

from .chains import (
    ChainConfig,
    CouplingEstimate,
    LsiConstants,
    PotentialSpec,
    TrajectoryStats,
    couple,
    drift,
    lsi_constant_quadratic,
    quadratic_reduction,
    simulate,
)
from .distortion import (
    DistortionCertificate,
    ExplicitConstants,
    HypocoerciveRate,
    build_distortion,
    explicit_constants,
    hypocoercive_rate,
    verify_lmi,
)
from .errors import (
    HypocoError,
    InvalidArgumentError,
    NumericalFailureError,
    UnstableDriftError,
    UnsupportedSizeError,
)
from .gaussian import (
    DecayCurve,
    DecayStudy,
    GaussianState,
    decay_study,
    kl_gaussian,
    matrix_exponential,
    operator_norm_sq,
    propagate,
    solve_lyapunov,
    w2_gaussian,
)
from .graphs import (
    ChainBounds,
    GapReport,
    InteractionGraph,
    chain_bounds,
    chain_gap_report,
    cheeger_constant,
    dirichlet_eigenvalue,
    laplacian,
    spectral_gap,
)
from .spectra import (
    DriftSpec,
    KalmanResult,
    SpectralCertificate,
    certify,
    coercivity_profile,
    critical_jordan_index,
    decay_envelope,
    kalman_certificate,
    rank_staircase,
    spectral_abscissa,
)

__version__ = "0.1.0"
