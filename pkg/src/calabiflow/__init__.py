"""Finite energy geometry and the weak Calabi flow on a flat elliptic curve.

Invariant potentials are periodic functions on [0, 1); every metric and
energy is computed through the Legendre dual, where geodesics are straight
lines.
"""

from .cat0 import (
    PotentialSequence,
    asymptotic_center,
    cat0_comparison_check,
    d1_ball_convexity_check,
    thm53_check,
    weak_d2_limit_check,
)
from .energy import (
    TwistData,
    am,
    am_chi,
    am_gamma,
    entropy,
    kenergy,
    kenergy_gradient,
    twisted_kenergy,
)
from .estimators import (
    AsymptoticCenter,
    CalabiFlow,
    EntropyApproximator,
    LegendreTransformer,
    MongeAmpereSolver,
)
from .exceptions import (
    Blowup,
    CalabiFlowError,
    ConvexityViolation,
    DegenerateMetric,
    Inconclusive,
    MassMismatch,
    NoConvergence,
    NotDiverging,
    PreconditionViolated,
    PshViolation,
    Unbounded,
)
from .flow import (
    FlowConfig,
    Trajectory,
    asymptotic_ray,
    contractivity_check,
    dichotomy_classify,
    evi_check,
    minimizer_uniqueness_check,
    proximal_step,
    run_flow,
    smooth_flow_reference,
)
from .geodesic import GeodesicSegment, convexity_check, geodesic, hcma_residual
from .geometry import (
    DensityMeasure,
    KahlerPotential,
    PeriodicGrid,
    SymplecticPotential,
    envelope,
    inverse_legendre,
    legendre,
    ma_measure,
)
from .masolver import approximate_with_entropy, eps_limit_study, solve_ma, solve_ma_eps
from .metric import d1_envelope, dp, finsler_norm, i_functional

__version__ = "0.1.0"
