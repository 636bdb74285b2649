"""Exact and finite-sample diffusion posteriors for small Bayesian inverse problems."""

from .analytic import ConditionalProblem
from .exceptions import (
    DegenerateDensityError,
    DegenerateEvidenceError,
    DomainError,
    FsrDiagError,
    GridMismatchError,
    IntractableError,
    SamplerDivergenceError,
    UnsupportedOperationError,
)
from .fields import DensityField
from .forward_ops import Affine, Cubic, MeasurementModel, Quadratic, Sine, Tabulated, make_operator
from .fsr import FsrModel
from .metrics import TvCurve, ensemble_density, mc_rate_fit, tv_curve, tv_distance
from .priors import DenoiserMoments, DiscretePrior, EmpiricalPrior, GaussianPrior, GMMPrior, Prior
from .samplers import SampleEnsemble, SamplerSpec, run_sampler
from .schedule import NoiseSchedule

__version__ = "0.1.0"

__all__ = [
    "Affine",
    "ConditionalProblem",
    "Cubic",
    "DegenerateDensityError",
    "DegenerateEvidenceError",
    "DenoiserMoments",
    "DensityField",
    "DiscretePrior",
    "DomainError",
    "EmpiricalPrior",
    "FsrDiagError",
    "FsrModel",
    "GMMPrior",
    "GaussianPrior",
    "GridMismatchError",
    "IntractableError",
    "MeasurementModel",
    "NoiseSchedule",
    "Prior",
    "Quadratic",
    "SampleEnsemble",
    "SamplerDivergenceError",
    "SamplerSpec",
    "Sine",
    "Tabulated",
    "TvCurve",
    "UnsupportedOperationError",
    "ensemble_density",
    "make_operator",
    "mc_rate_fit",
    "run_sampler",
    "tv_curve",
    "tv_distance",
]
