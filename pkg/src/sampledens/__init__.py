"""Histogram and frequency polygon density estimation for sampled continuous-time processes."""

from .errors import (
    ConfigError,
    InvalidInputError,
    NumericalFailureError,
    ResourceLimitError,
    UnsupportedDimensionError,
    UnsupportedError,
)
from .estimators import (
    BinnedDensity,
    FrequencyPolygonEstimate,
    HistogramEstimate,
    fit_frequency_polygon,
    fit_histogram,
    integral_of,
    l2_distance_sq,
)
from .grid import Partition
from .processes import OUModel, SmoothGaussianModel, integrated_g, marginal_density, sample_at
from .risk import RiskConfig, RiskReport, exact_isb, mc_mise, pointwise_variance_scaled
from .sampling import HighFrequency, Jittered, Renewal, SamplePlan, delta_star, draw_times
from .theory import MixingProfile, bandwidth, fit_rate, optimal_c

__version__ = "0.1.0"
