"""mixlab: a numerical laboratory for mixing bounds of forward noising diffusions.

Simulates Ornstein-Uhlenbeck and tempered Langevin forward processes started
from multi-modal data mixtures, and measures/validates total-variation lower
and upper bounds on their convergence to the invariant noise measure,
including the cut-off behaviour in the distance to the furthest mode.
"""

__version__ = "0.1.0"

from .bounds import (
    ConcaveRate,
    GeneratorBoundReport,
    GrowthEnvelopeReport,
    HorizonSet,
    LinearRate,
    LowerBoundReport,
    SubspaceProjector,
    apply_generator,
    check_compatibility,
    check_generator_bound,
    check_growth_envelope,
    gaussian_kl,
    mixing_horizons,
    ou_tv_upper_bound,
    tv_lower_bound,
)
from .errors import ConfigError, DivergenceError, DomainError, StructuralError
from .forward import (
    IntegratorConfig,
    OUProcess,
    Regime,
    RegimeKind,
    TemperedLangevin,
    check_dispersion_balance,
    check_drift_condition,
    check_linear_growth,
    classify_ergodicity,
)
from .measures import (
    CheckResult,
    ModeSpec,
    MultiModalData,
    QuantileEstimate,
    RadialProfile,
    SphericalMeasure,
    ValidationReport,
    projection_norm_samples,
    projection_quantile,
    validate_data_spec,
)
from .stats import (
    KSResult,
    TVEstimate,
    chisq_cdf,
    empirical_tv_1d,
    gaussian_projection_mass,
    ks_statistic,
    ks_sweep,
    projected_tv_vs_gaussian,
)

__all__ = [name for name in dir() if not name.startswith("_")]
