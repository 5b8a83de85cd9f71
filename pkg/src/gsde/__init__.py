"""Numerical laboratory for scalar SDEs with volatility ambiguity.

The state follows dX = f(X, t) dt + g(X, t) dB where the driver B has an
uncertain variance rate confined to a band [sigma_lower^2, sigma_upper^2].
The package simulates paths under adversarial volatility scenarios,
machine-checks Lyapunov-style decay and growth certificates that hold
uniformly over the band, and estimates worst-case pathwise exponential
rates empirically.
"""

from .expr import (
    EvalDomainError,
    Expr,
    ExprError,
    ParseError,
    compile_fn,
    differentiate,
    evaluate,
    free_variables,
    parse,
    to_source,
)
from .gcalc import AmbiguityBounds, g_lower, g_upper
from .scenario import (
    BangBangInTime,
    BangBangInX,
    Constant,
    FeedbackSignVxx,
    PathBundle,
    PiecewiseRandom,
    ScenarioError,
    VolatilityScenario,
    enumerate_family,
    parse_scenario,
    sample_path,
    uniform_grid,
)
from .integrator import (
    EXPLOSION_THRESHOLD,
    METHODS,
    SdeSpec,
    SimulationRun,
    check_lipschitz,
    integrate,
    linear_closed_form,
    lipschitz_margin,
    write_path_csv,
)
from .lyapunov import (
    THEOREMS,
    CertificateError,
    CertificateReport,
    CertificateSpec,
    CheckGrid,
    GrowthReport,
    HypothesisVerdict,
    LyapunovFn,
    best_lambda_T33,
    check_certificate,
    check_local_growth,
    op_H,
    op_L,
    op_L_lower,
    validate_certificate,
    verdict_line,
    write_certificate_csv,
)
from .estimator import (
    FUNCTIONALS,
    EstimationError,
    ExponentEstimate,
    MartingaleCheckSpec,
    MartingaleReport,
    ScenarioExponent,
    SearchResult,
    SublinearEstimate,
    adversarial_search,
    estimate_exponent,
    estimate_sublinear_expectation,
    martingale_bound_check,
)
from .config import ConfigError, load_config, parse_config_text

__version__ = "0.1.0"

__all__ = [
    "AmbiguityBounds",
    "BangBangInTime",
    "BangBangInX",
    "CertificateError",
    "CertificateReport",
    "CertificateSpec",
    "CheckGrid",
    "ConfigError",
    "Constant",
    "EXPLOSION_THRESHOLD",
    "EstimationError",
    "EvalDomainError",
    "ExponentEstimate",
    "Expr",
    "ExprError",
    "FeedbackSignVxx",
    "FUNCTIONALS",
    "GrowthReport",
    "HypothesisVerdict",
    "LyapunovFn",
    "MartingaleCheckSpec",
    "MartingaleReport",
    "METHODS",
    "ParseError",
    "PathBundle",
    "PiecewiseRandom",
    "ScenarioError",
    "ScenarioExponent",
    "SdeSpec",
    "SearchResult",
    "SimulationRun",
    "SublinearEstimate",
    "THEOREMS",
    "VolatilityScenario",
    "adversarial_search",
    "best_lambda_T33",
    "check_certificate",
    "check_lipschitz",
    "check_local_growth",
    "compile_fn",
    "differentiate",
    "enumerate_family",
    "estimate_exponent",
    "estimate_sublinear_expectation",
    "evaluate",
    "free_variables",
    "g_lower",
    "g_upper",
    "integrate",
    "linear_closed_form",
    "lipschitz_margin",
    "load_config",
    "martingale_bound_check",
    "op_H",
    "op_L",
    "op_L_lower",
    "parse",
    "parse_config_text",
    "parse_scenario",
    "sample_path",
    "to_source",
    "uniform_grid",
    "validate_certificate",
    "verdict_line",
    "write_certificate_csv",
    "write_path_csv",
]
