"""Delayed hematopoiesis model: equilibria, stability switches, simulation.

A three-compartment blood production model with a maturation delay.  The
package computes its steady states, analyzes delay-dependent stability of
the linearization through the imaginary-axis crossing geometry, and
integrates the nonlinear system directly.  The `hemodelay` command exposes
the same pipeline and writes CSV artifacts.
"""

from .config import ConfigError, RunOptions, default_config_path, parse_config
from .cubic import real_cubic_roots
from .dde import (
    DivergenceError,
    History,
    InvariantViolationError,
    PeriodEstimate,
    Trajectory,
    classify_asymptotics,
    detect_period,
    integrate,
    interpolate,
    scaled_equilibrium_history,
)
from .equilibria import (
    Equilibrium,
    hill_equilibrium_closed_form,
    positive_equilibrium,
    tau_max,
    trivial_equilibrium,
)
from .linearization import (
    CharCoeffs,
    LinCoeffs,
    char_coeffs,
    h_prime,
    h_value,
    hayes_check,
    linearize,
    routh_hurwitz_tau0,
    trivial_stability,
)
from .model import (
    HillRates,
    InvalidStateError,
    ModelParams,
    NumericalError,
    RateFunctions,
    SystemState,
    default_params,
    rhs,
    validate,
)
from .switch import (
    DegenerateDenominatorError,
    OmegaBranch,
    OmegaRoot,
    ScanResult,
    SnCurve,
    SwitchReport,
    char_residual,
    omega_branch,
    positive_root_intervals,
    positive_roots_h,
    scan,
    sn_value,
    theta,
)

__version__ = "0.1.0"

__all__ = [
    "CharCoeffs",
    "ConfigError",
    "DegenerateDenominatorError",
    "DivergenceError",
    "Equilibrium",
    "HillRates",
    "History",
    "InvalidStateError",
    "InvariantViolationError",
    "LinCoeffs",
    "ModelParams",
    "NumericalError",
    "OmegaBranch",
    "OmegaRoot",
    "PeriodEstimate",
    "RateFunctions",
    "RunOptions",
    "ScanResult",
    "SnCurve",
    "SwitchReport",
    "SystemState",
    "Trajectory",
    "char_coeffs",
    "char_residual",
    "classify_asymptotics",
    "default_config_path",
    "default_params",
    "detect_period",
    "h_prime",
    "h_value",
    "hayes_check",
    "hill_equilibrium_closed_form",
    "integrate",
    "interpolate",
    "linearize",
    "omega_branch",
    "parse_config",
    "positive_equilibrium",
    "positive_root_intervals",
    "positive_roots_h",
    "real_cubic_roots",
    "rhs",
    "routh_hurwitz_tau0",
    "scaled_equilibrium_history",
    "scan",
    "sn_value",
    "tau_max",
    "theta",
    "trivial_equilibrium",
    "trivial_stability",
    "validate",
]
