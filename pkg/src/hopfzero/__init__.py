"""Numerical verification of Shilnikov phenomena near a Hopf-zero point.

The package takes an analytic two-parameter unfolding as a truncated jet,
reduces it to the quadratic normal form, rescales to the slow-fast system,
and then measures the objects the qualitative theory is built from:
saddle-focus equilibria, their one- and two-dimensional invariant
manifolds, the exponentially small gaps between those manifolds, the
parameter curves where the mean gap vanishes, and finally parameter values
carrying a homoclinic orbit that satisfies the Shilnikov eigenvalue
condition.
"""

from .errors import ConditionFailure, HopfZeroError, JetParseError, NumericalFailure
from .jets import (
    DEFAULT_CAP,
    MODE_GENERAL,
    MODE_VOLUME_PRESERVING,
    JetFile,
    MultiJet,
    UnfoldingJet,
    check_generic_unfolding,
    check_linear_part,
    check_open_conditions,
    jet_compose,
    jet_divergence,
    load_jet_file,
    parse_jet_text,
    save_jet_file,
)
from .fields import bundled_field, BUNDLED_FIELDS
from .normalform import (
    NormalFormResult,
    ScaledSystem,
    blow_up,
    compute_c0,
    reduce_to_normal_form,
    straighten_south,
)
from .flow import (
    EventSpec,
    PolyField,
    Trajectory,
    find_crossing,
    integrate,
    track_angle,
)
from .manifolds import (
    Equilibrium,
    SectionCurve,
    backward_invariance_check,
    find_equilibria,
    graph_deviation,
    manifold_1d,
    manifold_2d_section,
    shilnikov_eigenvalue_check,
)
from .splitting import (
    GammaCurve,
    S1Sample,
    S2Sample,
    SplittingReport,
    collect_s1,
    collect_s2,
    default_eps_grid,
    fit_s1,
    fit_s2,
    gamma_curve,
    heteroclinic_angles,
    measure_s1,
    measure_s2,
    rho_target,
    synthetic_s1_samples,
    synthetic_s2_samples,
)
from .shilnikov import (
    GeometryDiagnostics,
    HomoclinicResult,
    HypothesisReport,
    SecondCrossing,
    geometry_diagnostics,
    homoclinic_bisect,
    second_crossing,
    verify_hypotheses,
)
from .precision import (
    digits_for_one_dim,
    digits_for_transit,
    digits_for_two_dim,
    mpf,
    to_decimal,
    working_precision,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "HopfZeroError", "ConditionFailure", "NumericalFailure", "JetParseError",
    "MultiJet", "UnfoldingJet", "JetFile", "DEFAULT_CAP",
    "MODE_GENERAL", "MODE_VOLUME_PRESERVING",
    "parse_jet_text", "load_jet_file", "save_jet_file",
    "check_linear_part", "check_open_conditions", "check_generic_unfolding",
    "jet_compose", "jet_divergence",
    "bundled_field", "BUNDLED_FIELDS",
    "NormalFormResult", "ScaledSystem", "reduce_to_normal_form",
    "compute_c0", "blow_up", "straighten_south",
    "PolyField", "Trajectory", "EventSpec",
    "integrate", "find_crossing", "track_angle",
    "Equilibrium", "SectionCurve", "find_equilibria",
    "shilnikov_eigenvalue_check", "manifold_1d", "manifold_2d_section",
    "graph_deviation", "backward_invariance_check",
    "S1Sample", "S2Sample", "SplittingReport", "GammaCurve",
    "measure_s1", "measure_s2", "collect_s1", "collect_s2",
    "fit_s1", "fit_s2", "gamma_curve", "rho_target",
    "synthetic_s1_samples", "synthetic_s2_samples",
    "default_eps_grid", "heteroclinic_angles",
    "SecondCrossing", "HomoclinicResult", "HypothesisReport",
    "GeometryDiagnostics", "second_crossing", "homoclinic_bisect",
    "verify_hypotheses", "geometry_diagnostics",
    "mpf", "to_decimal", "working_precision",
    "digits_for_one_dim", "digits_for_two_dim", "digits_for_transit",
]
