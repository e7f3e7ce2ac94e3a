"""Spill-free feedback stabilization of a liquid-carrying tank.

Simulation of the 1-D viscous shallow-water tank system in the moving
frame, the momentum feedback law that stabilizes it, the Lyapunov
functional tower backing the certificates, gain-feasibility checking, and
a seeded verification harness for the supporting inequalities.
"""

from .core import (
    Grid,
    InvariantError,
    LabFrameView,
    LiquidState,
    PhysicalParams,
    SpillStatus,
    TankState,
    central_derivative,
    equilibrium_state,
    from_lab_frame,
    liquid_mass,
    spill_check,
    state_norm_X,
    to_lab_frame,
    trapezoid_integral,
)
from .functionals import (
    FunctionalParams,
    G_inverse,
    G_of_h,
    LyapunovReport,
    clf_V,
    energy_E,
    energy_W,
    functional_U,
    lemma_constants,
    level_bounds_p,
    lyapunov_report,
    radius_R,
    sup_velocity_bound,
    theta,
    theta_tilde,
    xu_membership_bound,
)
from .friction import (
    BoundedGeneric,
    ChannelWidth,
    ConstAbsV,
    FrictionModel,
    Frictionless,
    K_bar,
    K_tilde,
    LinearLevel,
    VelocityIndependent,
    assumption_H_bound,
    friction_from_dict,
    kappa,
)
from .controller import (
    CheckItem,
    DecayRates,
    FeasibilityReport,
    GainSuggestion,
    Gains,
    InfeasibleTargetError,
    check_theorem1,
    check_theorem2,
    decay_rates,
    feedback_f,
    suggest_gains,
)
from .solver import (
    PositivityError,
    SolverConfig,
    Trajectory,
    make_initial,
    semidiscrete_rhs,
    simulate,
    stable_dt,
    step,
)
from .sampling import (
    sample_state,
    sample_state_in_sublevel,
    sample_state_near_equilibrium,
    scale_state,
)
from .verify import (
    VerificationResult,
    fit_decay_rate,
    verify_decay,
    verify_energy_identities,
    verify_level_bounds,
    verify_sine_inequalities,
    verify_small_norm_bound,
)
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import RunResult, run

__version__ = "0.1.0"
