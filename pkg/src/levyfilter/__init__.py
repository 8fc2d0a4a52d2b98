"""Nonlinear filtering for signals driven by copula-coupled Levy jump noise.

The package pairs a spectral solver for the unnormalized conditional
density with a bootstrap particle filter built from the same
conditional-jump construction, so each engine cross-validates the other.
"""

from .copulas import (
    ClaytonCopula,
    CompleteDependenceCopula,
    ConditionalJumpLaw,
    IndependenceCopula,
    conditional_law,
    eval_H,
    joint_tail,
    mixed_density_h,
    sample_conditional,
    scaling_check,
    survival_copula_finite,
)
from .config import RunConfig, load_config, parse_config
from .measures import (
    ExponentialMeasure,
    LevyMeasure,
    TabulatedMeasure,
    TemperedStableMeasure,
    check_small_jump_integrability,
    inverse_tail,
    sample_jump_size,
    tail_integral,
    truncated_mass,
)
from .output import FilterOutput
from .particles import (
    ParticleEnsemble,
    jump_update,
    propagate,
    resample_systematic,
    run_pf,
    weight_update,
)
from .simulate import (
    DriftSpec,
    JumpEvents,
    L0Spec,
    ModelSpec,
    PathRecord,
    SensorSpec,
    X0Law,
    girsanov_Z,
    simulate_coupled_jumps,
    simulate_L0,
    simulate_observation,
    simulate_path,
    simulate_state,
)
from .symbols import (
    BGIndexReport,
    SymbolFn,
    WellposednessReport,
    check_wellposedness,
    estimate_bg_index,
    estimate_k,
    symbol_Bz,
    symbol_L0,
)
from .zakai import (
    GridConfig,
    GridDensity,
    ZakaiState,
    init_density,
    normalize,
    run_filter,
    step_jump,
    step_observation,
    step_semigroup,
    threshold_prob,
)

__version__ = "0.1.0"
