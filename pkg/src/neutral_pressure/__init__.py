"""Neutralized packing pressure for free semigroup actions, estimated at finite scale."""

__version__ = "0.1.0"

from .bowen import BowenIndex, BowenQuery, ball_membership, bowen_distance, potential_sum, radius
from .measures import (
    SampleMeasure,
    bernoulli_cylinder,
    cylinder_uniform,
    empirical_from_orbits,
    five_r_subfamily,
    integrated_pressure,
    katok_pressure,
    local_pressure,
    mu_inf_pressure,
)
from .oracles import (
    ShiftOracleSpec,
    forced_cylinder_length,
    multi_generator_identical_shift_alpha,
    shift_oracle_alpha,
    shift_oracle_limit,
)
from .packing import (
    CandidatePool,
    critical_exponent,
    disjoint_test,
    exhaustive_packing,
    greedy_packing,
    outer_estimate,
    premeasure_estimate,
    pressure_report,
    trim_packing_sum,
)
from .systems import (
    ConfigError,
    DepthError,
    Potential,
    SampleSet,
    SymbolicPoint,
    System,
    build_potential,
    build_system,
    circle_maps,
    cylinder_complete,
    full_shift,
    torus_grid,
)
from .words import iter_orbit, iter_words, level_size, orbit_images
