#![cfg_attr(not(test), no_std)]
//! Shooting laboratory for the radial equation
//!
//! ```text
//! u'' + (N-1)/r u' + f(u) = 0,   u(0) = alpha,  u'(0) = 0,
//! ```
//!
//! where `f` is a base double-power nonlinearity glued to amplified blocks by
//! short affine bridges. The crate classifies initial values into shots that
//! cross zero with negative slope (N) and shots that stay positive after their
//! decrease stops (P), brackets ground states on the P/N boundary, evaluates
//! the comparison functionals used to certify the picture, and tunes block
//! chains whose classification alternates along the breakpoints.
//!
//! The crate is `no_std` + `alloc`; file formats, configs and the command-line
//! driver live in the companion `groundshot-cli` crate.

extern crate alloc;

pub mod functionals;
pub mod hypotheses;
mod math;
pub mod nonlinearity;
pub mod ode;
pub mod shooting;
pub mod singular;
pub mod tuning;

pub use functionals::{
    big_f_over_f, erbe_tang_p, erbe_tang_p_factored, pohozaev_e, pohozaev_e_prime,
    pohozaev_energy, pohozaev_energy_derivative, tail_decay_quantity, w_functional,
    FunctionalError, MonotoneBranch,
};
pub use hypotheses::{
    certify, check_h2, check_h3, check_h6, find_b_and_beta, CheckReport, HypothesisError,
    HypothesisReport, SampleGrid, Verdict,
};
pub use math::adaptive_simpson;
pub use nonlinearity::{
    BaseModel, BlockKind, BlockSpec, ChainError, ModelError, PiecewiseNonlinearity, UpperLimit,
};
pub use ode::{
    integrate, DenseStep, Direction, EventAction, EventKind, EventSpec, IntegrationControls,
    RadialState, ResolvedEvent, Termination, Trajectory,
};
pub use shooting::{
    classify, classify_from, classify_with_levels, crossing_moment, find_alpha_star,
    find_ground_states, Classification, GroundStateBracket, LevelCrossing, ShootError,
    ShotControls, StopReason, Tag,
};
pub use singular::{blowup_coefficient, singular_residual, singular_solution};
pub use tuning::{
    bracket_alpha_star, estimate_escape_radius, pick_alpha0_and_eps0, tune_chain,
    tune_even_block, tune_odd_block,
    BlockTuning, ChainTuning, EscapeRadiusEstimate, EvenBlockDiagnostics, OddBlockDiagnostics,
    TuningControls, TuningError,
};
