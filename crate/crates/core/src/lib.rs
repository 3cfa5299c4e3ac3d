//! No-signalling correlations on finite Bell scenarios and the infinite hat game.
//!
//! - [`dist`]: scenarios, joint assignments, finitely supported distributions,
//!   marginalization and mixtures.
//! - [`nosignalling`]: empirical models, the no-signalling checks, local
//!   (hidden-variable) models, functional no-signalling and locality decisions.
//! - [`hatgame`]: the hat game at finite horizon on eventually-zero inputs.
//! - [`concentration`]: Azuma bounds, exact win sets, and last-loss censuses.
//! - [`modelfile`]: JSON documents for models, certificates and witnesses.

pub mod concentration;
pub mod dist;
pub mod error;
pub mod generators;
pub mod hatgame;
pub mod modelfile;
pub mod nosignalling;
pub mod rng;
mod simplex;

pub use dist::{BellScenario, FiniteDist, JointAssignment, PartySubset, PROB_TOL};
pub use error::{Error, Result};
pub use hatgame::{GameConfig, HatInput, InputLaw, RunStats, Strategy, StrategySpec};
pub use nosignalling::{
    agreement_set, extract_hat_function, functional_ns_check, is_local, is_no_signalling,
    is_no_signalling_fast, local_model, model_of, EmpiricalModel, FnsVerdict,
    HiddenVariableMeasure, JointFunction, LocalVerdict, NsVerdict, NsWitness, ResponseFunction,
};
