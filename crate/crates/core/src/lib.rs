//! Generalized symmetric ADMM for grouped multi-block separable convex
//! programs, with closed-form proximal oracles for latent-variable graphical
//! model selection and a certification layer that checks the method's
//! convergence inequalities along computed trajectories.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blockspace;
pub mod certify;
pub mod engine;
pub mod error;
pub mod exec;
pub mod io;
pub mod lvggms;
pub mod proxlib;
pub mod rng;
pub mod stepsize;

pub use blockspace::{BlockSpec, GroupedPoint, LinearMap, Objective, SeparableProblem};
pub use engine::{solve, step, ConvergenceHistory, IterationState, SolveOutput, SolverConfig, Termination};
pub use error::{Error, Group, Result};
pub use exec::Execution;
pub use stepsize::{SpecialCase, StepsizeParams, Variant};
