//! Component-based dual decomposition of the AC optimal power flow problem.
//!
//! The network is split into generator, bus and line components. Each
//! component solves a small local problem against a vector of Lagrange
//! multipliers, and the multipliers are driven towards a solution of a
//! proximal/augmented dual by a subgradient step. Three coordination
//! variants are provided:
//!
//! - [`Variant::A1`]: proximal regularisation on every component.
//! - [`Variant::A2`]: adds an ADMM penalty on voltage/angle consensus.
//! - [`Variant::A3`]: additionally pulls generator and line powers towards
//!   the power-balance targets computed from the previous iterate.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature enables
//! parallel subproblem rounds and wall-clock timing in the coordinator.
//!
//! Module map:
//!
//! - [`network`]: per-unit network model and branch admittance coefficients.
//! - [`formulation`]: polar flow equations, balance residuals, centralized solve.
//! - [`nlp`]: a small augmented-Lagrangian / projected quasi-Newton NLP engine.
//! - [`decomposition`]: the generator, bus and line subproblems.
//! - [`coordinator`]: the distributed loop, multiplier updates and gap reporting.
//! - [`toylab`]: two-variable nonconvex examples with exact (brute-force) duals.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod coordinator;
pub mod decomposition;
mod error;
pub mod formulation;
pub mod network;
pub mod nlp;
pub mod toylab;

pub use coordinator::{
    gaps, lookup_setting, run, IterationTrace, RunOptions, RunOutcome, RunReport, RunStatus,
    Setting,
};
pub use decomposition::{AlgoParams, ComponentState, LineState, MultiplierSet, Variant};
pub use error::{Error, Result};
pub use formulation::{solve_centralized, CentralSolution, FlowState};
pub use network::{Branch, BranchCoeffs, Bus, Generator, Network};
