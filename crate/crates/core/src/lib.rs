//! Lower bounds for the blow-up time of a quasilinear, fully parabolic
//! Keller–Segel system
//!
//! ```text
//! u_t = ∇·[(u+α)^{m1-1} ∇u − χ u (u+α)^{m2-2} ∇v]
//! v_t = Δv − v + u
//! ```
//!
//! with zero-flux boundary data, together with a finite-volume simulator
//! and numerical audits of the differential inequalities behind the bound.
//!
//! The pipeline is:
//!
//! 1. [`exponents`]: admissibility of the energy exponents `(p, q)` and all
//!    derived exponents.
//! 2. [`constants`]: the coefficient chain leading to `A, B, C, D` of the
//!    ODE inequality `Φ' ≤ AΦ^{f(η,r)} + BΦ^{f(η,1)} + CΦ^η + D`.
//! 3. [`bound`]: the improper integral `∫_{Φ(0)}^∞ dτ / G(τ)` and its
//!    closed-form under-estimate.
//! 4. [`field`], [`solver`]: grids, energy functional and time integration.
//! 5. [`verify`]: residual audits along trajectories and empirical
//!    Gagliardo–Nirenberg constants.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod constants;
pub mod exponents;
pub mod field;
pub mod solver;
pub mod verify;

pub use bound::{BoundMethod, BoundReport, GrowthFunction};
pub use constants::{BoundConstants, GnConstants, GnProvenance};
pub use exponents::{DomainSpec, ExponentConfig, Geometry, ModelParams};
pub use field::{EnergySeries, Grid, State};
pub use solver::{BlowupVerdict, SolverConfig, Trajectory, VerdictKind};
pub use verify::{CheckResult, VerifyReport};
