//! Level-set expansion solvers for simple convex bilevel problems.
//!
//! The bilevel problem is
//!
//! ```text
//! minimize ω(x)  subject to  x ∈ argmin { φ(u) = f(u) + g(u) }
//! ```
//!
//! where `f` is smooth, `g` is proximable and `ω` has compact level sets with
//! a global Hölderian error bound. The solvers never project onto the implicit
//! solution set of the inner problem. Instead they grow a level `α` of the
//! outer function and approximately solve the lifted problem
//!
//! ```text
//! h(α) = min { φ(y₁) + ‖y₁ − y₂‖² : ω(y₂) ≤ α }
//! ```
//!
//! at each level, certifying how far `α` may safely be raised.
//!
//! Layout:
//! - [`model`]: inner/outer objectives, bilevel instances, lifted points.
//! - [`geometry`]: level-set projections, linear minimization oracles and
//!   error-bound constants for the shipped outer functions.
//! - [`steps`]: one conditional-gradient or proximal-gradient step on the lifted
//!   problem together with its optimality measure.
//! - [`oracles`]: approximation and expansion oracles.
//! - [`italex`]: fixed- and changing-tolerance drivers, the smooth-inner
//!   variant and iteration-budget diagnostics.
//! - [`apg`]: accelerated proximal gradient shared by the inner and reference solvers.
//! - [`baselines`]: BiG-SAM and iterative-regularization proximal gradient.

pub mod apg;
pub mod baselines;
pub mod error;
pub mod geometry;
pub mod italex;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod steps;

pub use error::{Result, SolverError};
pub use geometry::{LevelSetGeometry, OuterFunction, OuterGeometry};
pub use model::{BilevelInstance, InnerRegularizer, LeastSquares, LiftedPoint, Reference};
pub use steps::StepRule;

/// Dense real vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
