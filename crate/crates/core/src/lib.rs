//! Numerical tools for rate- and size-induced tipping in scalar
//! nonautonomous Riccati equations
//!
//! ```text
//! y' = -(y - Gamma_c^h(t))^2 + p(t) + lambda
//! ```
//!
//! where `Gamma` is a transition between two asymptotic levels, `c` its
//! rate, `h` a sample-and-hold period and `p` a bounded forcing.
//!
//! * [`coeffs`]: coefficient paths, the rate/hold transition family, norms.
//! * [`ivp`]: adaptive Dormand-Prince integration with breakpoint handling
//!   and finite-time blow-up detection.
//! * [`pullback`]: pullback attractor/repeller solutions and the A/B/C
//!   dichotomy.
//! * [`bifurcation`]: the bifurcation value `lambda*`, tipping rates,
//!   step limits and surface sweeps.
//! * [`hullscan`]: shifted-forcing scans along the hull.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod coeffs;
pub mod hullscan;
pub mod ivp;
pub mod pullback;

pub use bifurcation::{lambda_star, BifurcationResult, BisectionOptions};
pub use coeffs::{PiecewisePath, ProblemSpec, Rate, Side, TransitionSpec};
pub use ivp::{integrate, IvpParams, Trajectory};
pub use pullback::{classify, Classification, HorizonParams, Verdict};
