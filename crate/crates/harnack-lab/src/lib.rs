//! Numerical verification lab for dimension-free log-Harnack inequalities.
//!
//! The crate simulates finite-dimensional diffusions `dX = b(X)dt + σ(X)dB`
//! and spectral Galerkin truncations of a Hilbert-space SDE with
//! state-dependent noise, and turns the inequalities that govern their
//! semigroups into pass/fail numerical checks with explicit tolerances:
//!
//! * the log-Harnack bound `P_t log f(x) ≤ log P_t f(y) + c_t ‖σ̃₀⁻¹(x−y)‖²`
//!   with `c_t = K / (2(1 − e^{−Kt}))`,
//! * the synchronous-coupling contraction `E‖σ̃₀⁻¹(X_t−Y_t)‖² ≤ e^{Kt}‖σ̃₀⁻¹(x−y)‖²`,
//! * the gradient estimate `‖σ̃₀ ∇P_t f‖² ≤ e^{Kt} P_t ‖σ̃₀ ∇f‖²`,
//! * the entropy-production identity relating `P_s log P_{t−s} f` to the
//!   integrated squared gradient of `log P_{t−r} f`,
//! * Galerkin truncation convergence `E‖X_tⁿ − X_t‖² → 0`,
//! * the strong-Feller modulus, heat-kernel entropy bound, and entropy-cost
//!   (transport) inequality for the grid transition kernel.
//!
//! Estimates come from two independent routes: reproducible parallel Monte
//! Carlo (counter-based noise, deterministic reductions) and a deterministic
//! 1-D Kolmogorov backward solver with a grid Markov kernel. Transport costs
//! are solved exactly by linear programming and approximately by entropic
//! regularization.

pub mod config;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod model;
pub mod oracle1d;
pub mod rng;
pub mod suite;
pub mod transport;
pub mod verify;

pub use error::LabError;
