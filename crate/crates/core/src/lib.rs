//! Simulation and numerical-verification laboratory for Kac's random walk on
//! the unit sphere `S^{n-1}`.
//!
//! The chain rotates a uniformly chosen coordinate 2-plane by a uniform angle
//! at every step. This crate provides:
//!
//! * [`sphere`] — unit vectors, Givens-plane rotations, uniform sphere
//!   sampling, and counter-based random streams ([`rng`]).
//! * [`walk`] — the chain itself: single steps, pair-coverage tracking,
//!   walker ensembles and conditional (covered-only) ensembles.
//! * [`bounds`] — closed-form evaluation of the mixing-time machinery:
//!   coupon-collector tail, coordinate marginals, spectral rates, density
//!   bounds, and the full step-schedule optimization.
//! * [`metrics`] — empirical mixing diagnostics: marginal total-variation
//!   lower bounds, Wasserstein-2 transport (exact assignment and a sliced
//!   heuristic), small-coordinate mass, and observable decay fits.
//! * [`density`] — deterministic verification on a discretized `S^2`: the
//!   kernel as a quadrature operator, circle-averaging pushforwards, and the
//!   technical integral inequality behind the density induction.
//!
//! Ensembles evolve data-parallel under the `parallel` feature (rayon) with a
//! sequential fallback; per-walker random streams and fixed-order reductions
//! make results independent of the thread count.

pub mod bounds;
pub mod density;
pub mod metrics;
pub mod quad;
pub mod rng;
pub mod sphere;
pub mod stats;
pub mod walk;

pub use rng::RandomStream;
pub use sphere::{RotationEvent, SpherePoint};
pub use walk::{EnsembleConfig, EnsembleSnapshot, WalkState};
