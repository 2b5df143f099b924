//! Stochastic gradient descent with generalized AdaGrad stepsizes.
//!
//! The crate is organized bottom-up:
//!
//! * [`problems`]: smooth test objectives with analytically known constants.
//! * [`oracle`]: stochastic first-order oracles and seeded random streams.
//! * [`stepsize`]: global and coordinate-wise AdaGrad stepsizes with delayed
//!   accumulation, plus deterministic polynomial schedules.
//! * [`optimizer`]: the SGD loop, trajectory recording and iterate selection.
//! * [`analysis`]: rate fits, theorem-bound evaluation, Monte Carlo checks of
//!   the descent inequalities and randomized checks of the supporting lemmas.
//! * [`parallel`]: seed-level fan-out, backed by rayon when the `parallel`
//!   feature is enabled.

pub mod analysis;
pub mod error;
pub mod optimizer;
pub mod oracle;
pub mod parallel;
pub mod problems;
pub mod rng;
pub mod stats;
pub mod stepsize;
pub mod vector;

pub use error::{Error, Result};
pub use vector::Vector;
