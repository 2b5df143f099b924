//! Turning trajectories into verdicts.
//!
//! * [`example1`]: exact and Monte Carlo expectations of one biased step.
//! * [`rates`]: log-log rate fits.
//! * [`bounds`]: explicit theorem bounds and their empirical checks.
//! * [`montecarlo`]: seed-averaged descent inequalities and the liminf trend.
//! * [`lemmas`]: randomized checks of the supporting inequalities.

pub mod bounds;
pub mod example1;
pub mod lemmas;
pub mod montecarlo;
pub mod rates;

pub use bounds::{
    bound_report_from_samples, check_bound_empirically, theorem_convex_bound, theorem_nonconvex_bound,
    BoundEvaluation, BoundParams, BoundReport, BoundSetup, Theorem,
};
pub use example1::{example1_exact, unbiased_direction_check};
pub use lemmas::{lemma_checks, Lemma, LemmaReport};
pub use montecarlo::{bounded_sum_squares_check, descent_lemma_check, liminf_trend, InequalityReport, LiminfTrend};
pub use rates::{fit_rate, RateEstimate};
