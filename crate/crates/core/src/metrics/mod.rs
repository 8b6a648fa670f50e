//! Evaluation: BC/ADV proxies, value comparisons, bounds and their
//! empirical counterparts.

mod bounds;
mod lipschitz;
mod proxy;
mod record;

pub use bounds::{theorem_bounds, BoundFlag, TheoremBounds, OVERFLOW_SENTINEL};
pub use lipschitz::{estimate_lipschitz, estimate_lipschitz_sampled, EstimateMethod, LipschitzEstimates};
pub use proxy::{
    lemma_checks, proxy_mc, relative_exploitability, reward_vs_expert, LemmaCheck, LemmaReport,
    ProxyEstimate, RelativeExploitability, RewardComparison, DEGENERATE_VALUE,
};
pub use record::MetricsRecord;
