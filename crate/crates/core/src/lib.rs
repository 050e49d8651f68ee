//! Network-friendly recommendation policies.
//!
//! A user session is a sequence of content requests: after each item the user
//! follows one of `N` recommendations with probability `alpha`, or jumps to a
//! catalog item drawn from the popularity vector `p0`. Each access has a cost
//! (e.g. 1 for a cache miss, 0 for a hit). This crate computes recommendation
//! policies that minimise the long-term expected cost per request while
//! keeping every item's recommendation quality above a fraction `q` of what a
//! similarity-only recommender would achieve.
//!
//! * [`model`]: scenarios, policies, baseline recommender and quality accounting.
//! * [`amc`]: analytic evaluation through the absorbing-chain fundamental matrix.
//! * [`lp_build`]: linear-program formulations of the myopic and long-session
//!   problems and policy recovery from their solutions.
//! * [`lp_solve`]: a dense two-phase bounded simplex plus sparse and external
//!   back ends.
//! * [`policies`]: one-call construction of the compared policies.
//! * [`sim`]: Monte Carlo session simulator, brute-force optimum and slate rendering.
//! * [`data`]: edge-list ingestion, synthetic graphs, popularity and cache placement.
//! * [`config`]: scenario configuration files.

pub mod amc;
pub mod config;
pub mod data;
pub mod lp_build;
pub mod lp_solve;
pub mod model;
pub mod policies;
pub mod sim;

pub use amc::{ltec, EvalReport};
pub use model::{Policy, Scenario};
