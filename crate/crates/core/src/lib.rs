//! Planning and verification engine for two-handed vanilla siteswap juggling.
//!
//! - [`siteswap`]: notation, juggling states, graph search over patterns.
//! - [`ballistics`]: throw sequences to timed contact switches.
//! - [`trajectory`]: piecewise-constant-jerk hand trajectories.
//! - [`optimizer`]: per-cycle constrained trajectory optimization.
//! - [`planner`]: schedule context to cycle inputs.
//! - [`simulator`]: ball physics, funnel hands and closed-loop episodes.

pub mod ballistics;
pub mod config;
pub mod harness;
pub mod optimizer;
pub mod planner;
pub mod simulator;
pub mod siteswap;
pub mod trajectory;
