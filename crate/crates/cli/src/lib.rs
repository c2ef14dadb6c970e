//! Scenario runner for the planar pushing planner: TOML scenario configs,
//! CSV/SVG artifact export, plan evaluation by stochastic rollout, a
//! closed-loop perturbation simulation, and the oracle validation suites.

pub mod artifacts;
pub mod config;
pub mod run;
pub mod svg;
