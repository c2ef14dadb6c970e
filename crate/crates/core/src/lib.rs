//! Belief-space planning and quasi-static simulation for planar pushing.
//!
//! A robot pushes a circular object across a plane. Contact is the only way
//! to move the object, and every touch injects noise into its position, so
//! the planner reasons about a particle belief over object positions instead
//! of a single state. Trajectories are parameterized by a handful of
//! via-points, scored by rolling the belief through the contact dynamics,
//! and optimized with CMA-ES in a latent space whose prior combines a
//! smoothness term with a contact-seeking term. A receding-horizon wrapper
//! executes plans in short segments and replans from the simulated outcome.
//!
//! Modules mirror that pipeline: [`geometry`] (signed distances and contact
//! frames), [`dynamics`] (penetration-resolving object steps and noise),
//! [`belief`] (particle sets, variance prediction, rollouts), [`trajectory`]
//! (via-point splines, time scaling), [`priors`] (contact and smoothness
//! Gaussians, their product, the latent decode), [`optimizer`] (CMA-ES,
//! costs, single-horizon planning), [`receding`] (execution loop, MPC step,
//! baseline), and [`oracles`] (closed-form and Monte-Carlo reference values
//! used by the validation suites).

pub mod belief;
pub mod dynamics;
pub mod geometry;
pub mod optimizer;
pub mod oracles;
pub mod priors;
pub mod receding;
pub mod rng;
pub mod trajectory;

pub use belief::{BeliefTrajectory, ParticleBelief};
pub use dynamics::{
    contact_indicator, nominal_step, stochastic_step, DynamicsError, NoiseFamily, NoiseModel,
    ObjectState, RobotCommand, Scene, StepParams,
};
pub use geometry::{contact_frame, signed_distance, CircleGeom, ContactInfo, EffectorPose,
    EffectorShape, RectGeom};
pub use optimizer::{CandidateResult, CmaState, PlannerConfig, PlannerError, Task};
pub use priors::GaussianPrior;
pub use receding::{HorizonConfig, PlanLog, PlanOutcome};
pub use trajectory::{BoundaryConditions, MotionLimits, TrajectoryParams};
