//! Receding-horizon planning: alternate single-horizon optimization with a
//! stochastic rollout of the executed command prefix, shifting the robot
//! boundary conditions to the planned state at the execution cut. Includes
//! the closed-loop MPC step (optional measurement update before planning)
//! and the variance-blind baseline planner.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::belief::{empirical_mean, measurement_update, ParticleBelief};
use crate::dynamics::{stochastic_step, NoiseModel, ObjectState, RobotCommand, Scene, StepParams};
use crate::optimizer::{
    bs_vp_sto, wrap_progress, CandidateResult, PlannerConfig, PlannerError, Task,
};
use crate::rng::{stream, Domain};
use crate::trajectory::{evaluate, BoundaryConditions, TrajectoryParams};

/// Slack on the gain-validity check, absorbing roundoff at the barrier.
pub const GAIN_VALID_TOL: f64 = 1e-9;

/// Outer-loop configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonConfig {
    /// Commands executed per horizon (H), 1 <= H <= K.
    pub execute_steps: usize,
    /// Success tolerance on the belief mean (m).
    pub tolerance: f64,
    /// Outer-iteration cap before reporting failure.
    pub max_outer: usize,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        // Four steps of the default 20-step horizon, about 0.2 s of motion.
        Self { execute_steps: 4, tolerance: 0.01, max_outer: 500 }
    }
}

/// Terminal status of a receding-horizon run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutcome {
    /// Task predicate met; under the robust planner every executed horizon
    /// also satisfied the gain constraint at planning time.
    Success { iterations: usize },
    /// Task predicate met but some executed horizon violated the gain
    /// constraint, so the plan carries no robustness guarantee.
    GainViolation { iterations: usize },
    /// A horizon produced no feasible candidate.
    NoPlan { at_horizon: usize },
    /// The outer-iteration cap was reached.
    IterationLimit,
}

impl PlanOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, PlanOutcome::Success { .. })
    }
}

/// Everything recorded about one executed horizon.
#[derive(Debug, Clone)]
pub struct HorizonRecord {
    /// Boundary conditions the horizon was planned from.
    pub bc_in: BoundaryConditions,
    /// Planned state at the execution cut; the next horizon starts here.
    pub bc_out: BoundaryConditions,
    /// Belief the horizon was planned on.
    pub belief_in: ParticleBelief,
    /// Belief after the stochastic rollout of the executed prefix.
    pub belief_out: ParticleBelief,
    /// Planned per-step variance gains over the full horizon.
    pub gains: Vec<f64>,
    pub max_gain: f64,
    pub fitness: f64,
    /// Planned horizon duration (s).
    pub duration: f64,
    /// Particles frozen by unresolvable contact during the rollout.
    pub frozen: usize,
}

/// Receding-horizon run log: the concatenated executed commands plus one
/// record per completed horizon.
#[derive(Debug, Clone)]
pub struct PlanLog {
    pub commands: Vec<RobotCommand>,
    pub initial_belief: ParticleBelief,
    pub horizons: Vec<HorizonRecord>,
    pub outcome: PlanOutcome,
}

/// Stochastic rollout output; `frozen` counts particles stopped by
/// unresolvable contact (they stay where they were).
#[derive(Debug, Clone)]
pub struct RolloutResult {
    pub belief: ParticleBelief,
    pub frozen: usize,
}

/// Propagate each particle independently through the noisy dynamics for the
/// given command prefix. Per-particle RNG substreams keyed on (seed,
/// horizon, particle) keep the result independent of the parallel schedule.
pub fn stochastic_rollout(
    b: &ParticleBelief,
    initial: &RobotCommand,
    commands: &[RobotCommand],
    scene: &Scene,
    noise: &NoiseModel,
    seed: u64,
    horizon: u64,
) -> RolloutResult {
    let params = StepParams::default();
    let stepped: Vec<(ObjectState, bool)> = b
        .particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = stream(seed, Domain::Rollout, horizon, i as u64);
            let mut pos = *p;
            let mut prev = initial;
            for u in commands {
                match stochastic_step(&pos, prev, u, scene, noise, &params, &mut rng) {
                    Ok(next) => pos = next,
                    Err(_) => return (pos, true),
                }
                prev = u;
            }
            (pos, false)
        })
        .collect();
    let frozen = stepped.iter().filter(|(_, f)| *f).count();
    let belief = ParticleBelief {
        particles: stepped.into_iter().map(|(p, _)| p).collect(),
        weights: b.weights.clone(),
    };
    RolloutResult { belief, frozen }
}

/// Task predicate on the belief mean. Path tasks additionally require a full
/// accumulated lap.
fn task_solved(belief: &ParticleBelief, task: &Task, tolerance: f64, path_acc: f64) -> bool {
    let mean = empirical_mean(belief);
    match task {
        Task::Target { position } => (mean - position).norm() <= tolerance,
        Task::Path(path) => {
            let radial_err = ((mean - path.center).norm() - path.radius).abs();
            path_acc >= 1.0 && radial_err <= tolerance
        }
    }
}

/// Planned robot state at the execution cut t = T H / K.
fn shift_boundary(
    cand: &CandidateResult,
    bc: &BoundaryConditions,
    config: &PlannerConfig,
    scene: &Scene,
    execute_steps: usize,
) -> BoundaryConditions {
    let params = TrajectoryParams::new(cand.theta.clone(), config.n_via, scene.config_dim());
    let t_cut = cand.duration * execute_steps as f64 / config.n_steps as f64;
    let (q, qd, _) = evaluate(&params, bc, cand.duration, t_cut);
    BoundaryConditions::new(q, qd)
}

fn validate_horizon(hconfig: &HorizonConfig, pconfig: &PlannerConfig) -> Result<(), PlannerError> {
    if hconfig.execute_steps < 1 || hconfig.execute_steps > pconfig.n_steps {
        return Err(PlannerError::InvalidConfig(format!(
            "execute_steps must lie in 1..={}, got {}",
            pconfig.n_steps, hconfig.execute_steps
        )));
    }
    if hconfig.max_outer < 1 || !(hconfig.tolerance > 0.0) {
        return Err(PlannerError::InvalidConfig(
            "max_outer must be >= 1 and tolerance positive".into(),
        ));
    }
    Ok(())
}

/// Open-loop receding-horizon planning. Each outer iteration plans a full
/// horizon, executes its first `execute_steps` commands through the
/// stochastic rollout, and restarts planning from the planned robot state at
/// the cut. The success check runs before each planning call, so a belief
/// already at the goal returns an empty success log. `seed` drives every
/// random draw of the run.
pub fn plan_receding(
    bc0: &BoundaryConditions,
    b0: &ParticleBelief,
    scene: &Scene,
    task: &Task,
    hconfig: &HorizonConfig,
    pconfig: &PlannerConfig,
    seed: u64,
) -> Result<PlanLog, PlannerError> {
    let pconfig = PlannerConfig { seed, ..pconfig.clone() };
    pconfig.validate()?;
    validate_horizon(hconfig, &pconfig)?;

    let mut bc = bc0.clone();
    let mut belief = b0.clone();
    let mut commands = Vec::new();
    let mut horizons: Vec<HorizonRecord> = Vec::new();
    let mut gains_valid = true;

    // Path progress accumulates wrapped per-horizon deltas, so laps count.
    let mut path_acc = 0.0;
    let mut s_prev = match task {
        Task::Path(path) => path.param_of(&empirical_mean(&belief)),
        Task::Target { .. } => 0.0,
    };

    let mut outcome = PlanOutcome::IterationLimit;
    for outer in 0..hconfig.max_outer {
        if task_solved(&belief, task, hconfig.tolerance, path_acc) {
            outcome = if gains_valid {
                PlanOutcome::Success { iterations: outer }
            } else {
                PlanOutcome::GainViolation { iterations: outer }
            };
            break;
        }

        let cand = match bs_vp_sto(&bc, &belief, scene, task, &pconfig, outer as u64) {
            Ok(c) => c,
            Err(PlannerError::NoValidPlan) => {
                outcome = PlanOutcome::NoPlan { at_horizon: outer };
                break;
            }
            Err(e) => return Err(e),
        };
        if pconfig.robust && cand.max_gain > 1.0 + GAIN_VALID_TOL {
            gains_valid = false;
        }

        let executed = &cand.commands[..hconfig.execute_steps];
        let initial = scene.command_from_config(&bc.q0);
        let roll = stochastic_rollout(
            &belief,
            &initial,
            executed,
            scene,
            &pconfig.noise,
            seed,
            outer as u64,
        );
        let bc_out = shift_boundary(&cand, &bc, &pconfig, scene, hconfig.execute_steps);

        if let Task::Path(path) = task {
            let s_now = path.param_of(&empirical_mean(&roll.belief));
            path_acc += wrap_progress(s_now - s_prev);
            s_prev = s_now;
        }

        horizons.push(HorizonRecord {
            bc_in: bc.clone(),
            bc_out: bc_out.clone(),
            belief_in: belief.clone(),
            belief_out: roll.belief.clone(),
            gains: cand.gains.clone(),
            max_gain: cand.max_gain,
            fitness: cand.fitness,
            duration: cand.duration,
            frozen: roll.frozen,
        });
        commands.extend_from_slice(executed);
        belief = roll.belief;
        bc = bc_out;
    }

    // The loop can also exhaust with the task solved on the very last belief.
    if outcome == PlanOutcome::IterationLimit
        && task_solved(&belief, task, hconfig.tolerance, path_acc)
    {
        outcome = if gains_valid {
            PlanOutcome::Success { iterations: hconfig.max_outer }
        } else {
            PlanOutcome::GainViolation { iterations: hconfig.max_outer }
        };
    }

    Ok(PlanLog { commands, initial_belief: b0.clone(), horizons, outcome })
}

/// Squared Mahalanobis distance (under the observation noise) from the
/// observation to the nearest particle beyond which the filter is treated as
/// diverged. Reweighting only redistributes mass over existing particles, so
/// past this point the cloud is reseeded from the sensor model instead.
/// 7 sigma: in-distribution noise crosses it with probability ~2e-11.
pub const RESEED_GATE: f64 = 49.0;

/// One closed-loop step: the post-update belief, the commands to execute,
/// and the boundary conditions to plan the next step from.
#[derive(Debug, Clone)]
pub struct MpcStep {
    /// Commands for this control cycle, `execute_steps` of them.
    pub commands: Vec<RobotCommand>,
    /// Belief after the (optional) measurement update.
    pub belief: ParticleBelief,
    /// Planned robot state at the cut; current state held on fallback.
    pub bc_next: BoundaryConditions,
    /// The chosen candidate; None when planning failed and the commands hold
    /// the current position.
    pub planned: Option<CandidateResult>,
    /// True when the measurement likelihoods all underflowed.
    pub degenerate_update: bool,
    /// True when the observation was implausible under every particle and the
    /// belief was reseeded around it.
    pub reseeded: bool,
}

/// Closed-loop planning step: fold in an observation when one is available,
/// then plan a single horizon. A planning failure degrades to hold-position
/// commands rather than an error so the control loop can keep running.
pub fn mpc_step(
    belief: &ParticleBelief,
    observation: Option<&Vector2<f64>>,
    obs_noise_cov: &Matrix2<f64>,
    bc: &BoundaryConditions,
    scene: &Scene,
    task: &Task,
    hconfig: &HorizonConfig,
    pconfig: &PlannerConfig,
    step_index: u64,
) -> Result<MpcStep, PlannerError> {
    pconfig.validate()?;
    validate_horizon(hconfig, pconfig)?;

    let mut degenerate_update = false;
    let mut reseeded = false;
    let belief = match observation {
        Some(obs) => {
            let mut rng = stream(pconfig.seed, Domain::Belief, step_index, 0);
            let inv = obs_noise_cov
                .try_inverse()
                .expect("observation covariance must be invertible");
            let nearest = belief
                .particles
                .iter()
                .map(|p| {
                    let d = obs - p.position;
                    (d.transpose() * inv * d)[(0, 0)]
                })
                .fold(f64::INFINITY, f64::min);
            if nearest > RESEED_GATE {
                reseeded = true;
                ParticleBelief::sample_gaussian(obs, obs_noise_cov, belief.particles.len(), &mut rng)
            } else {
                let update = measurement_update(belief, obs, obs_noise_cov, &mut rng);
                degenerate_update = update.degenerate;
                update.belief
            }
        }
        None => belief.clone(),
    };

    match bs_vp_sto(bc, &belief, scene, task, pconfig, step_index) {
        Ok(cand) => {
            let commands = cand.commands[..hconfig.execute_steps].to_vec();
            let bc_next = shift_boundary(&cand, bc, pconfig, scene, hconfig.execute_steps);
            Ok(MpcStep { commands, belief, bc_next, planned: Some(cand), degenerate_update, reseeded })
        }
        Err(PlannerError::NoValidPlan) => {
            let hold = scene.command_from_config(&bc.q0);
            Ok(MpcStep {
                commands: vec![hold; hconfig.execute_steps],
                belief,
                bc_next: BoundaryConditions::at_rest(bc.q0.clone()),
                planned: None,
                degenerate_update,
                reseeded,
            })
        }
        Err(e) => Err(e),
    }
}

/// Variance-blind baseline: a single known object position, no robustness
/// cost or gain constraint, and a noiseless internal model, so its rollout
/// of its own plan is deterministic. The contact-seeking prior is kept; the
/// baseline differs only in its treatment of uncertainty.
pub fn baseline_plan(
    q_o_known: &Vector2<f64>,
    bc: &BoundaryConditions,
    scene: &Scene,
    task: &Task,
    hconfig: &HorizonConfig,
    pconfig: &PlannerConfig,
    seed: u64,
) -> Result<PlanLog, PlannerError> {
    let baseline_config = PlannerConfig {
        robust: false,
        noise: NoiseModel { variance_w: 0.0, ..pconfig.noise.clone() },
        ..pconfig.clone()
    };
    let b0 = ParticleBelief::point(*q_o_known);
    plan_receding(bc, &b0, scene, task, hconfig, &baseline_config, seed)
}
