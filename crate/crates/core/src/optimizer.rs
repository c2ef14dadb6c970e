//! Single-horizon stochastic trajectory optimization: sample latent
//! via-point candidates from the prior product, decode and time-scale them,
//! roll out the belief, score robustness and task cost, and adapt the latent
//! search distribution with CMA-ES.
//!
//! The CMA-ES implementation is self-contained and follows the standard
//! (mu/mu_w, lambda) update: weighted recombination, rank-one and rank-mu
//! covariance updates, and cumulative step-size adaptation. Fitness enters
//! only through ranks, so any strictly increasing transform of the scores
//! leaves the update unchanged.

use nalgebra::{DMatrix, DVector, Vector2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::belief::{
    empirical_mean, gaussian_fit, nominal_rollout, BeliefTrajectory, ParticleBelief,
};
use crate::dynamics::{NoiseModel, RobotCommand, Scene, StepParams};
use crate::geometry::effector_pair_distance;
use crate::priors::{
    lift_to_trajectory, product_of_gaussians, scene_contact_prior, GaussianPrior, LatentMap,
};
use crate::rng::{stream, Domain};
use crate::trajectory::{
    discretize, smoothness_prior, time_scale, BoundaryConditions, MotionLimits, TrajectoryParams,
};

/// Fitness assigned to candidates whose rollout hits an unresolvable contact.
pub const INFEASIBLE_SENTINEL: f64 = 1e6;
/// Additive penalty per step violating a hard constraint.
pub const STEP_PENALTY: f64 = 1e3;
/// Weight applied to the robustness product when any gain exceeds one.
pub const GAIN_BARRIER_WEIGHT: f64 = 1e3;

/// CMA-ES search state over the latent candidate space.
#[derive(Debug, Clone)]
pub struct CmaState {
    pub mean: DVector<f64>,
    /// Shape covariance (SPD); the sampling covariance is sigma^2 * cov.
    pub cov: DMatrix<f64>,
    pub sigma: f64,
    /// Step-size evolution path.
    pub p_sigma: DVector<f64>,
    /// Covariance evolution path.
    pub p_c: DVector<f64>,
    pub generation: usize,
}

impl CmaState {
    /// White-noise initial distribution: zero mean, identity covariance,
    /// unit step size.
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
            sigma: 1.0,
            p_sigma: DVector::zeros(dim),
            p_c: DVector::zeros(dim),
            generation: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Symmetric matrix function through the eigendecomposition, with
/// eigenvalues clamped away from zero so the result stays finite.
fn sym_matrix_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = f(se.eigenvalues[i].max(1e-20));
    }
    &se.eigenvectors * d * se.eigenvectors.transpose()
}

/// Any root B with B B' = cov, for sampling. Cholesky when possible, the
/// symmetric square root otherwise.
fn sample_root(cov: &DMatrix<f64>) -> DMatrix<f64> {
    match cov.clone().cholesky() {
        Some(ch) => ch.l(),
        None => sym_matrix_fn(cov, f64::sqrt),
    }
}

/// One generation of the standard CMA-ES update from scored samples.
/// Non-finite fitness entries are dropped before ranking; if none remain the
/// distribution is left unchanged (the generation counter still advances).
pub fn cmaes_step(state: &CmaState, scored: &[(DVector<f64>, f64)]) -> CmaState {
    assert!(!scored.is_empty(), "cmaes_step needs at least one sample");
    let dim = state.dim();
    let n = dim as f64;

    let mut pop: Vec<&(DVector<f64>, f64)> =
        scored.iter().filter(|(_, f)| f.is_finite()).collect();
    if pop.is_empty() {
        let mut next = state.clone();
        next.generation += 1;
        return next;
    }
    // Stable sort: equal fitnesses keep sample order, so ties are broken by
    // the earliest sample.
    pop.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("fitness is finite"));

    let lambda = pop.len();
    let mu = (lambda / 2).max(1);
    let mut w: Vec<f64> = (1..=mu)
        .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
        .collect();
    let wsum: f64 = w.iter().sum();
    if wsum > 0.0 {
        for wi in &mut w {
            *wi /= wsum;
        }
    } else {
        w = vec![1.0 / mu as f64; mu];
    }
    let mu_eff = 1.0 / w.iter().map(|wi| wi * wi).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    let c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
    let c_mu = (1.0 - c_1)
        .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff))
        .max(0.0);
    let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    let ys: Vec<DVector<f64>> = pop
        .iter()
        .take(mu)
        .map(|(x, _)| (x - &state.mean) / state.sigma)
        .collect();
    let mut y_w = DVector::zeros(dim);
    for (y, wi) in ys.iter().zip(&w) {
        y_w += y * *wi;
    }

    let mean = &state.mean + &y_w * state.sigma;

    let inv_sqrt = sym_matrix_fn(&state.cov, |l| 1.0 / l.sqrt());
    let p_sigma = &state.p_sigma * (1.0 - c_sigma)
        + &inv_sqrt * &y_w * (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt();

    let completed = state.generation as f64 + 1.0;
    let unbias = (1.0 - (1.0 - c_sigma).powf(2.0 * completed)).sqrt();
    let h_sigma =
        if p_sigma.norm() / unbias < (1.4 + 2.0 / (n + 1.0)) * chi_n { 1.0 } else { 0.0 };

    let p_c = &state.p_c * (1.0 - c_c)
        + &y_w * (h_sigma * (c_c * (2.0 - c_c) * mu_eff).sqrt());

    let delta_h = (1.0 - h_sigma) * c_c * (2.0 - c_c);
    let mut cov = &state.cov * (1.0 - c_1 - c_mu)
        + (&p_c * p_c.transpose() + &state.cov * delta_h) * c_1;
    for (y, wi) in ys.iter().zip(&w) {
        cov += y * y.transpose() * (c_mu * *wi);
    }
    cov = (&cov + &cov.transpose()) * 0.5;

    let sigma = state.sigma * ((c_sigma / d_sigma) * (p_sigma.norm() / chi_n - 1.0)).exp();

    CmaState { mean, cov, sigma, p_sigma, p_c, generation: state.generation + 1 }
}

/// Robustness barrier cost over the per-step variance gains: a product of
/// exponentials rewarding gains below one, scaled by a large weight when any
/// gain exceeds one.
pub fn robustness_cost(gains: &[f64]) -> f64 {
    assert!(!gains.is_empty(), "robustness cost needs at least one gain");
    let max_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weight = if max_gain <= 1.0 { 1.0 } else { GAIN_BARRIER_WEIGHT };
    let d = (gains.len() - 1).max(1) as f64;
    weight * gains.iter().map(|g| (-(1.0 - g) / d).exp()).product::<f64>()
}

/// Target-reaching cost: exponential in the distance progress of the belief
/// mean, invariant to the absolute distance from the target.
pub fn progress_cost(
    b0: &ParticleBelief,
    bk: &ParticleBelief,
    target: &Vector2<f64>,
    w_progress: f64,
) -> f64 {
    let d0 = (empirical_mean(b0) - target).norm();
    let dk = (empirical_mean(bk) - target).norm();
    (-w_progress * (d0 - dk)).exp()
}

/// Circular reference path, parameterized by arc fraction s in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePath {
    pub center: Vector2<f64>,
    pub radius: f64,
}

impl CirclePath {
    pub fn new(center: Vector2<f64>, radius: f64) -> Self {
        assert!(radius > 0.0, "path radius must be positive");
        Self { center, radius }
    }

    pub fn point(&self, s: f64) -> Vector2<f64> {
        let a = std::f64::consts::TAU * s;
        self.center + Vector2::new(a.cos(), a.sin()) * self.radius
    }

    /// Arg-min path parameter for a point: the parameter of its angular
    /// projection. The path center itself maps to s = 0.
    pub fn param_of(&self, p: &Vector2<f64>) -> f64 {
        let d = p - self.center;
        if d.norm() == 0.0 {
            return 0.0;
        }
        (d.y.atan2(d.x) / std::f64::consts::TAU).rem_euclid(1.0)
    }
}

/// Shortest signed arc between two path parameters, in (-0.5, 0.5].
pub fn wrap_progress(ds: f64) -> f64 {
    ds - ds.round()
}

/// Path-tracking cost: exponential in (minus) the wrapped path progress of
/// the belief mean plus a quadratic tracking-error term at the final step.
pub fn path_tracking_cost(
    b0: &ParticleBelief,
    bk: &ParticleBelief,
    path: &CirclePath,
    w_progress: f64,
    w_error: f64,
) -> f64 {
    let m0 = empirical_mean(b0);
    let mk = empirical_mean(bk);
    let s0 = path.param_of(&m0);
    let sk = path.param_of(&mk);
    let ds = wrap_progress(sk - s0);
    let err = (mk - path.point(sk)).norm();
    (-w_progress * ds).exp() + w_error * err * err
}

/// Planning objective: reach a point or track a circular path.
#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Target { position: Vector2<f64> },
    Path(CirclePath),
}

/// Single-horizon planner configuration. Motion limits are uniform across
/// effector coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Candidates per generation (lambda).
    pub n_candidates: usize,
    /// CMA-ES generations (M). One generation is pure informed sampling.
    pub n_iterations: usize,
    /// Via-points per candidate (N).
    pub n_via: usize,
    /// Discretization steps per horizon (K).
    pub n_steps: usize,
    pub noise: NoiseModel,
    pub w_progress: f64,
    pub w_error: f64,
    /// Per-coordinate velocity limit for time scaling.
    pub v_max: f64,
    /// Per-coordinate acceleration limit for time scaling.
    pub a_max: f64,
    /// Acceleration-metric scale of the smoothness prior.
    pub r_q: f64,
    /// Reference duration at which the prior is conditioned.
    pub t_ref: f64,
    /// Blend the contact-seeking prior into the sampling distribution.
    pub use_contact_prior: bool,
    /// Score candidates with the robustness barrier. Disabled by the
    /// variance-blind baseline.
    pub robust: bool,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            n_candidates: 30,
            n_iterations: 20,
            n_via: 3,
            n_steps: 20,
            noise: NoiseModel::gaussian(1e-4),
            w_progress: 100.0,
            w_error: 2000.0,
            v_max: 0.5,
            a_max: 2.0,
            // Via-point marginal std at the reference duration is roughly
            // sqrt(t_ref^3 / (12 r_q)) per coordinate: ~0.18 m here, matching
            // desk-scale scenes.
            r_q: 20.0,
            t_ref: 2.0,
            use_contact_prior: true,
            robust: true,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let positive_counts = self.n_candidates >= 1
            && self.n_iterations >= 1
            && self.n_via >= 1
            && self.n_steps >= 1;
        if !positive_counts {
            return Err(PlannerError::InvalidConfig(
                "candidate, iteration, via-point, and step counts must all be >= 1".into(),
            ));
        }
        // RNG substream packing: candidate index in 8 bits, generation in 20.
        if self.n_candidates > 256 || self.n_iterations > (1 << 20) {
            return Err(PlannerError::InvalidConfig(
                "at most 256 candidates and 2^20 iterations are supported".into(),
            ));
        }
        if !(self.v_max > 0.0 && self.a_max > 0.0) {
            return Err(PlannerError::InvalidConfig("motion limits must be positive".into()));
        }
        if !(self.r_q > 0.0 && self.t_ref > 0.0) {
            return Err(PlannerError::InvalidConfig(
                "prior scale and reference duration must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("no feasible candidate in any generation")]
    NoValidPlan,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}

/// Scored candidate trajectory. `fitness` is the sum of the three cost
/// components; infeasible rollouts carry the sentinel as their penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    /// Via-point parameters (decoded latent).
    pub theta: DVector<f64>,
    /// Time-scaled duration (s).
    pub duration: f64,
    /// Per-step variance gains (empty when the rollout was infeasible).
    pub gains: Vec<f64>,
    /// Max gain; +inf for infeasible rollouts.
    pub max_gain: f64,
    pub c_robust: f64,
    pub c_task: f64,
    pub penalty: f64,
    pub fitness: f64,
    pub feasible: bool,
    /// Global sample index (generation-major), the tie-break key.
    pub sample_index: usize,
    /// Discretized commands at times T(k+1)/K.
    pub commands: Vec<RobotCommand>,
}

/// Hard-constraint penalties on a command sequence: effector-effector
/// collision, workspace containment, and (for two effectors) preservation of
/// the initial left/right ordering so the arms do not cross.
fn constraint_penalty(initial: &RobotCommand, commands: &[RobotCommand], scene: &Scene) -> f64 {
    let n = scene.effectors.len();
    let ordering_axis = (n == 2)
        .then(|| {
            let d = initial.effectors[1].position - initial.effectors[0].position;
            let len = d.norm();
            (len > 0.0).then(|| d / len)
        })
        .flatten();

    let mut penalty = 0.0;
    for u in commands {
        if let Some(ws) = &scene.workspace {
            if u.effectors.iter().any(|e| !ws.contains(&e.position)) {
                penalty += STEP_PENALTY;
            }
        }
        let mut collision = false;
        for i in 0..n {
            for j in i + 1..n {
                if effector_pair_distance(
                    &scene.effectors[i],
                    &u.effectors[i],
                    &scene.effectors[j],
                    &u.effectors[j],
                ) < 0.0
                {
                    collision = true;
                }
            }
        }
        if collision {
            penalty += STEP_PENALTY;
        }
        if let Some(axis) = &ordering_axis {
            let d = u.effectors[1].position - u.effectors[0].position;
            if d.dot(axis) < 0.0 {
                penalty += STEP_PENALTY;
            }
        }
    }
    penalty
}

fn task_cost(bt: &BeliefTrajectory, task: &Task, config: &PlannerConfig) -> f64 {
    match task {
        Task::Target { position } => {
            progress_cost(bt.initial(), bt.terminal(), position, config.w_progress)
        }
        Task::Path(path) => path_tracking_cost(
            bt.initial(),
            bt.terminal(),
            path,
            config.w_progress,
            config.w_error,
        ),
    }
}

/// Deterministically score one latent candidate: decode, time-scale,
/// discretize, roll out the belief, and sum robustness, task, and penalty
/// costs. An unresolvable contact yields the sentinel fitness instead of an
/// error.
pub fn evaluate_candidate(
    sample_index: usize,
    eps: &DVector<f64>,
    latent: &LatentMap,
    bc: &BoundaryConditions,
    b0: &ParticleBelief,
    scene: &Scene,
    task: &Task,
    config: &PlannerConfig,
) -> CandidateResult {
    let theta = latent.decode(eps);
    let params = TrajectoryParams::new(theta.clone(), config.n_via, scene.config_dim());
    let limits = MotionLimits::uniform(config.v_max, config.a_max, scene.config_dim());
    let duration = time_scale(&params, bc, &limits);
    let commands = discretize(&params, bc, duration, config.n_steps, scene);
    let initial = scene.command_from_config(&bc.q0);

    match nominal_rollout(b0, &initial, &commands, scene, &StepParams::default()) {
        Err(_) => CandidateResult {
            theta,
            duration,
            gains: Vec::new(),
            max_gain: f64::INFINITY,
            c_robust: 0.0,
            c_task: 0.0,
            penalty: INFEASIBLE_SENTINEL,
            fitness: INFEASIBLE_SENTINEL,
            feasible: false,
            sample_index,
            commands,
        },
        Ok(bt) => {
            let gains = bt.gains(&config.noise);
            let max_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let c_robust = if config.robust { robustness_cost(&gains) } else { 0.0 };
            let c_task = task_cost(&bt, task, config);
            let penalty = constraint_penalty(&initial, &commands, scene);
            CandidateResult {
                theta,
                duration,
                gains,
                max_gain,
                c_robust,
                c_task,
                penalty,
                fitness: c_robust + c_task + penalty,
                feasible: true,
                sample_index,
                commands,
            }
        }
    }
}

/// Latent sampling map for one horizon: the smoothness prior, multiplied by
/// the lifted contact prior when enabled.
pub fn horizon_latent_map(
    bc: &BoundaryConditions,
    b0: &ParticleBelief,
    scene: &Scene,
    config: &PlannerConfig,
) -> LatentMap {
    let n_dof = scene.config_dim();
    let r_q = DMatrix::identity(n_dof, n_dof) * config.r_q;
    let smooth = smoothness_prior(bc, &r_q, config.n_via, config.t_ref);
    let smooth_gp = GaussianPrior::new(smooth.mean.clone(), smooth.precision.clone());
    let product = if config.use_contact_prior {
        let (obj_mean, obj_cov) = gaussian_fit(b0);
        let contact = scene_contact_prior(scene, &obj_mean, &obj_cov);
        let lifted = lift_to_trajectory(&contact, config.n_via, scene.config_dim());
        product_of_gaussians(&smooth_gp, &lifted)
    } else {
        smooth_gp
    };
    LatentMap::new(&product)
}

/// Single-horizon planning: M generations of sample, decode, evaluate, and
/// CMA-ES adaptation. Returns the lowest-fitness feasible candidate seen
/// (earliest sample on ties). `horizon_index` isolates the RNG streams of
/// successive horizons under one seed.
///
/// Candidates within a generation are evaluated in parallel; evaluation is a
/// pure function of its inputs, so the result is independent of thread count.
pub fn bs_vp_sto(
    bc: &BoundaryConditions,
    b0: &ParticleBelief,
    scene: &Scene,
    task: &Task,
    config: &PlannerConfig,
    horizon_index: u64,
) -> Result<CandidateResult, PlannerError> {
    config.validate()?;
    assert_eq!(bc.q0.len(), scene.config_dim());
    let dim = config.n_via * scene.config_dim();

    let latent = horizon_latent_map(bc, b0, scene, config);
    let mut state = CmaState::new(dim);
    let mut best: Option<CandidateResult> = None;

    for generation in 0..config.n_iterations {
        let root = sample_root(&state.cov);
        let eps_list: Vec<DVector<f64>> = (0..config.n_candidates)
            .map(|idx| {
                let mut rng = stream(
                    config.seed,
                    Domain::Sampler,
                    horizon_index,
                    ((generation as u64) << 8) | idx as u64,
                );
                let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                &state.mean + &root * z * state.sigma
            })
            .collect();

        let results: Vec<CandidateResult> = eps_list
            .par_iter()
            .enumerate()
            .map(|(idx, eps)| {
                evaluate_candidate(
                    generation * config.n_candidates + idx,
                    eps,
                    &latent,
                    bc,
                    b0,
                    scene,
                    task,
                    config,
                )
            })
            .collect();

        for r in &results {
            if r.feasible
                && r.fitness.is_finite()
                && best.as_ref().map_or(true, |b| r.fitness < b.fitness)
            {
                best = Some(r.clone());
            }
        }

        if generation + 1 < config.n_iterations {
            let scored: Vec<(DVector<f64>, f64)> = eps_list
                .into_iter()
                .zip(results.iter().map(|r| r.fitness))
                .collect();
            state = cmaes_step(&state, &scored);
        }
    }

    best.ok_or(PlannerError::NoValidPlan)
}
