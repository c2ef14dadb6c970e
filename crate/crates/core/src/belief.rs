//! Particle beliefs over the object position and their propagation.
//!
//! The belief is a weighted particle set. Planning keeps weights equal and
//! propagates every particle through the nominal dynamics; the spread of the
//! set is summarized by the scalar trace variance, and the effect of contact
//! noise is added analytically (contact fraction times injected variance)
//! instead of being sampled. All reductions run in fixed particle order so
//! results are bit-identical regardless of how callers parallelize.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{
    contact_indicator, settle, DynamicsError, NoiseModel, ObjectState, RobotCommand, Scene,
    StepParams,
};

/// Covariance regularization added by [`gaussian_fit`] (m^2).
pub const EPS_REG: f64 = 1e-8;

/// Weighted particle set over object positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleBelief {
    pub particles: Vec<ObjectState>,
    pub weights: Vec<f64>,
}

impl ParticleBelief {
    /// Equal-weight belief. Panics on an empty particle set.
    pub fn equal_weights(particles: Vec<ObjectState>) -> Self {
        assert!(!particles.is_empty(), "belief needs at least one particle");
        let w = 1.0 / particles.len() as f64;
        let weights = vec![w; particles.len()];
        Self { particles, weights }
    }

    /// Single-particle belief at a known position.
    pub fn point(position: Vector2<f64>) -> Self {
        Self::equal_weights(vec![ObjectState { position }])
    }

    /// Draw an equal-weight belief from a Gaussian. The covariance must be
    /// symmetric positive semi-definite.
    pub fn sample_gaussian<R: Rng>(
        mean: &Vector2<f64>,
        cov: &Matrix2<f64>,
        n: usize,
        rng: &mut R,
    ) -> Self {
        let chol = (cov + Matrix2::identity() * 1e-15)
            .cholesky()
            .expect("belief covariance must be PSD");
        let l = chol.l();
        let particles = (0..n)
            .map(|_| {
                let z = Vector2::new(
                    StandardNormal.sample(rng),
                    StandardNormal.sample(rng),
                );
                ObjectState { position: mean + l * z }
            })
            .collect();
        Self::equal_weights(particles)
    }

    /// Draw an equal-weight belief uniformly from an axis-aligned box.
    pub fn sample_uniform_box<R: Rng>(
        min: &Vector2<f64>,
        max: &Vector2<f64>,
        n: usize,
        rng: &mut R,
    ) -> Self {
        let particles = (0..n)
            .map(|_| {
                let x = rng.gen_range(min.x..=max.x);
                let y = rng.gen_range(min.y..=max.y);
                ObjectState::new(x, y)
            })
            .collect();
        Self::equal_weights(particles)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Weighted mean object position.
pub fn empirical_mean(b: &ParticleBelief) -> Vector2<f64> {
    let mut m = Vector2::zeros();
    for (p, w) in b.particles.iter().zip(&b.weights) {
        m += p.position * *w;
    }
    m
}

/// Scalar trace variance: weighted mean squared distance to the mean.
pub fn empirical_variance(b: &ParticleBelief) -> f64 {
    let m = empirical_mean(b);
    let mut v = 0.0;
    for (p, w) in b.particles.iter().zip(&b.weights) {
        v += w * (p.position - m).norm_squared();
    }
    v
}

/// Fraction of belief mass in contact with the commanded pose. Clamped to
/// [0, 1]: summed float weights can overshoot one by an epsilon, which the
/// hard gain barrier downstream would misread as amplification.
pub fn contact_probability(b: &ParticleBelief, u: &RobotCommand, scene: &Scene) -> f64 {
    let mut frac = 0.0;
    for (p, w) in b.particles.iter().zip(&b.weights) {
        if contact_indicator(p, u, scene) {
            frac += w;
        }
    }
    frac.min(1.0)
}

/// Sampling-free variance prediction for one step: the empirical variance of
/// the nominally stepped particles plus the contact fraction times the
/// injected noise variance. No perturbations are sampled.
pub fn predict_variance(
    b: &ParticleBelief,
    u: &RobotCommand,
    scene: &Scene,
    noise: &NoiseModel,
) -> Result<f64, DynamicsError> {
    let params = StepParams::default();
    let stepped: Vec<ObjectState> = b
        .particles
        .iter()
        .map(|p| settle(p, u, scene, &params))
        .collect::<Result<_, _>>()?;
    let next = ParticleBelief { particles: stepped, weights: b.weights.clone() };
    Ok(empirical_variance(&next) + contact_probability(b, u, scene) * noise.variance_w)
}

/// Relative variance change over one step: predicted next variance over the
/// current variance plus the injected noise floor. A no-contact action yields
/// v_prev / (v_prev + variance_w) <= 1. A zero denominator returns +inf for
/// positive predicted variance and 0 otherwise.
pub fn variance_gain(v_prev: f64, v_pred: f64, noise: &NoiseModel) -> f64 {
    let denom = v_prev + noise.variance_w;
    if denom == 0.0 {
        return if v_pred > 0.0 { f64::INFINITY } else { 0.0 };
    }
    v_pred / denom
}

/// Belief trajectory from a nominal rollout: the belief after every step plus
/// the per-step summaries the planner consumes.
#[derive(Debug, Clone)]
pub struct BeliefTrajectory {
    /// Beliefs b_0..b_K (length K+1).
    pub beliefs: Vec<ParticleBelief>,
    /// Contact fraction of step k, evaluated on b_k against command k (length K).
    pub contact_fractions: Vec<f64>,
    /// Empirical variances of b_0..b_K (length K+1).
    pub variances: Vec<f64>,
}

impl BeliefTrajectory {
    pub fn steps(&self) -> usize {
        self.contact_fractions.len()
    }

    /// Per-step variance gains: predicted variance of the next belief over
    /// the noise-padded current one.
    pub fn gains(&self, noise: &NoiseModel) -> Vec<f64> {
        (0..self.steps())
            .map(|k| {
                let v_pred =
                    self.variances[k + 1] + self.contact_fractions[k] * noise.variance_w;
                variance_gain(self.variances[k], v_pred, noise)
            })
            .collect()
    }

    pub fn initial(&self) -> &ParticleBelief {
        &self.beliefs[0]
    }

    pub fn terminal(&self) -> &ParticleBelief {
        self.beliefs.last().expect("belief trajectory is never empty")
    }
}

/// Roll the belief through the nominal dynamics. `initial` gives the effector
/// poses at rollout start so the first command's motion is swept like every
/// later one. Deterministic; contact noise enters only through the recorded
/// contact fractions.
pub fn nominal_rollout(
    b0: &ParticleBelief,
    initial: &RobotCommand,
    controls: &[RobotCommand],
    scene: &Scene,
    params: &StepParams,
) -> Result<BeliefTrajectory, DynamicsError> {
    let mut beliefs = Vec::with_capacity(controls.len() + 1);
    let mut contact_fractions = Vec::with_capacity(controls.len());
    let mut variances = Vec::with_capacity(controls.len() + 1);
    beliefs.push(b0.clone());
    variances.push(empirical_variance(b0));
    let mut prev_cmd = initial;
    for u in controls {
        let current = beliefs.last().unwrap();
        contact_fractions.push(contact_probability(current, u, scene));
        let stepped: Vec<ObjectState> = current
            .particles
            .iter()
            .map(|p| crate::dynamics::nominal_step(p, prev_cmd, u, scene, params))
            .collect::<Result<_, _>>()?;
        let next = ParticleBelief { particles: stepped, weights: current.weights.clone() };
        variances.push(empirical_variance(&next));
        beliefs.push(next);
        prev_cmd = u;
    }
    Ok(BeliefTrajectory { beliefs, contact_fractions, variances })
}

/// Weighted Gaussian moment fit with +eps_reg I regularization.
pub fn gaussian_fit(b: &ParticleBelief) -> (Vector2<f64>, Matrix2<f64>) {
    let mean = empirical_mean(b);
    let mut cov = Matrix2::zeros();
    for (p, w) in b.particles.iter().zip(&b.weights) {
        let d = p.position - mean;
        cov += d * d.transpose() * *w;
    }
    (mean, cov + Matrix2::identity() * EPS_REG)
}

/// Result of a particle-filter measurement update.
#[derive(Debug, Clone)]
pub struct MeasurementUpdate {
    pub belief: ParticleBelief,
    /// True when every likelihood underflowed and the update fell back to a
    /// uniform reweight.
    pub degenerate: bool,
}

/// Reweight the belief by the Gaussian likelihood of `observation` and
/// systematically resample back to equal weights. Particle count is
/// preserved. If all likelihoods underflow (below 1e-300) the weights are
/// left uniform and the update is flagged degenerate.
pub fn measurement_update<R: Rng>(
    b: &ParticleBelief,
    observation: &Vector2<f64>,
    obs_noise_cov: &Matrix2<f64>,
    rng: &mut R,
) -> MeasurementUpdate {
    let inv = obs_noise_cov.try_inverse().expect("observation covariance must be invertible");
    let det = obs_noise_cov.determinant();
    assert!(det > 0.0, "observation covariance must be positive definite");
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());

    let mut weights: Vec<f64> = b
        .particles
        .iter()
        .zip(&b.weights)
        .map(|(p, w)| {
            let d = observation - p.position;
            w * norm * (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let degenerate = !(total > 1e-300);
    if degenerate {
        weights = b.weights.clone();
    } else {
        for w in &mut weights {
            *w /= total;
        }
    }

    let n = b.particles.len();
    let particles = systematic_resample(&b.particles, &weights, n, rng);
    MeasurementUpdate { belief: ParticleBelief::equal_weights(particles), degenerate }
}

/// Systematic resampling: one uniform offset, stratified comb over the
/// cumulative weights. Lower variance than multinomial resampling.
fn systematic_resample<R: Rng>(
    particles: &[ObjectState],
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> Vec<ObjectState> {
    let offset: f64 = rng.gen_range(0.0..1.0);
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0;
    for k in 0..n {
        let pointer = (k as f64 + offset) / n as f64;
        while pointer > cum && i + 1 < particles.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(particles[i]);
    }
    out
}
