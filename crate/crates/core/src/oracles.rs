//! Independent validators for the belief dynamics: a Monte-Carlo variance
//! estimator with jackknife error bars, the closed-form one-dimensional push
//! distribution, the expected-cost separation identity, and the line-world
//! embedding that runs one-dimensional pushes through the production
//! planar dynamics.

use nalgebra::Vector2;
use rand::Rng;
use thiserror::Error;

use crate::belief::ParticleBelief;
use crate::dynamics::{
    stochastic_settle, NoiseModel, ObjectState, RobotCommand, Scene, StepParams,
};
use crate::geometry::EffectorShape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("push command {u} lies outside the object support [{q_low}, {q_high}]")]
    CommandOutsideSupport { u: f64, q_low: f64, q_high: f64 },
}

/// Finite mixture of one-dimensional uniform distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOfUniforms1D {
    /// (weight, lower, upper) per component; weights sum to one, zero-weight
    /// components are dropped at construction.
    pub components: Vec<(f64, f64, f64)>,
}

impl MixtureOfUniforms1D {
    pub fn new(components: Vec<(f64, f64, f64)>) -> Self {
        let kept: Vec<(f64, f64, f64)> =
            components.into_iter().filter(|(w, _, _)| *w > 0.0).collect();
        assert!(!kept.is_empty(), "mixture needs at least one positive weight");
        let total: f64 = kept.iter().map(|(w, _, _)| w).sum();
        assert!((total - 1.0).abs() <= 1e-9, "weights must sum to one, got {total}");
        for (_, lo, hi) in &kept {
            assert!(lo <= hi, "component bounds out of order: [{lo}, {hi}]");
        }
        Self { components: kept }
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|(w, lo, hi)| w * 0.5 * (lo + hi)).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .components
            .iter()
            .map(|(w, lo, hi)| w * (lo * lo + lo * hi + hi * hi) / 3.0)
            .sum();
        second - mean * mean
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, lo, hi)| {
                let f = if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else if x >= *lo {
                    1.0
                } else {
                    0.0
                };
                w * f
            })
            .sum()
    }
}

/// Belief after sweeping a hand rightward to `u` over an object uniformly
/// distributed on [q_low, q_high], with forward perturbation U[0, alpha]:
/// the swept mass piles up at the hand front and is smeared forward, the
/// rest is untouched.
pub fn closed_form_1d_push(
    q_low: f64,
    q_high: f64,
    u: f64,
    alpha: f64,
) -> Result<MixtureOfUniforms1D, OracleError> {
    assert!(q_low <= q_high);
    assert!(alpha > 0.0, "perturbation width must be positive");
    if u < q_low || u > q_high {
        return Err(OracleError::CommandOutsideSupport { u, q_low, q_high });
    }
    let span = q_high - q_low;
    let w_push = if span > 0.0 { (u - q_low) / span } else { 1.0 };
    Ok(MixtureOfUniforms1D::new(vec![
        (w_push, u, u + alpha),
        (1.0 - w_push, u, q_high),
    ]))
}

/// Monte-Carlo estimate of the settled belief's trace variance, with an
/// exact leave-one-out jackknife standard error. Particles are enumerated
/// cyclically (exact coverage when `n_samples` is a multiple of the particle
/// count and the weights are uniform); non-uniform weights fall back to
/// weighted draws from `rng`.
pub fn mc_variance_oracle<R: Rng>(
    b: &ParticleBelief,
    u: &RobotCommand,
    scene: &Scene,
    noise: &NoiseModel,
    n_samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    assert!(n_samples >= 1000, "oracle needs at least 1000 samples");
    let n_p = b.particles.len();
    let uniform = b.weights.iter().all(|w| (w - 1.0 / n_p as f64).abs() <= 1e-12);
    let params = StepParams::default();

    let mut samples: Vec<Vector2<f64>> = Vec::with_capacity(n_samples);
    for s in 0..n_samples {
        let particle = if uniform {
            &b.particles[s % n_p]
        } else {
            let mut t = rng.gen_range(0.0..1.0);
            let mut idx = 0;
            for (i, w) in b.weights.iter().enumerate() {
                idx = i;
                if t < *w {
                    break;
                }
                t -= w;
            }
            &b.particles[idx]
        };
        let settled = stochastic_settle(particle, u, scene, noise, &params, rng)
            .map_or(particle.position, |s| s.position);
        samples.push(settled);
    }

    let n = n_samples as f64;
    let s1: Vector2<f64> = samples.iter().sum();
    let s2: f64 = samples.iter().map(|x| x.norm_squared()).sum();
    let estimate = s2 / n - (s1 / n).norm_squared();

    // Exact O(n) jackknife: each leave-one-out estimate reuses the sums.
    let m = n - 1.0;
    let loo: Vec<f64> = samples
        .iter()
        .map(|x| (s2 - x.norm_squared()) / m - ((s1 - x) / m).norm_squared())
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n;
    let se = (m / n * loo.iter().map(|t| (t - loo_mean) * (t - loo_mean)).sum::<f64>()).sqrt();

    (estimate, se)
}

/// Both sides of the expected-cost separation identity: the mean squared
/// distance to a point equals the squared distance of the mean plus the
/// trace variance.
pub fn cost_separation_check(samples: &[Vector2<f64>], x_des: &Vector2<f64>) -> (f64, f64) {
    assert!(!samples.is_empty());
    let n = samples.len() as f64;
    let lhs = samples.iter().map(|x| (x - x_des).norm_squared()).sum::<f64>() / n;
    let mean: Vector2<f64> = samples.iter().sum::<Vector2<f64>>() / n;
    let var = samples.iter().map(|x| (x - mean).norm_squared()).sum::<f64>() / n;
    let rhs = (mean - x_des).norm_squared() + var;
    (lhs, rhs)
}

/// Kolmogorov-Smirnov statistic of a sample against a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((((i + 1) as f64) / n - f).abs()).max((f - i as f64 / n).abs());
    }
    d
}

/// One-dimensional push world embedded in the planar dynamics: the hand is a
/// huge circle whose right edge acts as a flat wall on the x-axis, so the
/// production code path reproduces the half-line push exactly. The normal at
/// any on-axis object is exactly +x, making forward perturbations purely
/// one-dimensional.
#[derive(Debug, Clone)]
pub struct LineWorld {
    pub scene: Scene,
    hand_radius: f64,
}

impl Default for LineWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl LineWorld {
    pub fn new() -> Self {
        let hand_radius = 1000.0;
        let scene = Scene::new(vec![EffectorShape::circle(hand_radius)], 0.05);
        Self { scene, hand_radius }
    }

    /// Command whose hand front (accounting for the object radius) sits at
    /// coordinate `u`: an object center at q touches iff q <= u.
    pub fn command(&self, u: f64) -> RobotCommand {
        RobotCommand::single(u - self.hand_radius - self.scene.object.radius, 0.0)
    }

    pub fn object(&self, q: f64) -> ObjectState {
        ObjectState::new(q, 0.0)
    }

    pub fn coord(&self, s: &ObjectState) -> f64 {
        s.position.x
    }

    /// Uniform-on-a-segment belief, equally spaced midpoints so the sample
    /// mean and variance match the continuous uniform at O(1/n^2).
    pub fn uniform_belief(&self, q_low: f64, q_high: f64, n: usize) -> ParticleBelief {
        let particles = (0..n)
            .map(|i| self.object(q_low + (q_high - q_low) * (i as f64 + 0.5) / n as f64))
            .collect();
        ParticleBelief::equal_weights(particles)
    }
}
