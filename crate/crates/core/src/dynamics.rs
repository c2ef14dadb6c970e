//! Quasi-static object dynamics.
//!
//! The robot is position-controlled and infinitely stiff: a command places
//! the effectors exactly. The object reacts by the minimal displacement that
//! restores non-penetration (for a circular object the metric is isotropic,
//! so this is the Euclidean projection out of each effector), and it stays
//! put when nothing touches it. Touch also injects noise: a contact step
//! perturbs the object along the contact tangent, a no-contact step is
//! noise-free. Commanded motion is subdivided into substeps with projection
//! after each, which keeps penetration shallow and makes two-effector
//! resolution a cyclic projection; effectors squeezing the object from both
//! sides have no feasible displacement and surface as [`DynamicsError`].

use nalgebra::{DVector, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use thiserror::Error;

use crate::geometry::{
    contact_frame, normalize_angle, signed_distance, CircleGeom, ContactInfo, EffectorPose,
    EffectorShape,
};

/// Penetration tolerance for converged projections (m).
pub const EPS_PEN: f64 = 1e-6;
/// Default substep count per commanded step.
pub const DEFAULT_SUBSTEPS: usize = 4;
/// Default cyclic-projection iteration cap.
pub const MAX_PROJ_ITERS: usize = 50;

/// Planar configuration of the pushed object. The object is a circle, so
/// orientation is irrelevant and the state is its center position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectState {
    pub position: Vector2<f64>,
}

impl ObjectState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { position: Vector2::new(x, y) }
    }
}

/// Commanded poses for every effector at one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotCommand {
    pub effectors: Vec<EffectorPose>,
}

impl RobotCommand {
    pub fn new(effectors: Vec<EffectorPose>) -> Self {
        Self { effectors }
    }

    pub fn single(x: f64, y: f64) -> Self {
        Self { effectors: vec![EffectorPose::at(x, y)] }
    }
}

/// Perturbation family applied on contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseFamily {
    /// Zero-mean Gaussian along the contact tangent.
    GaussianTangential,
    /// Zero-mean uniform along the contact tangent.
    UniformTangential,
    /// One-sided uniform along the contact normal, support [0, sqrt(12 V_w)].
    /// Models forward scatter of a full sweep in the 1-DoF push world; not
    /// zero-mean by design.
    UniformForward,
}

/// Contact noise: trace-variance `variance_w` (m^2) injected per contact event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub variance_w: f64,
    pub family: NoiseFamily,
}

impl NoiseModel {
    pub fn gaussian(variance_w: f64) -> Self {
        assert!(variance_w >= 0.0);
        Self { variance_w, family: NoiseFamily::GaussianTangential }
    }

    pub fn uniform_tangential(variance_w: f64) -> Self {
        assert!(variance_w >= 0.0);
        Self { variance_w, family: NoiseFamily::UniformTangential }
    }

    /// Forward-scatter family from its support width `alpha`; the stored
    /// trace-variance is the variance of U[0, alpha] about its mean.
    pub fn uniform_forward(alpha: f64) -> Self {
        assert!(alpha >= 0.0);
        Self { variance_w: alpha * alpha / 12.0, family: NoiseFamily::UniformForward }
    }

    pub fn alpha(&self) -> f64 {
        (12.0 * self.variance_w).sqrt()
    }
}

/// Axis-aligned workspace bounds for effector centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl Aabb {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Static scene description: effector shapes, object geometry, and optional
/// workspace bounds used by planner penalties.
#[derive(Debug, Clone)]
pub struct Scene {
    pub effectors: Vec<EffectorShape>,
    pub object: CircleGeom,
    pub workspace: Option<Aabb>,
}

impl Scene {
    pub fn new(effectors: Vec<EffectorShape>, object_radius: f64) -> Self {
        Self { effectors, object: CircleGeom::new(object_radius), workspace: None }
    }

    /// Total commanded degrees of freedom across effectors.
    pub fn config_dim(&self) -> usize {
        self.effectors.iter().map(|e| e.dof()).sum()
    }

    /// Unpack a flat configuration vector into per-effector poses. Layout is
    /// effector-major: (x, y[, yaw]) per effector in scene order.
    pub fn command_from_config(&self, q: &DVector<f64>) -> RobotCommand {
        assert_eq!(q.len(), self.config_dim(), "configuration length mismatch");
        let mut poses = Vec::with_capacity(self.effectors.len());
        let mut i = 0;
        for shape in &self.effectors {
            let pos = Vector2::new(q[i], q[i + 1]);
            let yaw = if shape.dof() == 3 { q[i + 2] } else { 0.0 };
            poses.push(EffectorPose::new(pos, yaw));
            i += shape.dof();
        }
        RobotCommand::new(poses)
    }

    /// Inverse of [`Scene::command_from_config`].
    pub fn config_from_command(&self, u: &RobotCommand) -> DVector<f64> {
        assert_eq!(u.effectors.len(), self.effectors.len());
        let mut q = DVector::zeros(self.config_dim());
        let mut i = 0;
        for (shape, pose) in self.effectors.iter().zip(&u.effectors) {
            q[i] = pose.position.x;
            q[i + 1] = pose.position.y;
            if shape.dof() == 3 {
                q[i + 2] = pose.yaw;
            }
            i += shape.dof();
        }
        q
    }

    fn infos(&self, u: &RobotCommand, center: &Vector2<f64>) -> Vec<ContactInfo> {
        self.effectors
            .iter()
            .zip(&u.effectors)
            .map(|(shape, pose)| signed_distance(shape, pose, center, self.object.radius))
            .collect()
    }
}

/// Substep and projection controls.
#[derive(Debug, Clone, Copy)]
pub struct StepParams {
    pub n_sub: usize,
    pub max_proj_iters: usize,
}

impl Default for StepParams {
    fn default() -> Self {
        Self { n_sub: DEFAULT_SUBSTEPS, max_proj_iters: MAX_PROJ_ITERS }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    /// Cyclic projection failed to converge: the effectors enclose the object
    /// with no feasible displacement, which the quasi-static model excludes.
    #[error(
        "effectors squeeze the object: projection stuck at penetration {penetration:.3e} m \
         after {iterations} iterations"
    )]
    InfeasibleContact { penetration: f64, iterations: usize },
}

/// Smallest effector distance at command `u` for object state `q_o`.
pub fn min_distance(q_o: &ObjectState, u: &RobotCommand, scene: &Scene) -> f64 {
    scene
        .infos(u, &q_o.position)
        .iter()
        .map(|i| i.signed_distance)
        .fold(f64::INFINITY, f64::min)
}

/// Contact indicator: true iff some effector at `u` is at distance <= 0 from
/// the object at `q_o`. Exact touch counts as contact.
pub fn contact_indicator(q_o: &ObjectState, u: &RobotCommand, scene: &Scene) -> bool {
    min_distance(q_o, u, scene) <= 0.0
}

/// Project the object center out of every effector by cyclic projection.
fn project_out(
    mut center: Vector2<f64>,
    u: &RobotCommand,
    scene: &Scene,
    params: &StepParams,
) -> Result<Vector2<f64>, DynamicsError> {
    let mut worst = 0.0;
    for _ in 0..params.max_proj_iters {
        worst = f64::INFINITY;
        for (shape, pose) in scene.effectors.iter().zip(&u.effectors) {
            let info = signed_distance(shape, pose, &center, scene.object.radius);
            if info.signed_distance < 0.0 {
                center = info.resolved_center(scene.object.radius);
            }
            worst = worst.min(info.signed_distance);
        }
        // `worst` holds pre-projection distances, so a clean pass through
        // the loop is required once after the last projection.
        if worst >= -EPS_PEN {
            return Ok(center);
        }
    }
    // Re-measure after the final sweep; the loop's worst is pre-projection.
    let final_worst = scene
        .infos(u, &center)
        .iter()
        .map(|i| i.signed_distance)
        .fold(f64::INFINITY, f64::min);
    if final_worst >= -EPS_PEN {
        return Ok(center);
    }
    Err(DynamicsError::InfeasibleContact {
        penetration: -final_worst.min(worst),
        iterations: params.max_proj_iters,
    })
}

/// Effector poses linearly interpolated between two commands; yaw follows the
/// shortest arc.
pub fn interpolate_command(from: &RobotCommand, to: &RobotCommand, t: f64) -> RobotCommand {
    let effectors = from
        .effectors
        .iter()
        .zip(&to.effectors)
        .map(|(a, b)| {
            let pos = a.position + (b.position - a.position) * t;
            let yaw = a.yaw + normalize_angle(b.yaw - a.yaw) * t;
            EffectorPose::new(pos, yaw)
        })
        .collect();
    RobotCommand::new(effectors)
}

/// Nominal quasi-static step: move the effectors from `from` to `to` in
/// substeps, projecting the object out of penetration after each. With no
/// penetration anywhere along the way the object is returned bit-exact.
pub fn nominal_step(
    q_o: &ObjectState,
    from: &RobotCommand,
    to: &RobotCommand,
    scene: &Scene,
    params: &StepParams,
) -> Result<ObjectState, DynamicsError> {
    assert_eq!(to.effectors.len(), scene.effectors.len(), "command/scene effector mismatch");
    let mut center = q_o.position;
    let n = params.n_sub.max(1);
    let stationary = from == to;
    for s in 1..=n {
        let u = if stationary {
            to.clone()
        } else {
            interpolate_command(from, to, s as f64 / n as f64)
        };
        center = project_out(center, &u, scene, params)?;
        if stationary {
            break;
        }
    }
    Ok(ObjectState { position: center })
}

/// Nominal step with the effectors already at `u` (no swept motion).
pub fn settle(
    q_o: &ObjectState,
    u: &RobotCommand,
    scene: &Scene,
    params: &StepParams,
) -> Result<ObjectState, DynamicsError> {
    nominal_step(q_o, u, u, scene, params)
}

/// Contact frame for noise injection: averaged over the effectors touching
/// the object at `center`, falling back to the nearest effector when the
/// step left none in touch or the average degenerates.
fn noise_frame(center: &Vector2<f64>, u: &RobotCommand, scene: &Scene) -> (Vector2<f64>, Vector2<f64>) {
    let infos = scene.infos(u, center);
    let touch_tol = 10.0 * EPS_PEN;
    let mut sum = Vector2::zeros();
    let mut touching = 0;
    for info in &infos {
        if info.signed_distance <= touch_tol {
            sum += info.normal;
            touching += 1;
        }
    }
    let normal = if touching > 0 && sum.norm() > 1e-9 {
        sum / sum.norm()
    } else if touching > 0 {
        // Opposed normals cancel; keep the first touching effector's frame.
        infos
            .iter()
            .find(|i| i.signed_distance <= touch_tol)
            .map(|i| i.normal)
            .unwrap()
    } else {
        let nearest = infos
            .iter()
            .min_by(|a, b| a.signed_distance.total_cmp(&b.signed_distance))
            .expect("scene has at least one effector");
        nearest.normal
    };
    let info = ContactInfo { signed_distance: 0.0, normal, witness_point: *center };
    contact_frame(&info)
}

/// Noisy quasi-static step. The contact indicator is evaluated on the
/// pre-step object state against the commanded pose, matching the variance
/// prediction; no contact means no noise. The perturbation is a straight
/// translation in the contact frame and is re-projected only if it created
/// penetration; if even that projection is infeasible the perturbation is
/// dropped for this step.
pub fn stochastic_step<R: Rng>(
    q_o: &ObjectState,
    from: &RobotCommand,
    to: &RobotCommand,
    scene: &Scene,
    noise: &NoiseModel,
    params: &StepParams,
    rng: &mut R,
) -> Result<ObjectState, DynamicsError> {
    let nominal = nominal_step(q_o, from, to, scene, params)?;
    if noise.variance_w == 0.0 || !contact_indicator(q_o, to, scene) {
        return Ok(nominal);
    }
    let (normal, tangent) = noise_frame(&nominal.position, to, scene);
    let delta = match noise.family {
        NoiseFamily::GaussianTangential => {
            let w = Normal::new(0.0, noise.variance_w.sqrt()).unwrap().sample(rng);
            tangent * w
        }
        NoiseFamily::UniformTangential => {
            let h = (3.0 * noise.variance_w).sqrt();
            tangent * Uniform::new_inclusive(-h, h).sample(rng)
        }
        NoiseFamily::UniformForward => normal * Uniform::new(0.0, noise.alpha()).sample(rng),
    };
    let perturbed = nominal.position + delta;
    let needs_projection = scene
        .infos(to, &perturbed)
        .iter()
        .any(|i| i.signed_distance < -EPS_PEN);
    if !needs_projection {
        return Ok(ObjectState { position: perturbed });
    }
    match project_out(perturbed, to, scene, params) {
        Ok(center) => Ok(ObjectState { position: center }),
        Err(_) => Ok(nominal),
    }
}

/// Noisy step with the effectors already at `u`.
pub fn stochastic_settle<R: Rng>(
    q_o: &ObjectState,
    u: &RobotCommand,
    scene: &Scene,
    noise: &NoiseModel,
    params: &StepParams,
    rng: &mut R,
) -> Result<ObjectState, DynamicsError> {
    stochastic_step(q_o, u, u, scene, noise, params, rng)
}
