//! Gaussian priors over trajectory parameters: the contact-seeking prior,
//! its lift from final configuration to via-point space, the product with
//! the smoothness prior, and the latent decode that turns standard-normal
//! search variables into via-points.
//!
//! Priors are kept in information form (mean plus precision) because the
//! contact prior is deliberately degenerate: it constrains only the final
//! via-point block, and only the position components of each effector.
//! The product with the smoothness prior is what becomes invertible.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use thiserror::Error;

use crate::dynamics::Scene;

/// Ridge applied when a precision sum is numerically singular.
pub const PRODUCT_RIDGE: f64 = 1e-10;
/// Shell scale: the contact shell radius is (r_o + r_eff) * SHELL_SCALE.
pub const SHELL_SCALE: f64 = 0.75;
/// IK iteration cap.
pub const IK_MAX_ITERS: usize = 100;
/// IK convergence tolerance on the task-space residual (m).
pub const IK_TOL: f64 = 1e-4;

/// Gaussian in information form. The precision may be rank-deficient before
/// a product; the product of a degenerate prior with an SPD one is SPD.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Self {
        assert_eq!(precision.nrows(), mean.len());
        assert_eq!(precision.ncols(), mean.len());
        Self { mean, precision }
    }

    /// Uninformative prior: zero precision everywhere.
    pub fn uninformative(dim: usize) -> Self {
        Self { mean: DVector::zeros(dim), precision: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriorError {
    #[error("inverse kinematics did not reach the target within {iterations} iterations \
             (residual {residual:.3e})")]
    IkFailure { residual: f64, iterations: usize },
}

/// Affine contact map for one effector: the effector position that realizes
/// contact with an object at q is offset + gain * q, with `gain` also serving
/// as the Jacobian. `conditional_cov` is the contact-shell covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactModel {
    pub gain: Matrix2<f64>,
    pub offset: Vector2<f64>,
    pub conditional_cov: Matrix2<f64>,
}

impl ContactModel {
    /// Default shell model: identity map, isotropic covariance of standard
    /// deviation (r_o + r_eff) * 0.75 approximating the touch shell.
    pub fn shell(obj_radius: f64, eff_radius: f64) -> Self {
        let sd = (obj_radius + eff_radius) * SHELL_SCALE;
        Self {
            gain: Matrix2::identity(),
            offset: Vector2::zeros(),
            conditional_cov: Matrix2::identity() * sd * sd,
        }
    }

    pub fn mean_map(&self, q: &Vector2<f64>) -> Vector2<f64> {
        self.offset + self.gain * q
    }
}

/// Contact prior over one effector's final position: mean at the mapped
/// object mean, covariance the shell covariance inflated by the mapped
/// object covariance.
pub fn contact_prior_task(
    obj_mean: &Vector2<f64>,
    obj_cov: &Matrix2<f64>,
    cm: &ContactModel,
) -> GaussianPrior {
    let cov = cm.conditional_cov + cm.gain * obj_cov * cm.gain.transpose();
    let precision = cov.try_inverse().expect("contact covariance is SPD");
    GaussianPrior::new(
        DVector::from_column_slice(cm.mean_map(obj_mean).as_slice()),
        DMatrix::from_row_slice(2, 2, &[
            precision[(0, 0)], precision[(0, 1)],
            precision[(1, 0)], precision[(1, 1)],
        ]),
    )
}

/// Differentiable kinematics from a joint vector to an effector configuration.
pub trait KinematicModel {
    fn dof(&self) -> usize;
    fn task_dim(&self) -> usize;
    fn forward(&self, q: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64>;
}

/// Trivial kinematics: joints are the effector configuration.
#[derive(Debug, Clone)]
pub struct IdentityKinematics {
    pub dim: usize,
}

impl KinematicModel for IdentityKinematics {
    fn dof(&self) -> usize {
        self.dim
    }
    fn task_dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, q: &DVector<f64>) -> DVector<f64> {
        q.clone()
    }
    fn jacobian(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
}

/// Planar two-link chain used to exercise the joint-space prior.
#[derive(Debug, Clone)]
pub struct PlanarTwoLink {
    pub l1: f64,
    pub l2: f64,
}

impl KinematicModel for PlanarTwoLink {
    fn dof(&self) -> usize {
        2
    }
    fn task_dim(&self) -> usize {
        2
    }
    fn forward(&self, q: &DVector<f64>) -> DVector<f64> {
        let (a, b) = (q[0], q[0] + q[1]);
        DVector::from_row_slice(&[
            self.l1 * a.cos() + self.l2 * b.cos(),
            self.l1 * a.sin() + self.l2 * b.sin(),
        ])
    }
    fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = (q[0], q[0] + q[1]);
        DMatrix::from_row_slice(2, 2, &[
            -self.l1 * a.sin() - self.l2 * b.sin(), -self.l2 * b.sin(),
            self.l1 * a.cos() + self.l2 * b.cos(), self.l2 * b.cos(),
        ])
    }
}

/// Damped least-squares inverse kinematics.
pub fn solve_ik(
    km: &dyn KinematicModel,
    target: &DVector<f64>,
    seed: &DVector<f64>,
) -> Result<DVector<f64>, PriorError> {
    let mut q = seed.clone();
    let damping = 1e-6;
    let mut residual = f64::INFINITY;
    for _ in 0..IK_MAX_ITERS {
        let err = target - km.forward(&q);
        residual = err.norm();
        if residual <= IK_TOL {
            return Ok(q);
        }
        let j = km.jacobian(&q);
        let jjt = &j * j.transpose()
            + DMatrix::identity(km.task_dim(), km.task_dim()) * damping;
        let step = j.transpose()
            * jjt
                .cholesky()
                .expect("damped JJ' is SPD")
                .solve(&err);
        q += step;
    }
    Err(PriorError::IkFailure { residual, iterations: IK_MAX_ITERS })
}

/// Joint-space contact prior: IK places the mean on the task-prior mean, and
/// the precision is the task precision pulled back through the Jacobian
/// (rank at most the task dimension, degenerate by design).
pub fn contact_prior_joint(
    km: &dyn KinematicModel,
    task_prior: &GaussianPrior,
    seed_joints: &DVector<f64>,
) -> Result<GaussianPrior, PriorError> {
    let q_mean = solve_ik(km, &task_prior.mean, seed_joints)?;
    let j = km.jacobian(&q_mean);
    let precision = j.transpose() * &task_prior.precision * j;
    Ok(GaussianPrior::new(q_mean, precision))
}

/// Lift a final-configuration prior to via-point space: only the trailing
/// via-point block carries information.
pub fn lift_to_trajectory(final_prior: &GaussianPrior, n_via: usize, n_dof: usize) -> GaussianPrior {
    assert_eq!(final_prior.dim(), n_dof);
    let dim = n_via * n_dof;
    let mut mean = DVector::zeros(dim);
    let mut precision = DMatrix::zeros(dim, dim);
    let off = (n_via - 1) * n_dof;
    mean.rows_mut(off, n_dof).copy_from(&final_prior.mean);
    precision
        .view_mut((off, off), (n_dof, n_dof))
        .copy_from(&final_prior.precision);
    GaussianPrior::new(mean, precision)
}

/// Normalized product of two Gaussians in information form: precisions add,
/// and the mean is the precision-weighted combination. A numerically singular
/// sum is ridged and logged; the returned precision is then SPD.
pub fn product_of_gaussians(a: &GaussianPrior, b: &GaussianPrior) -> GaussianPrior {
    assert_eq!(a.dim(), b.dim());
    let mut q = &a.precision + &b.precision;
    let rhs = &a.precision * &a.mean + &b.precision * &b.mean;
    let mean = match q.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            log::warn!("singular precision sum in Gaussian product; ridging by {PRODUCT_RIDGE}");
            q += DMatrix::identity(q.nrows(), q.ncols()) * PRODUCT_RIDGE;
            q.clone()
                .cholesky()
                .expect("ridged precision must be SPD")
                .solve(&rhs)
        }
    };
    GaussianPrior::new(mean, q)
}

/// Cached affine decode theta = mean + L epsilon with L the lower Cholesky
/// factor of the covariance.
#[derive(Debug, Clone)]
pub struct LatentMap {
    pub mean: DVector<f64>,
    pub l: DMatrix<f64>,
}

impl LatentMap {
    /// Panics if the prior precision is not SPD; callers hold a product
    /// prior, which is SPD by construction (post-ridge).
    pub fn new(prior: &GaussianPrior) -> Self {
        let cov = prior
            .precision
            .clone()
            .cholesky()
            .expect("latent map needs an SPD precision")
            .inverse();
        let l = cov.cholesky().expect("covariance is SPD").l();
        Self { mean: prior.mean.clone(), l }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn decode(&self, eps: &DVector<f64>) -> DVector<f64> {
        &self.mean + &self.l * eps
    }
}

/// One-shot latent decode; builds the map and applies it.
pub fn latent_decode(eps: &DVector<f64>, product: &GaussianPrior) -> DVector<f64> {
    LatentMap::new(product).decode(eps)
}

/// Contact prior over a scene's full effector configuration: each effector is
/// independently targeted at the object mean through the default shell model;
/// yaw components are uninformative (zero precision row and column).
pub fn scene_contact_prior(
    scene: &Scene,
    obj_mean: &Vector2<f64>,
    obj_cov: &Matrix2<f64>,
) -> GaussianPrior {
    let dim = scene.config_dim();
    let mut mean = DVector::zeros(dim);
    let mut precision = DMatrix::zeros(dim, dim);
    let mut off = 0;
    for shape in &scene.effectors {
        let cm = ContactModel::shell(scene.object.radius, shape.bounding_radius());
        let prior = contact_prior_task(obj_mean, obj_cov, &cm);
        mean.rows_mut(off, 2).copy_from(&prior.mean);
        precision.view_mut((off, off), (2, 2)).copy_from(&prior.precision);
        off += shape.dof();
    }
    GaussianPrior::new(mean, precision)
}
