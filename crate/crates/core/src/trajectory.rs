//! Via-point trajectories: minimum-acceleration interpolation, time scaling,
//! discretization into commands, and the Gaussian smoothness prior.
//!
//! A trajectory is pinned by N via-points at uniform knot times plus the
//! initial position and velocity; terminal velocity is zero and the last
//! via-point is the terminal configuration. The minimizer of the integrated
//! squared acceleration under those constraints is the clamped cubic spline
//! through the knots, so evaluation reduces to a cubic Hermite patchwork
//! whose knot slopes solve a tridiagonal system. Everything is affine in
//! (theta, q0, qdot0); the basis is built once per via-point count on
//! normalized time and cached, and durations enter through exact scaling
//! rules (velocities as 1/T, accelerations as 1/T^2, the acceleration Gram
//! matrix as 1/T^3).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{RobotCommand, Scene};

/// Floor duration returned by [`time_scale`] (s).
pub const T_MIN: f64 = 0.1;
/// Ridge added when the smoothness precision is numerically singular.
pub const PRIOR_RIDGE: f64 = 1e-10;
/// Number of grid points used for limit checking in [`time_scale`].
const SCALE_GRID: usize = 100;
/// Relative bisection tolerance of [`time_scale`].
const SCALE_TOL: f64 = 0.01;

/// Flattened via-points. Layout is via-major: block i holds via-point i
/// across all DoF, and the last block is the terminal configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryParams {
    pub theta: DVector<f64>,
    pub n_via: usize,
    pub n_dof: usize,
}

impl TrajectoryParams {
    pub fn new(theta: DVector<f64>, n_via: usize, n_dof: usize) -> Self {
        assert!(n_via >= 1 && n_dof >= 1);
        assert_eq!(theta.len(), n_via * n_dof, "theta length must be n_via * n_dof");
        Self { theta, n_via, n_dof }
    }

    fn via(&self, i: usize, dof: usize) -> f64 {
        self.theta[i * self.n_dof + dof]
    }

    /// Terminal configuration (the last via-point block).
    pub fn terminal(&self) -> DVector<f64> {
        self.theta.rows((self.n_via - 1) * self.n_dof, self.n_dof).into_owned()
    }
}

/// Initial robot position and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub q0: DVector<f64>,
    pub qdot0: DVector<f64>,
}

impl BoundaryConditions {
    pub fn new(q0: DVector<f64>, qdot0: DVector<f64>) -> Self {
        assert_eq!(q0.len(), qdot0.len());
        Self { q0, qdot0 }
    }

    pub fn at_rest(q0: DVector<f64>) -> Self {
        let qdot0 = DVector::zeros(q0.len());
        Self { q0, qdot0 }
    }
}

/// Per-DoF velocity and acceleration bounds. Infinite entries disable a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionLimits {
    pub v_max: DVector<f64>,
    pub a_max: DVector<f64>,
}

impl MotionLimits {
    pub fn new(v_max: DVector<f64>, a_max: DVector<f64>) -> Self {
        assert_eq!(v_max.len(), a_max.len());
        assert!(v_max.iter().chain(a_max.iter()).all(|&x| x > 0.0), "limits must be positive");
        Self { v_max, a_max }
    }

    pub fn uniform(v: f64, a: f64, n_dof: usize) -> Self {
        Self::new(DVector::from_element(n_dof, v), DVector::from_element(n_dof, a))
    }
}

/// One basis channel: knot values and knot slopes (in normalized time) of the
/// spline response to a unit input.
#[derive(Debug, Clone)]
struct Channel {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

/// Scalar spline basis for `n` via-points on [0, 1], with channels for each
/// via-point, the initial position, and the initial slope. Immutable after
/// construction and shared through a global cache.
#[derive(Debug)]
pub struct ViaBasis {
    n: usize,
    channels: Vec<Channel>,
    /// Gram matrix of channel second derivatives on [0, 1].
    gram: DMatrix<f64>,
}

impl ViaBasis {
    fn n_channels(n: usize) -> usize {
        n + 2
    }

    fn build(n: usize) -> Self {
        assert!(n >= 1);
        let m = Self::n_channels(n);
        let mut channels = Vec::with_capacity(m);
        for ch in 0..m {
            let mut values = vec![0.0; n + 1];
            let mut v0 = 0.0;
            if ch < n {
                values[ch + 1] = 1.0; // via-point channel
            } else if ch == n {
                values[0] = 1.0; // initial-position channel
            } else {
                v0 = 1.0; // initial-slope channel
            }
            let slopes = solve_knot_slopes(&values, v0, 0.0);
            channels.push(Channel { values, slopes });
        }
        let gram = gram_of(&channels, n);
        ViaBasis { n, channels, gram }
    }

    /// Hermite evaluation of every channel at normalized time `s`; returns
    /// (value, d/ds, d2/ds2) per channel.
    fn eval(&self, s: f64) -> Vec<(f64, f64, f64)> {
        let n = self.n;
        let h = 1.0 / n as f64;
        let idx = ((s * n as f64).floor() as usize).min(n - 1);
        let tau = s * n as f64 - idx as f64;
        let (t2, t3) = (tau * tau, tau * tau * tau);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + tau;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let d00 = 6.0 * t2 - 6.0 * tau;
        let d10 = 3.0 * t2 - 4.0 * tau + 1.0;
        let d01 = -6.0 * t2 + 6.0 * tau;
        let d11 = 3.0 * t2 - 2.0 * tau;
        let a00 = 12.0 * tau - 6.0;
        let a10 = 6.0 * tau - 4.0;
        let a01 = -12.0 * tau + 6.0;
        let a11 = 6.0 * tau - 2.0;
        self.channels
            .iter()
            .map(|c| {
                let (y0, y1) = (c.values[idx], c.values[idx + 1]);
                let (v0, v1) = (c.slopes[idx] * h, c.slopes[idx + 1] * h);
                let q = h00 * y0 + h10 * v0 + h01 * y1 + h11 * v1;
                let qd = (d00 * y0 + d10 * v0 + d01 * y1 + d11 * v1) / h;
                let qdd = (a00 * y0 + a10 * v0 + a01 * y1 + a11 * v1) / (h * h);
                (q, qd, qdd)
            })
            .collect()
    }
}

/// Interior knot slopes of the natural minimum-curvature interpolant with
/// clamped end slopes: the tridiagonal C2 system for a uniform cubic spline.
fn solve_knot_slopes(values: &[f64], v_first: f64, v_last: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let h = 1.0 / n as f64;
    let mut slopes = vec![0.0; n + 1];
    slopes[0] = v_first;
    slopes[n] = v_last;
    let m = n.saturating_sub(1);
    if m == 0 {
        return slopes;
    }
    let mut diag = vec![4.0; m];
    let mut rhs = vec![0.0; m];
    for i in 1..=m {
        rhs[i - 1] = 3.0 * (values[i + 1] - values[i - 1]) / h;
    }
    rhs[0] -= v_first;
    rhs[m - 1] -= v_last;
    // Thomas algorithm, off-diagonals all 1.
    for i in 1..m {
        let w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    slopes[m] = rhs[m - 1] / diag[m - 1];
    for i in (1..m).rev() {
        slopes[i] = (rhs[i - 1] - slopes[i + 1]) / diag[i - 1];
    }
    slopes
}

/// Exact Gram matrix of channel second derivatives: second derivatives are
/// piecewise linear, so per-interval products integrate in closed form.
fn gram_of(channels: &[Channel], n: usize) -> DMatrix<f64> {
    let h = 1.0 / n as f64;
    let m = channels.len();
    // Endpoint second derivatives per (channel, interval).
    let mut dd0 = DMatrix::zeros(m, n);
    let mut dd1 = DMatrix::zeros(m, n);
    for (c, ch) in channels.iter().enumerate() {
        for i in 0..n {
            let (y0, y1) = (ch.values[i], ch.values[i + 1]);
            let (v0, v1) = (ch.slopes[i] * h, ch.slopes[i + 1] * h);
            dd0[(c, i)] = (-6.0 * y0 - 4.0 * v0 + 6.0 * y1 - 2.0 * v1) / (h * h);
            dd1[(c, i)] = (6.0 * y0 + 2.0 * v0 - 6.0 * y1 + 4.0 * v1) / (h * h);
        }
    }
    let mut gram = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += h / 6.0
                    * (2.0 * dd0[(a, i)] * dd0[(b, i)]
                        + 2.0 * dd1[(a, i)] * dd1[(b, i)]
                        + dd0[(a, i)] * dd1[(b, i)]
                        + dd1[(a, i)] * dd0[(b, i)]);
            }
            gram[(a, b)] = acc;
            gram[(b, a)] = acc;
        }
    }
    gram
}

fn basis(n: usize) -> Arc<ViaBasis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<ViaBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| Arc::new(ViaBasis::build(n))).clone()
}

/// Evaluate position, velocity, and acceleration at time `t` of the
/// minimum-acceleration interpolant through the via-points with duration `T`.
pub fn evaluate(
    params: &TrajectoryParams,
    bc: &BoundaryConditions,
    t_total: f64,
    t: f64,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    assert_eq!(bc.q0.len(), params.n_dof);
    assert!(t_total > 0.0, "duration must be positive");
    assert!(
        t >= -1e-9 && t <= t_total + 1e-9,
        "query time {t} outside [0, {t_total}]"
    );
    let s = (t / t_total).clamp(0.0, 1.0);
    let b = basis(params.n_via);
    let ch = b.eval(s);
    let n = params.n_via;
    let mut q = DVector::zeros(params.n_dof);
    let mut qd = DVector::zeros(params.n_dof);
    let mut qdd = DVector::zeros(params.n_dof);
    for d in 0..params.n_dof {
        let mut acc = (0.0, 0.0, 0.0);
        for i in 0..n {
            let c = params.via(i, d);
            acc.0 += c * ch[i].0;
            acc.1 += c * ch[i].1;
            acc.2 += c * ch[i].2;
        }
        let c0 = bc.q0[d];
        acc.0 += c0 * ch[n].0;
        acc.1 += c0 * ch[n].1;
        acc.2 += c0 * ch[n].2;
        // Slope channel carries T * qdot0 in normalized time.
        let cv = t_total * bc.qdot0[d];
        acc.0 += cv * ch[n + 1].0;
        acc.1 += cv * ch[n + 1].1;
        acc.2 += cv * ch[n + 1].2;
        q[d] = acc.0;
        qd[d] = acc.1 / t_total;
        qdd[d] = acc.2 / (t_total * t_total);
    }
    (q, qd, qdd)
}

fn limits_hold(
    params: &TrajectoryParams,
    bc: &BoundaryConditions,
    t_total: f64,
    limits: &MotionLimits,
) -> bool {
    for g in 0..SCALE_GRID {
        let t = t_total * g as f64 / (SCALE_GRID - 1) as f64;
        let (_, qd, qdd) = evaluate(params, bc, t_total, t);
        for d in 0..params.n_dof {
            if qd[d].abs() > limits.v_max[d] || qdd[d].abs() > limits.a_max[d] {
                return false;
            }
        }
    }
    true
}

/// Smallest duration (1% bisection tolerance, floor [`T_MIN`]) at which the
/// trajectory respects the motion limits on a dense time grid.
pub fn time_scale(
    params: &TrajectoryParams,
    bc: &BoundaryConditions,
    limits: &MotionLimits,
) -> f64 {
    if limits_hold(params, bc, T_MIN, limits) {
        return T_MIN;
    }
    let mut lo = T_MIN;
    let mut hi = 2.0 * T_MIN;
    // An initial velocity beyond the limits can make no duration feasible;
    // the cap keeps that degenerate case finite.
    while !limits_hold(params, bc, hi, limits) && hi < 1e4 {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo) > SCALE_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if limits_hold(params, bc, mid, limits) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Discretize into K commands at times T(k+1)/K, k = 0..K-1, mapped through
/// the scene's effector layout.
pub fn discretize(
    params: &TrajectoryParams,
    bc: &BoundaryConditions,
    t_total: f64,
    k_steps: usize,
    scene: &Scene,
) -> Vec<RobotCommand> {
    assert!(k_steps >= 1);
    (0..k_steps)
        .map(|k| {
            let t = t_total * (k + 1) as f64 / k_steps as f64;
            let (q, _, _) = evaluate(params, bc, t_total, t);
            scene.command_from_config(&q)
        })
        .collect()
}

/// Gaussian smoothness prior over theta obtained by conditioning the
/// acceleration-cost Gaussian on the boundary conditions.
#[derive(Debug, Clone)]
pub struct SmoothnessPrior {
    /// Conditional mean: the minimum-cost via-points given (q0, qdot0).
    pub mean: DVector<f64>,
    /// Precision over theta, symmetric positive definite (ridged if needed).
    pub precision: DMatrix<f64>,
    /// Cross precision between theta and the stacked (q0, qdot0).
    pub cross_precision: DMatrix<f64>,
    /// Acceleration metric R_q.
    pub metric: DMatrix<f64>,
}

impl SmoothnessPrior {
    /// Unnormalized log density at theta.
    pub fn log_density(&self, theta: &DVector<f64>) -> f64 {
        let d = theta - &self.mean;
        -0.5 * (d.transpose() * &self.precision * &d)[(0, 0)]
    }
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let scaled = b * a[(i, j)];
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&scaled);
        }
    }
    out
}

/// Build the smoothness prior for `n_via` via-points over duration `t_total`
/// with acceleration metric `r_q` (n_dof square, SPD).
pub fn smoothness_prior(
    bc: &BoundaryConditions,
    r_q: &DMatrix<f64>,
    n_via: usize,
    t_total: f64,
) -> SmoothnessPrior {
    let n_dof = bc.q0.len();
    assert_eq!(r_q.nrows(), n_dof);
    assert_eq!(r_q.ncols(), n_dof);
    assert!(t_total > 0.0);
    let b = basis(n_via);
    let scale = 1.0 / (t_total * t_total * t_total);
    let g = &b.gram;
    let n = n_via;

    let g_vv = g.view((0, 0), (n, n)).into_owned() * scale;
    let precision = kron(&g_vv, r_q);

    // Boundary channels: position as-is, slope channel carries T * qdot0.
    let mut g_vb = DMatrix::zeros(n, 2);
    for i in 0..n {
        g_vb[(i, 0)] = g[(i, n)] * scale;
        g_vb[(i, 1)] = g[(i, n + 1)] * scale * t_total;
    }
    let cross_precision = kron(&g_vb, r_q);

    let mut x2 = DVector::zeros(2 * n_dof);
    x2.rows_mut(0, n_dof).copy_from(&bc.q0);
    x2.rows_mut(n_dof, n_dof).copy_from(&bc.qdot0);
    let rhs = -(&cross_precision * x2);

    let mean = match precision.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            log::warn!("smoothness precision numerically singular; ridging by {PRIOR_RIDGE}");
            let ridged = &precision + DMatrix::identity(precision.nrows(), precision.ncols())
                * PRIOR_RIDGE;
            ridged
                .cholesky()
                .expect("ridged precision must be SPD")
                .solve(&rhs)
        }
    };

    SmoothnessPrior { mean, precision, cross_precision, metric: r_q.clone() }
}

/// Integrated squared acceleration cost J_s = 1/2 ∫ qdd' R_q qdd dt, computed
/// exactly from the basis Gram matrix.
pub fn smoothness_cost(
    params: &TrajectoryParams,
    bc: &BoundaryConditions,
    r_q: &DMatrix<f64>,
    t_total: f64,
) -> f64 {
    let n = params.n_via;
    let n_dof = params.n_dof;
    let b = basis(n);
    let scale = 1.0 / (t_total * t_total * t_total);
    // Channel coefficient vectors, slope channel scaled by T.
    let mut coeffs: Vec<DVector<f64>> = Vec::with_capacity(n + 2);
    for i in 0..n {
        coeffs.push(params.theta.rows(i * n_dof, n_dof).into_owned());
    }
    coeffs.push(bc.q0.clone());
    coeffs.push(&bc.qdot0 * t_total);
    let mut cost = 0.0;
    for a in 0..n + 2 {
        let ra = r_q * &coeffs[a];
        for (bch, c_b) in coeffs.iter().enumerate() {
            cost += b.gram[(a, bch)] * c_b.dot(&ra);
        }
    }
    0.5 * scale * cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_params(vias: &[f64]) -> TrajectoryParams {
        TrajectoryParams::new(DVector::from_row_slice(vias), vias.len(), 1)
    }

    fn rest(q0: f64) -> BoundaryConditions {
        BoundaryConditions::at_rest(DVector::from_element(1, q0))
    }

    #[test]
    fn rest_to_rest_cubic() {
        let p = scalar_params(&[1.0]);
        let bc = rest(0.0);
        for t in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let (q, qd, _) = evaluate(&p, &bc, 1.0, t);
            assert_relative_eq!(q[0], 3.0 * t * t - 2.0 * t * t * t, epsilon = 1e-12);
            assert_relative_eq!(qd[0], 6.0 * t - 6.0 * t * t, epsilon = 1e-12);
        }
        let (q, qd, _) = evaluate(&p, &bc, 1.0, 1.0);
        assert_relative_eq!(q[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(qd[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_trajectory_is_stationary() {
        let p = scalar_params(&[0.7, 0.7, 0.7]);
        let bc = rest(0.7);
        for t in [0.0, 0.33, 0.6, 1.0] {
            let (q, qd, qdd) = evaluate(&p, &bc, 1.0, t);
            assert_relative_eq!(q[0], 0.7, epsilon = 1e-12);
            assert_relative_eq!(qd[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(qdd[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn terminal_contract() {
        let p = scalar_params(&[0.3, -0.2, 0.9]);
        let bc = BoundaryConditions::new(
            DVector::from_element(1, 0.1),
            DVector::from_element(1, 0.4),
        );
        let t_total = 2.3;
        let (q, qd, _) = evaluate(&p, &bc, t_total, t_total);
        assert_relative_eq!(q[0], 0.9, epsilon = 1e-9);
        assert_relative_eq!(qd[0], 0.0, epsilon = 1e-9);
        // Knot interpolation.
        for (i, &v) in [0.3, -0.2, 0.9].iter().enumerate() {
            let t = t_total * (i + 1) as f64 / 3.0;
            let (q, _, _) = evaluate(&p, &bc, t_total, t);
            assert_relative_eq!(q[0], v, epsilon = 1e-9);
        }
    }

    #[test]
    fn time_scale_matches_cubic_peak_velocity() {
        let p = scalar_params(&[1.0]);
        let bc = rest(0.0);
        let limits = MotionLimits::new(
            DVector::from_element(1, 1.0),
            DVector::from_element(1, f64::INFINITY),
        );
        // Peak velocity of the rest-to-rest cubic is 1.5 / T.
        let t = time_scale(&p, &bc, &limits);
        assert!((t - 1.5).abs() <= 0.03, "expected ~1.5, got {t}");

        let p2 = scalar_params(&[2.0]);
        let t2 = time_scale(&p2, &bc, &limits);
        assert!((t2 - 2.0 * t).abs() <= 0.02 * t2 + 0.03, "expected ~{}, got {t2}", 2.0 * t);
    }

    #[test]
    fn time_scale_floor_for_constant() {
        let p = scalar_params(&[0.0, 0.0]);
        let bc = rest(0.0);
        let limits = MotionLimits::uniform(0.5, 2.0, 1);
        assert_eq!(time_scale(&p, &bc, &limits), T_MIN);
    }

    #[test]
    fn discretize_examples() {
        use crate::geometry::EffectorShape;
        let scene = Scene::new(vec![EffectorShape::circle(0.02)], 0.05);
        let p = TrajectoryParams::new(DVector::from_row_slice(&[1.0, 0.5]), 1, 2);
        let bc = BoundaryConditions::at_rest(DVector::zeros(2));
        let cmds = discretize(&p, &bc, 1.0, 1, &scene);
        assert_eq!(cmds.len(), 1);
        assert_relative_eq!(cmds[0].effectors[0].position.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(cmds[0].effectors[0].position.y, 0.5, epsilon = 1e-12);

        // Rest-to-rest cubic sampled at T/2 is the midpoint.
        let p = TrajectoryParams::new(DVector::from_row_slice(&[1.0, 0.0]), 1, 2);
        let cmds = discretize(&p, &bc, 1.0, 2, &scene);
        assert_eq!(cmds.len(), 2);
        assert_relative_eq!(cmds[0].effectors[0].position.x, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn smoothness_prior_mean_is_stationary_at_rest() {
        for n_via in [1, 3, 5] {
            let bc = BoundaryConditions::at_rest(DVector::from_row_slice(&[0.4, -0.2]));
            let prior = smoothness_prior(&bc, &DMatrix::identity(2, 2), n_via, 1.7);
            for i in 0..n_via {
                assert_relative_eq!(prior.mean[2 * i], 0.4, epsilon = 1e-9);
                assert_relative_eq!(prior.mean[2 * i + 1], -0.2, epsilon = 1e-9);
            }
            // The stationary trajectory has zero cost.
            let params = TrajectoryParams::new(prior.mean.clone(), n_via, 2);
            let cost = smoothness_cost(&params, &bc, &prior.metric, 1.7);
            assert!(cost.abs() < 1e-12, "J_s at the conditional mean: {cost}");
        }
    }

    #[test]
    fn log_density_differences_match_cost() {
        let bc = BoundaryConditions::new(
            DVector::from_row_slice(&[0.1, 0.0]),
            DVector::from_row_slice(&[0.2, -0.1]),
        );
        let t_total = 1.3;
        let r_q = DMatrix::identity(2, 2);
        let prior = smoothness_prior(&bc, &r_q, 3, t_total);
        let th1 = DVector::from_row_slice(&[0.2, 0.1, 0.4, -0.3, 0.5, 0.2]);
        let th2 = DVector::from_row_slice(&[-0.1, 0.6, 0.2, 0.2, -0.4, 0.1]);
        let p1 = TrajectoryParams::new(th1.clone(), 3, 2);
        let p2 = TrajectoryParams::new(th2.clone(), 3, 2);
        let lhs = prior.log_density(&th1) - prior.log_density(&th2);
        let rhs = smoothness_cost(&p2, &bc, &r_q, t_total)
            - smoothness_cost(&p1, &bc, &r_q, t_total);
        assert_relative_eq!(lhs, rhs, epsilon = 1e-8);
    }
}
