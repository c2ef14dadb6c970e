//! Via-point trajectory properties: interpolation exactness, affinity in the
//! parameters, optimality of the interpolant, the closed-form acceleration
//! Gram matrix against quadrature, and time-scaling behavior.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use push_core::trajectory::{
    evaluate, smoothness_cost, smoothness_prior, time_scale, BoundaryConditions, MotionLimits,
    TrajectoryParams,
};

fn params_from(vias: &[f64], n_dof: usize) -> TrajectoryParams {
    TrajectoryParams::new(DVector::from_row_slice(vias), vias.len() / n_dof, n_dof)
}

proptest! {
    #[test]
    fn interpolant_hits_via_points_and_boundary(
        n_via in 1usize..5,
        n_dof in 1usize..4,
        raw in proptest::collection::vec(-1.0..1.0f64, 24),
        t_total in 0.3..5.0f64,
    ) {
        let theta: Vec<f64> = raw[..n_via * n_dof].to_vec();
        let q0 = DVector::from_fn(n_dof, |i, _| raw[12 + i]);
        let qdot0 = DVector::from_fn(n_dof, |i, _| raw[18 + i]);
        let params = params_from(&theta, n_dof);
        let bc = BoundaryConditions::new(q0.clone(), qdot0.clone());

        let (q_start, qd_start, _) = evaluate(&params, &bc, t_total, 0.0);
        prop_assert!((q_start - &q0).norm() <= 1e-9);
        prop_assert!((qd_start - &qdot0).norm() <= 1e-9);

        for i in 0..n_via {
            let t = t_total * (i + 1) as f64 / n_via as f64;
            let (q, _, _) = evaluate(&params, &bc, t_total, t);
            for d in 0..n_dof {
                prop_assert!(
                    (q[d] - theta[i * n_dof + d]).abs() <= 1e-9,
                    "via {i} dof {d}: {} vs {}", q[d], theta[i * n_dof + d]
                );
            }
        }
    }

    #[test]
    fn evaluation_is_affine_in_the_via_points(
        raw1 in proptest::collection::vec(-1.0..1.0f64, 6),
        raw2 in proptest::collection::vec(-1.0..1.0f64, 6),
        a in -2.0..2.0f64,
        frac in 0.0..1.0f64,
        t_total in 0.3..4.0f64,
    ) {
        let n_dof = 2;
        let bc = BoundaryConditions::new(
            DVector::from_row_slice(&[0.3, -0.2]),
            DVector::from_row_slice(&[0.1, 0.4]),
        );
        let p1 = params_from(&raw1, n_dof);
        let p2 = params_from(&raw2, n_dof);
        let mix: Vec<f64> = raw1
            .iter()
            .zip(&raw2)
            .map(|(x, y)| a * x + (1.0 - a) * y)
            .collect();
        let pm = params_from(&mix, n_dof);
        let t = frac * t_total;
        let (q1, _, _) = evaluate(&p1, &bc, t_total, t);
        let (q2, _, _) = evaluate(&p2, &bc, t_total, t);
        let (qm, _, _) = evaluate(&pm, &bc, t_total, t);
        prop_assert!((qm - (q1 * a + q2 * (1.0 - a))).norm() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    /// The interpolant is the minimum-acceleration curve through its
    /// via-points: re-interpolating twice as many points sampled from it
    /// reproduces its cost, and displacing any of the new points only raises
    /// the cost.
    #[test]
    fn interpolant_minimizes_integrated_acceleration(
        n_via in 1usize..4,
        raw in proptest::collection::vec(-1.0..1.0f64, 3),
        q0 in -1.0..1.0f64,
        qdot0 in -1.0..1.0f64,
        t_total in 0.5..3.0f64,
        bumps in proptest::collection::vec(0.01..0.5f64, 3),
        signs in proptest::collection::vec(proptest::bool::ANY, 3),
    ) {
        let r_q = DMatrix::identity(1, 1);
        let theta: Vec<f64> = raw[..n_via].to_vec();
        let params = params_from(&theta, 1);
        let bc = BoundaryConditions::new(
            DVector::from_row_slice(&[q0]),
            DVector::from_row_slice(&[qdot0]),
        );
        let base_cost = smoothness_cost(&params, &bc, &r_q, t_total);

        // Fine parameterization: 2 n_via uniform knots, the even ones landing
        // exactly on the original via-points.
        let fine_n = 2 * n_via;
        let mut fine: Vec<f64> = (0..fine_n)
            .map(|j| {
                let t = t_total * (j + 1) as f64 / fine_n as f64;
                evaluate(&params, &bc, t_total, t).0[0]
            })
            .collect();
        let same = smoothness_cost(&params_from(&fine, 1), &bc, &r_q, t_total);
        prop_assert!(
            (same - base_cost).abs() <= 1e-9 * (1.0 + base_cost),
            "resampled cost {same} vs {base_cost}"
        );

        // Perturb the midpoints (odd-indexed fine knots stay on the original).
        let mut changed = false;
        for (i, j) in (0..fine_n).step_by(2).enumerate() {
            if i < bumps.len() {
                fine[j] += if signs[i] { bumps[i] } else { -bumps[i] };
                changed = true;
            }
        }
        prop_assert!(changed);
        let bumped = smoothness_cost(&params_from(&fine, 1), &bc, &r_q, t_total);
        prop_assert!(
            bumped >= base_cost - 1e-9,
            "perturbed interpolant got cheaper: {bumped} < {base_cost}"
        );
    }

    /// Entries of the smoothness precision equal r_q times the integral of
    /// the corresponding basis accelerations, computed here by Simpson
    /// quadrature on a grid aligned with the spline knots.
    #[test]
    fn precision_matches_acceleration_quadrature(
        n_via in 1usize..4,
        t_total in 0.5..3.0f64,
        r_q_scale in 0.1..10.0f64,
    ) {
        let r_q = DMatrix::identity(1, 1) * r_q_scale;
        let bc = BoundaryConditions::new(DVector::zeros(1), DVector::zeros(1));
        let prior = smoothness_prior(&bc, &r_q, n_via, t_total);

        // 2400 intervals is divisible by every knot count in range, so each
        // Simpson panel sees a polynomial acceleration product.
        let steps = 2400;
        let h = t_total / steps as f64;
        let accel = |i: usize, t: f64| {
            let mut theta = vec![0.0; n_via];
            theta[i] = 1.0;
            evaluate(&params_from(&theta, 1), &bc, t_total, t).2[0]
        };
        for i in 0..n_via {
            for j in i..n_via {
                let mut integral = 0.0;
                for s in 0..steps / 2 {
                    let t0 = 2.0 * s as f64 * h;
                    integral += h / 3.0
                        * (accel(i, t0) * accel(j, t0)
                            + 4.0 * accel(i, t0 + h) * accel(j, t0 + h)
                            + accel(i, t0 + 2.0 * h) * accel(j, t0 + 2.0 * h));
                }
                let expected = r_q_scale * integral;
                let got = prior.precision[(i, j)];
                prop_assert!(
                    (got - expected).abs() <= 1e-6 * (1.0 + expected.abs()),
                    "entry ({i},{j}): {got} vs quadrature {expected}"
                );
            }
        }
    }

    /// The integrated acceleration cost is the prior's quadratic form around
    /// its conditional mean, up to the constant at the mean.
    #[test]
    fn cost_is_quadratic_around_the_prior_mean(
        n_via in 1usize..4,
        n_dof in 1usize..3,
        raw in proptest::collection::vec(-1.0..1.0f64, 6),
        q0 in -1.0..1.0f64,
        qdot0 in -1.0..1.0f64,
        t_total in 0.5..3.0f64,
        r_q_scale in 0.1..10.0f64,
    ) {
        let dim = n_via * n_dof;
        let r_q = DMatrix::identity(n_dof, n_dof) * r_q_scale;
        let bc = BoundaryConditions::new(
            DVector::from_element(n_dof, q0),
            DVector::from_element(n_dof, qdot0),
        );
        let prior = smoothness_prior(&bc, &r_q, n_via, t_total);
        let theta = DVector::from_fn(dim, |i, _| raw[i % raw.len()]);
        let params = TrajectoryParams::new(theta.clone(), n_via, n_dof);
        let mean_params = TrajectoryParams::new(prior.mean.clone(), n_via, n_dof);

        let j_theta = smoothness_cost(&params, &bc, &r_q, t_total);
        let j_mean = smoothness_cost(&mean_params, &bc, &r_q, t_total);
        let d = &theta - &prior.mean;
        let quad = 0.5 * (d.transpose() * &prior.precision * d)[(0, 0)];
        prop_assert!(
            (j_theta - j_mean - quad).abs() <= 1e-8 * (1.0 + j_theta.abs()),
            "J={j_theta} J_mean={j_mean} quad={quad}"
        );
    }
}

/// Rest-to-rest single-via durations are set by the peak-velocity bound and
/// scale linearly with distance while velocity-limited.
#[test]
fn duration_scales_linearly_with_distance() {
    let limits = MotionLimits::uniform(0.5, 1e3, 1);
    let bc = BoundaryConditions::new(DVector::zeros(1), DVector::zeros(1));
    let t_of = |d: f64| {
        time_scale(&params_from(&[d], 1), &bc, &limits)
    };
    // Peak velocity of the rest-to-rest cubic is 1.5 d / T.
    let t1 = t_of(0.3);
    assert!((t1 - 1.5 * 0.3 / 0.5).abs() <= 0.02 * t1, "t1={t1}");
    let t2 = t_of(0.6);
    assert!((t2 / t1 - 2.0).abs() <= 0.04, "ratio {}", t2 / t1);
}
