//! End-to-end acceptance gate. One test, run with `--nocapture` to see the
//! per-criterion report; each criterion prints exactly one PASS/FAIL line.
//!
//! Everything here is frozen: scenes, seeds, sample counts, tolerances, and
//! wall-clock budgets. Editing a constant invalidates the gate.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use push_core::belief::{
    empirical_mean, nominal_rollout, predict_variance, ParticleBelief,
};
use push_core::dynamics::{
    min_distance, stochastic_settle, stochastic_step, NoiseModel, ObjectState, RobotCommand,
    Scene, StepParams, EPS_PEN,
};
use push_core::geometry::{EffectorPose, EffectorShape};
use push_core::optimizer::{
    bs_vp_sto, cmaes_step, CirclePath, CmaState, PlannerConfig, Task,
};
use push_core::oracles::{
    closed_form_1d_push, cost_separation_check, ks_statistic, mc_variance_oracle, LineWorld,
};
use push_core::priors::{product_of_gaussians, GaussianPrior};
use push_core::receding::{
    baseline_plan, plan_receding, stochastic_rollout, HorizonConfig,
};
use push_core::rng::{stream, Domain};
use push_core::trajectory::{evaluate, BoundaryConditions, TrajectoryParams};
use rand::Rng;

struct Criterion {
    index: usize,
    pass: bool,
    detail: String,
}

fn cloud(seed: u64, mean: Vector2<f64>, std: f64, n: usize) -> ParticleBelief {
    let mut rng = stream(seed, Domain::Belief, 0, 0);
    ParticleBelief::sample_gaussian(&mean, &(Matrix2::identity() * std * std), n, &mut rng)
}

fn one_step_gain(
    b: &ParticleBelief,
    initial: &RobotCommand,
    push: &RobotCommand,
    scene: &Scene,
    noise: &NoiseModel,
) -> f64 {
    let bt =
        nominal_rollout(b, initial, std::slice::from_ref(push), scene, &StepParams::default())
            .expect("canonical scene rollout is feasible");
    bt.gains(noise)[0]
}

/// Variance prediction vs Monte Carlo on randomized single-effector scenes.
fn criterion_1() -> Criterion {
    let t0 = Instant::now();
    let budget = Duration::from_secs(60);
    let mut rng = stream(2024, Domain::Oracle, 7, 0);
    let mut worst_z = 0.0f64;
    let mut failures = 0usize;
    for i in 0..20 {
        let obj_r = rng.gen_range(0.03..0.08);
        // `reach` is the distance from the effector center to its pushing
        // face, which is what penetration depth must be measured against.
        let (shape, reach) = if i % 2 == 0 {
            let r = rng.gen_range(0.02..0.06);
            (EffectorShape::circle(r), r)
        } else {
            let hx = rng.gen_range(0.01..0.04);
            let hy = rng.gen_range(0.05..0.2);
            (EffectorShape::rect(hx, hy), hx)
        };
        let scene = Scene::new(vec![shape], obj_r);
        let sigma = rng.gen_range(0.005..0.02);
        let b = ParticleBelief::sample_gaussian(
            &Vector2::zeros(),
            &(Matrix2::identity() * sigma * sigma),
            400,
            &mut rng,
        );
        let v_w = rng.gen_range(1e-5..4e-4);
        let noise = if i % 3 == 0 {
            NoiseModel::uniform_tangential(v_w)
        } else {
            NoiseModel::gaussian(v_w)
        };
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let pen = rng.gen_range(0.5 * sigma..2.0 * sigma);
        let dist = reach + obj_r - pen;
        let pos = Vector2::new(phi.cos(), phi.sin()) * dist;
        let u = RobotCommand::new(vec![EffectorPose::new(pos, phi + std::f64::consts::PI)]);

        let pred = predict_variance(&b, &u, &scene, &noise)
            .expect("single-effector scenes cannot jam");
        let (mc, se) = mc_variance_oracle(&b, &u, &scene, &noise, 100_000, &mut rng);
        let z = (pred - mc).abs() / se;
        worst_z = worst_z.max(z);
        if (pred - mc).abs() > 3.0 * se {
            failures += 1;
        }
    }
    let elapsed = t0.elapsed();
    Criterion {
        index: 1,
        pass: failures == 0 && elapsed <= budget,
        detail: format!(
            "20 scenes, worst |pred-mc| = {worst_z:.2} SE, {failures} over 3 SE, {:.1}s",
            elapsed.as_secs_f64()
        ),
    }
}

/// One-dimensional sweep against the closed-form mixture of uniforms.
fn criterion_2() -> Criterion {
    let t0 = Instant::now();
    let budget = Duration::from_secs(10);
    let world = LineWorld::new();
    let alpha = 0.1;
    let noise = NoiseModel::uniform_forward(alpha);
    let params = StepParams::default();
    let n = 10_000usize;
    let mut worst_ks = 0.0f64;
    let mut sweep_var_err = f64::NAN;
    for (k, u) in [0.25, 0.5, 0.75, 1.0].into_iter().enumerate() {
        let b = world.uniform_belief(0.0, 1.0, n);
        let cmd = world.command(u);
        let samples: Vec<f64> = b
            .particles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = stream(71, Domain::Oracle, k as u64, i as u64);
                let s = stochastic_settle(p, &cmd, &world.scene, &noise, &params, &mut rng)
                    .expect("line sweep cannot jam");
                world.coord(&s)
            })
            .collect();
        let mix = closed_form_1d_push(0.0, 1.0, u, alpha).unwrap();
        worst_ks = worst_ks.max(ks_statistic(&samples, |x| mix.cdf(x)));
        if u == 1.0 {
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            sweep_var_err = (var - alpha * alpha / 12.0).abs() / (alpha * alpha / 12.0);
        }
    }
    let elapsed = t0.elapsed();
    Criterion {
        index: 2,
        pass: worst_ks < 0.02 && sweep_var_err <= 0.05 && elapsed <= budget,
        detail: format!(
            "worst KS = {worst_ks:.4}, full-sweep variance off by {:.1}%, {:.1}s",
            100.0 * sweep_var_err,
            elapsed.as_secs_f64()
        ),
    }
}

/// Variance-gain signs on the three canonical one-step scenes.
fn criterion_3() -> Criterion {
    let noise = NoiseModel::gaussian(1e-4);

    let single = {
        let scene = Scene::new(vec![EffectorShape::circle(0.02)], 0.05);
        let b = cloud(1, Vector2::zeros(), 0.03, 400);
        one_step_gain(
            &b,
            &RobotCommand::single(-0.3, 0.0),
            &RobotCommand::single(-0.03, 0.0),
            &scene,
            &noise,
        )
    };

    let flat = {
        let scene = Scene::new(vec![EffectorShape::rect(0.02, 0.2)], 0.05);
        let mut rng = stream(2, Domain::Belief, 0, 0);
        let line = ParticleBelief::sample_gaussian(
            &Vector2::zeros(),
            &Matrix2::new(0.0, 0.0, 0.0, 0.0016),
            300,
            &mut rng,
        );
        one_step_gain(
            &line,
            &RobotCommand::single(-0.2, 0.0),
            &RobotCommand::single(-0.04, 0.0),
            &scene,
            &noise,
        )
    };

    let enclosing = {
        let scene =
            Scene::new(vec![EffectorShape::circle(0.04), EffectorShape::circle(0.04)], 0.05);
        let b = cloud(3, Vector2::zeros(), 0.03, 400);
        let initial = RobotCommand::new(vec![
            EffectorPose::at(-0.08, -0.25),
            EffectorPose::at(0.08, -0.25),
        ]);
        let push = RobotCommand::new(vec![
            EffectorPose::at(-0.08, -0.05),
            EffectorPose::at(0.08, -0.05),
        ]);
        let bt = nominal_rollout(
            &b,
            &initial,
            std::slice::from_ref(&push),
            &scene,
            &StepParams::default(),
        )
        .unwrap();
        bt.gains(&noise)[0]
    };

    Criterion {
        index: 3,
        pass: single > 1.0 && (flat - 1.0).abs() <= 0.05 && enclosing < 1.0,
        detail: format!(
            "single-point {single:.3} (>1), flat face {flat:.4} (=1 +/- 0.05), enclosing {enclosing:.3} (<1)"
        ),
    }
}

/// Robust vs baseline circular-path plans under 1000 stochastic rollouts.
fn criterion_4() -> Criterion {
    let t0 = Instant::now();
    let budget = Duration::from_secs(300);
    let scene = Scene::new(vec![EffectorShape::circle(0.04), EffectorShape::circle(0.04)], 0.05);
    let path = CirclePath { center: Vector2::zeros(), radius: 0.15 };
    let task = Task::Path(path);
    let obj0 = Vector2::new(0.15, 0.0);
    let bc = BoundaryConditions::at_rest(DVector::from_row_slice(&[0.09, -0.12, 0.21, -0.12]));
    let hconfig = HorizonConfig { execute_steps: 10, tolerance: 0.01, max_outer: 250 };
    let noise = NoiseModel::gaussian(1.0e-5);
    let config = PlannerConfig {
        n_candidates: 30,
        n_iterations: 4,
        n_via: 3,
        n_steps: 20,
        noise: noise.clone(),
        ..PlannerConfig::default()
    };

    let b0 = cloud(7, obj0, 0.005, 20);
    let robust = plan_receding(&bc, &b0, &scene, &task, &hconfig, &config, 17)
        .expect("robust path planning is feasible");
    let baseline = baseline_plan(&obj0, &bc, &scene, &task, &hconfig, &config, 12)
        .expect("baseline path planning is feasible");

    // A rollout succeeds when it ends within 1 cm of where the plan's own
    // noise-free replay ends. The robust plan replays from the modeled initial
    // uncertainty; the baseline replays from the exact position it assumed, so
    // any failures are entirely due to the contact noise it ignored.
    let initial = scene.command_from_config(&bc.q0);
    let params = StepParams::default();
    let rate = |log: &push_core::receding::PlanLog, b_roll: &ParticleBelief| -> f64 {
        let pt = ParticleBelief::point(obj0);
        let intended = empirical_mean(
            nominal_rollout(&pt, &initial, &log.commands, &scene, &params).unwrap().terminal(),
        );
        let rolled = stochastic_rollout(b_roll, &initial, &log.commands, &scene, &noise, 99, 1);
        let ok = rolled
            .belief
            .particles
            .iter()
            .filter(|p| (p.position - intended).norm() <= 0.01)
            .count();
        ok as f64 / 1000.0
    };
    let spread = {
        let mut rng = stream(99, Domain::World, 0, 0);
        ParticleBelief::sample_gaussian(
            &obj0,
            &(Matrix2::identity() * 0.005 * 0.005),
            1000,
            &mut rng,
        )
    };
    let point_cloud = ParticleBelief::equal_weights(vec![ObjectState::new(obj0.x, obj0.y); 1000]);
    let robust_rate = rate(&robust, &spread);
    let baseline_rate = rate(&baseline, &point_cloud);

    let elapsed = t0.elapsed();
    let pass = robust.outcome.is_success()
        && robust_rate >= 0.9
        && baseline_rate < robust_rate
        && elapsed <= budget;
    Criterion {
        index: 4,
        pass,
        detail: format!(
            "robust {robust_rate:.3} (>= 0.9), baseline {baseline_rate:.3} (strictly lower), {:.0}s",
            elapsed.as_secs_f64()
        ),
    }
}

/// Contact-prior ablation over CMA-ES iteration counts.
fn criterion_5() -> Criterion {
    let t0 = Instant::now();
    let budget = Duration::from_secs(900);
    let scene = Scene::new(vec![EffectorShape::rect(0.02, 0.15)], 0.05);
    let bc = BoundaryConditions::at_rest(DVector::from_row_slice(&[-0.15, 0.05, 0.0]));
    let task = Task::Target { position: Vector2::new(0.12, 0.0) };
    let hconfig = HorizonConfig { execute_steps: 4, tolerance: 0.02, max_outer: 25 };
    let n_runs = 50usize;

    let mut detail = String::new();
    let mut ordered = true;
    let mut rate_m4_prior = 0.0;
    for m in [1usize, 2, 4, 8] {
        let mut rates = [0.0f64; 2];
        for (slot, use_prior) in [(0usize, true), (1usize, false)] {
            let mut ok = 0usize;
            for seed in 0..n_runs as u64 {
                let b0 = cloud(100 + seed, Vector2::zeros(), 0.01, 20);
                let config = PlannerConfig {
                    n_candidates: 30,
                    n_iterations: m,
                    n_via: 3,
                    n_steps: 20,
                    noise: NoiseModel::gaussian(1e-4),
                    use_contact_prior: use_prior,
                    ..PlannerConfig::default()
                };
                let log = plan_receding(&bc, &b0, &scene, &task, &hconfig, &config, seed)
                    .expect("valid configuration");
                if log.outcome.is_success() {
                    ok += 1;
                }
            }
            rates[slot] = ok as f64 / n_runs as f64;
        }
        if rates[0] < rates[1] {
            ordered = false;
        }
        if m == 4 {
            rate_m4_prior = rates[0];
        }
        detail.push_str(&format!("M={m}: {:.2}/{:.2} ", rates[0], rates[1]));
    }
    let elapsed = t0.elapsed();
    Criterion {
        index: 5,
        pass: ordered && rate_m4_prior >= 0.9 && elapsed <= budget,
        detail: format!(
            "(with prior/without) {detail}- M=4 with prior {rate_m4_prior:.2} >= 0.9, {:.0}s",
            elapsed.as_secs_f64()
        ),
    }
}

/// Wall-clock budget for one optimizer iteration at the reference size.
fn criterion_6() -> Criterion {
    let scene = Scene::new(vec![EffectorShape::circle(0.04), EffectorShape::circle(0.04)], 0.05);
    let bc = BoundaryConditions::at_rest(DVector::from_row_slice(&[0.09, -0.12, 0.21, -0.12]));
    let b0 = cloud(7, Vector2::new(0.15, 0.0), 0.005, 20);
    let task = Task::Target { position: Vector2::new(0.15, 0.15) };
    let mut times = Vec::new();
    for seed in 0..5u64 {
        let config = PlannerConfig {
            n_candidates: 30,
            n_iterations: 1,
            n_via: 3,
            n_steps: 20,
            noise: NoiseModel::gaussian(2.5e-5),
            seed,
            ..PlannerConfig::default()
        };
        let t0 = Instant::now();
        let cand = bs_vp_sto(&bc, &b0, &scene, &task, &config, 0);
        times.push(t0.elapsed());
        assert!(cand.is_ok(), "timing scene must plan");
    }
    times.sort();
    let median = times[times.len() / 2];
    Criterion {
        index: 6,
        pass: median <= Duration::from_millis(50),
        detail: format!(
            "median of 5 iterations: {:.1} ms (4 DoF, 30 candidates, 20 particles, 20 steps)",
            median.as_secs_f64() * 1e3
        ),
    }
}

/// Open-loop back-and-forth repeatability: robust vs deterministic baseline.
fn criterion_7() -> Criterion {
    let t0 = Instant::now();
    let hy = 0.10;
    let scene = Scene::new(vec![EffectorShape::rect(0.02, hy)], 0.05);
    let a = Vector2::new(0.0, 0.0);
    let b_pt = Vector2::new(0.3, 0.0);
    let mid = Vector2::new(0.15, 0.0);
    let noise = NoiseModel::gaussian(2.5e-5);
    let hconfig = HorizonConfig { execute_steps: 4, tolerance: 0.015, max_outer: 30 };
    let config = PlannerConfig {
        n_candidates: 30,
        n_iterations: 4,
        n_via: 3,
        n_steps: 20,
        noise: noise.clone(),
        ..PlannerConfig::default()
    };
    let bc_fwd = BoundaryConditions::at_rest(DVector::from_row_slice(&[-0.14, 0.04, 0.0]));

    // The scene is mirror-symmetric about x = 0.15, so the return stroke is
    // the reflected forward stroke (reflection negates a rect's yaw).
    let mirror = |u: &RobotCommand| -> RobotCommand {
        let p = &u.effectors[0];
        RobotCommand::new(vec![EffectorPose::new(
            Vector2::new(0.3 - p.position.x, p.position.y),
            -p.yaw,
        )])
    };

    // Contact-free route to the opposite side: retreat radially from the
    // just-pushed object, stage on a wide circle around the table midpoint
    // (normalizing yaw out there), hop the circle in short arcs, drop onto
    // the next start pose.
    let transfer =
        |from: &RobotCommand, endpoint: Vector2<f64>, to_pos: Vector2<f64>| -> Vec<RobotCommand> {
            let p = from.effectors[0].position;
            let yaw = from.effectors[0].yaw;
            let mut cmds = Vec::new();
            let r1 = endpoint + (p - endpoint).normalize() * 0.25;
            cmds.push(RobotCommand::new(vec![EffectorPose::new(r1, yaw)]));
            let s = mid + (r1 - mid).normalize() * 0.35;
            cmds.push(RobotCommand::new(vec![EffectorPose::new(s, yaw)]));
            let a0 = (s - mid).y.atan2((s - mid).x);
            let at = (to_pos - mid).y.atan2((to_pos - mid).x);
            let mut da = at - a0;
            while da > std::f64::consts::PI {
                da -= std::f64::consts::TAU;
            }
            while da < -std::f64::consts::PI {
                da += std::f64::consts::TAU;
            }
            let n = (da.abs() / (std::f64::consts::PI / 6.0)).ceil().max(1.0) as usize;
            for k in 1..=n {
                let ang = a0 + da * k as f64 / n as f64;
                let w = mid + Vector2::new(ang.cos(), ang.sin()) * 0.35;
                cmds.push(RobotCommand::new(vec![EffectorPose::new(w, 0.0)]));
            }
            cmds.push(RobotCommand::new(vec![EffectorPose::new(to_pos, 0.0)]));
            cmds
        };

    // Survived cycle counts over 100 replays of a forward/backward pair.
    let run = |fwd: &[RobotCommand]| -> Vec<usize> {
        let bwd: Vec<RobotCommand> = fwd.iter().map(mirror).collect();
        let initial_fwd = scene.command_from_config(&bc_fwd.q0);
        let initial_bwd = mirror(&initial_fwd);
        let east = transfer(fwd.last().unwrap(), b_pt, initial_bwd.effectors[0].position);
        let west = transfer(bwd.last().unwrap(), a, initial_fwd.effectors[0].position);
        let params = StepParams::default();
        let mut survived = Vec::new();
        for seed in 0..100u64 {
            let mut rng = stream(500 + seed, Domain::World, 0, 0);
            let mut q = ObjectState::new(a.x, a.y);
            let mut cycles_done = 0usize;
            'outer: for _ in 0..40 {
                for (start, stroke, leg) in
                    [(&initial_fwd, fwd, &east), (&initial_bwd, &bwd[..], &west)]
                {
                    let mut prev = start.clone();
                    for u in stroke.iter().chain(leg.iter()) {
                        match stochastic_step(&q, &prev, u, &scene, &noise, &params, &mut rng) {
                            Ok(next) => q = next,
                            Err(_) => break 'outer,
                        }
                        prev = u.clone();
                    }
                    if q.position.y.abs() > hy {
                        break 'outer;
                    }
                }
                cycles_done += 1;
            }
            survived.push(cycles_done);
        }
        survived.sort_unstable();
        survived
    };

    let bf = cloud(21, a, 0.005, 20);
    let robust = plan_receding(
        &bc_fwd,
        &bf,
        &scene,
        &Task::Target { position: b_pt },
        &hconfig,
        &config,
        33,
    )
    .expect("robust stroke planning is feasible");
    let baseline = baseline_plan(
        &a,
        &bc_fwd,
        &scene,
        &Task::Target { position: b_pt },
        &hconfig,
        &config,
        41,
    )
    .expect("baseline stroke planning is feasible");
    if !robust.outcome.is_success() || !baseline.outcome.is_success() {
        return Criterion {
            index: 7,
            pass: false,
            detail: format!(
                "stroke planning failed: robust {:?}, baseline {:?}",
                robust.outcome, baseline.outcome
            ),
        };
    }

    let rs = run(&robust.commands);
    let bs = run(&baseline.commands);
    let robust_full = rs.iter().filter(|&&c| c >= 40).count();
    let (rob_median, base_median) = (rs[50], bs[50]);
    let elapsed = t0.elapsed();
    Criterion {
        index: 7,
        pass: robust_full >= 80 && base_median < rob_median,
        detail: format!(
            "robust survived 40 cycles in {robust_full}/100 (>= 80), medians: robust {rob_median}, baseline {base_median} (strictly fewer), {:.0}s",
            elapsed.as_secs_f64()
        ),
    }
}

/// Invariant re-asserts: the compact forms of the property suites.
fn criterion_8() -> Criterion {
    let mut bad: Vec<&str> = Vec::new();

    // Non-penetration through a noisy random walk.
    {
        let scene = Scene::new(vec![EffectorShape::rect(0.03, 0.08)], 0.05);
        let params = StepParams::default();
        let noise = NoiseModel::gaussian(1e-4);
        let mut rng = stream(8, Domain::World, 0, 0);
        let mut q = ObjectState::new(0.0, 0.0);
        let mut prev = RobotCommand::single(-0.3, 0.0);
        let mut ok = true;
        for _ in 0..200 {
            let next = RobotCommand::new(vec![EffectorPose::new(
                prev.effectors[0].position
                    + Vector2::new(rng.gen_range(-0.02..0.04), rng.gen_range(-0.02..0.02)),
                0.0,
            )]);
            q = stochastic_step(&q, &prev, &next, &scene, &noise, &params, &mut rng)
                .expect("single effector cannot jam");
            if min_distance(&q, &next, &scene) < -EPS_PEN {
                ok = false;
            }
            prev = next;
        }
        if !ok {
            bad.push("non-penetration");
        }
    }

    // Bit-identical planning re-runs.
    {
        let scene = Scene::new(vec![EffectorShape::rect(0.02, 0.12)], 0.05);
        let bc = BoundaryConditions::at_rest(DVector::from_row_slice(&[-0.12, 0.0, 0.0]));
        let b0 = cloud(5, Vector2::zeros(), 0.01, 20);
        let task = Task::Target { position: Vector2::new(0.1, 0.0) };
        let config = PlannerConfig {
            n_candidates: 12,
            n_iterations: 3,
            n_via: 2,
            n_steps: 10,
            noise: NoiseModel::gaussian(2.5e-5),
            ..PlannerConfig::default()
        };
        let x = bs_vp_sto(&bc, &b0, &scene, &task, &config, 0).unwrap();
        let y = bs_vp_sto(&bc, &b0, &scene, &task, &config, 0).unwrap();
        if x != y {
            bad.push("determinism");
        }
    }

    // Accepted robust plans keep every planned gain within the bound.
    {
        let scene = Scene::new(vec![EffectorShape::rect(0.02, 0.15)], 0.05);
        let bc = BoundaryConditions::at_rest(DVector::from_row_slice(&[-0.15, 0.05, 0.0]));
        let task = Task::Target { position: Vector2::new(0.12, 0.0) };
        let hconfig = HorizonConfig { execute_steps: 4, tolerance: 0.02, max_outer: 25 };
        let config = PlannerConfig {
            n_candidates: 30,
            n_iterations: 4,
            n_via: 3,
            n_steps: 20,
            noise: NoiseModel::gaussian(1e-4),
            ..PlannerConfig::default()
        };
        let mut checked = false;
        for seed in 0..5u64 {
            let b0 = cloud(100 + seed, Vector2::zeros(), 0.01, 20);
            let log = plan_receding(&bc, &b0, &scene, &task, &hconfig, &config, seed).unwrap();
            if log.outcome.is_success() {
                checked = true;
                if !log.horizons.iter().all(|h| h.max_gain <= 1.0 + 1e-9) {
                    bad.push("gain bound on accepted plan");
                }
                break;
            }
        }
        if !checked {
            bad.push("no accepted plan to check gains on");
        }
    }

    // Expected-cost separation identity.
    {
        let mut rng = stream(9, Domain::Oracle, 0, 0);
        let samples: Vec<Vector2<f64>> = (0..500)
            .map(|_| Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let (lhs, rhs) = cost_separation_check(&samples, &Vector2::new(0.3, -0.2));
        if (lhs - rhs).abs() > 1e-12 * lhs.abs().max(1.0) {
            bad.push("cost separation");
        }
    }

    // Product-of-Gaussians precision additivity is exact.
    {
        let mut rng = stream(10, Domain::Oracle, 0, 0);
        let spd = |rng: &mut rand_chacha::ChaCha8Rng| {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            &m * m.transpose() + DMatrix::identity(3, 3) * 0.5
        };
        let a = GaussianPrior::new(
            DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)),
            spd(&mut rng),
        );
        let b = GaussianPrior::new(
            DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)),
            spd(&mut rng),
        );
        let p = product_of_gaussians(&a, &b);
        if p.precision != &a.precision + &b.precision {
            bad.push("product-of-Gaussians precision additivity");
        }
    }

    // CMA-ES selection is rank-based: affine fitness maps change nothing.
    {
        let mut rng = stream(11, Domain::Oracle, 0, 0);
        let state = CmaState::new(5);
        let scored: Vec<(DVector<f64>, f64)> = (0..12)
            .map(|_| {
                (DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0)), rng.gen_range(-3.0..5.0))
            })
            .collect();
        let rescored: Vec<(DVector<f64>, f64)> =
            scored.iter().map(|(x, f)| (x.clone(), 3.7 * f + 11.0)).collect();
        let s1 = cmaes_step(&state, &scored);
        let s2 = cmaes_step(&state, &rescored);
        if s1.mean != s2.mean || s1.cov != s2.cov || s1.sigma != s2.sigma {
            bad.push("CMA-ES rank invariance");
        }
    }

    // The interpolant passes through its via points.
    {
        let mut rng = stream(12, Domain::Oracle, 0, 0);
        let n_via = 3;
        let n_dof = 2;
        let theta = DVector::from_fn(n_via * n_dof, |_, _| rng.gen_range(-0.5..0.5));
        let params = TrajectoryParams::new(theta.clone(), n_via, n_dof);
        let bc = BoundaryConditions::new(
            DVector::from_fn(n_dof, |_, _| rng.gen_range(-0.5..0.5)),
            DVector::from_fn(n_dof, |_, _| rng.gen_range(-0.5..0.5)),
        );
        let t_total = 1.7;
        let mut ok = true;
        for i in 0..n_via {
            let t = t_total * (i + 1) as f64 / n_via as f64;
            let (q, _, _) = evaluate(&params, &bc, t_total, t);
            for d in 0..n_dof {
                if (q[d] - theta[i * n_dof + d]).abs() > 1e-9 {
                    ok = false;
                }
            }
        }
        let (q0, _, _) = evaluate(&params, &bc, t_total, 0.0);
        if (q0 - &bc.q0).norm() > 1e-9 {
            ok = false;
        }
        if !ok {
            bad.push("interpolation exactness");
        }
    }

    Criterion {
        index: 8,
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            "non-penetration, determinism, gain bound, cost separation, precision additivity, rank invariance, interpolation".into()
        } else {
            format!("failed invariants: {}", bad.join(", "))
        },
    }
}

#[test]
fn acceptance_criteria() {
    let results = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ];
    let mut failed = Vec::new();
    for r in &results {
        println!(
            "criterion {}: {} ({})",
            r.index,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        if !r.pass {
            failed.push(r.index);
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
