//! The four CLI modes: plan, evaluate, mpc-sim, validate.
//!
//! Each mode writes its artifacts into the output directory plus a
//! machine-readable summary.json, and prints a one-line result. Returned
//! statuses map onto process exit codes in main; `Err` is reserved for
//! unexpected failures (I/O, malformed inputs).

use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use push_core::belief::{
    empirical_mean, nominal_rollout, predict_variance, ParticleBelief,
};
use push_core::dynamics::{
    stochastic_settle, stochastic_step, NoiseModel, ObjectState, RobotCommand, Scene, StepParams,
};
use push_core::geometry::EffectorShape;
use push_core::optimizer::{bs_vp_sto, cmaes_step, CmaState, PlannerConfig, Task};
use push_core::oracles::{
    closed_form_1d_push, cost_separation_check, ks_statistic, mc_variance_oracle, LineWorld,
};
use push_core::priors::{product_of_gaussians, GaussianPrior};
use push_core::receding::{mpc_step, plan_receding, stochastic_rollout, PlanLog, PlanOutcome};
use push_core::rng::{stream, Domain};
use push_core::trajectory::{evaluate as eval_trajectory, BoundaryConditions, TrajectoryParams};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::artifacts::{
    read_commands_csv, write_belief_csv, write_commands_csv, write_gains_csv, write_summary,
    GainsRow,
};
use crate::config::{BeliefKind, ScenarioConfig, TaskKind};
use crate::svg::{export_gains_svg, export_plan_svg, export_trace_svg, PlotStyle};

/// What a mode concluded; `main` turns this into an exit code.
#[derive(Debug)]
pub enum RunStatus {
    Ok,
    ConfigError(String),
    PlanningFailure(String),
    ValidationFailure(String),
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::ConfigError(_) => 2,
            Self::PlanningFailure(_) => 3,
            Self::ValidationFailure(_) => 4,
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            Self::Ok => None,
            Self::ConfigError(m) | Self::PlanningFailure(m) | Self::ValidationFailure(m) => {
                Some(m)
            }
        }
    }
}

fn outcome_str(outcome: &PlanOutcome) -> &'static str {
    match outcome {
        PlanOutcome::Success { .. } => "success",
        PlanOutcome::GainViolation { .. } => "gain_violation",
        PlanOutcome::NoPlan { .. } => "no_plan",
        PlanOutcome::IterationLimit => "iteration_limit",
    }
}

fn task_error(mean: &Vector2<f64>, task: &Task) -> f64 {
    match task {
        Task::Target { position } => (mean - position).norm(),
        Task::Path(path) => ((mean - path.center).norm() - path.radius).abs(),
    }
}

/// One start position drawn from the configured initial belief.
fn sample_start<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Vector2<f64> {
    let mean = cfg.nominal_object();
    match cfg.belief.kind {
        BeliefKind::Point => mean,
        BeliefKind::Uniform => {
            let low = cfg.belief.low.unwrap();
            let high = cfg.belief.high.unwrap();
            Vector2::new(rng.gen_range(low[0]..high[0]), rng.gen_range(low[1]..high[1]))
        }
        BeliefKind::Gaussian => {
            let b = cfg.belief.std.map(|s| Matrix2::new(s[0] * s[0], 0.0, 0.0, s[1] * s[1]));
            let cov = b.unwrap_or_else(|| {
                let c = cfg.belief.cov.unwrap();
                Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1])
            });
            ParticleBelief::sample_gaussian(&mean, &cov, 1, rng).particles[0].position
        }
    }
}

fn per_step_rows(log: &PlanLog, scene: &Scene, noise: &NoiseModel, bc0: &BoundaryConditions) -> Vec<GainsRow> {
    let initial = scene.command_from_config(&bc0.q0);
    match nominal_rollout(&log.initial_belief, &initial, &log.commands, scene, &StepParams::default()) {
        Ok(bt) => {
            let gains = bt.gains(noise);
            (0..bt.steps())
                .map(|k| GainsRow {
                    gamma: gains[k],
                    contact_fraction: bt.contact_fractions[k],
                    variance: bt.variances[k + 1],
                })
                .collect()
        }
        // A jammed nominal replay leaves the trace empty; the plan artifacts
        // are still written so the failure can be inspected.
        Err(_) => Vec::new(),
    }
}

fn write_plan_artifacts(
    out: &Path,
    log: &PlanLog,
    cfg: &ScenarioConfig,
    scene: &Scene,
    task: &Task,
    seed: u64,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_commands_csv(&out.join("commands.csv"), &log.commands)?;
    write_belief_csv(&out.join("belief_0.csv"), &log.initial_belief)?;
    for (i, h) in log.horizons.iter().enumerate() {
        write_belief_csv(&out.join(format!("belief_{}.csv", i + 1)), &h.belief_out)?;
    }
    let rows = per_step_rows(log, scene, &cfg.noise(), &cfg.boundary_conditions());
    write_gains_csv(&out.join("gains.csv"), &rows)?;
    let style = PlotStyle::default();
    std::fs::write(out.join("plan.svg"), export_plan_svg(log, Some(task), &style))?;
    std::fs::write(out.join("gains.svg"), export_gains_svg(&rows, &style))?;

    let final_mean = log
        .horizons
        .last()
        .map(|h| empirical_mean(&h.belief_out))
        .unwrap_or_else(|| empirical_mean(&log.initial_belief));
    let max_gain = log.horizons.iter().map(|h| h.max_gain).fold(None, |acc: Option<f64>, g| {
        Some(acc.map_or(g, |a| a.max(g)))
    });
    write_summary(
        &out.join("summary.json"),
        &json!({
            "mode": "plan",
            "seed": seed,
            "outcome": outcome_str(&log.outcome),
            "success": log.outcome.is_success(),
            "horizons": log.horizons.len(),
            "commands": log.commands.len(),
            "final_mean": [final_mean.x, final_mean.y],
            "task_error": task_error(&final_mean, task),
            "max_gain": max_gain,
        }),
    )?;
    Ok(())
}

pub fn run_plan(cfg: &ScenarioConfig, out: &Path, seed: u64) -> Result<RunStatus> {
    let scene = cfg.scene();
    let task = cfg.task();
    let log = plan_receding(
        &cfg.boundary_conditions(),
        &cfg.belief(seed),
        &scene,
        &task,
        &cfg.horizon_config(),
        &cfg.planner_config(seed),
        seed,
    )
    .map_err(|e| anyhow::anyhow!("planner rejected the configuration: {e}"))?;
    write_plan_artifacts(out, &log, cfg, &scene, &task, seed)?;

    let final_mean = log
        .horizons
        .last()
        .map(|h| empirical_mean(&h.belief_out))
        .unwrap_or_else(|| empirical_mean(&log.initial_belief));
    println!(
        "plan: {} after {} horizons, {} commands, task error {:.4} m -> {}",
        outcome_str(&log.outcome),
        log.horizons.len(),
        log.commands.len(),
        task_error(&final_mean, &task),
        out.display()
    );
    if log.outcome.is_success() {
        Ok(RunStatus::Ok)
    } else {
        Ok(RunStatus::PlanningFailure(format!(
            "plan ended with outcome {}",
            outcome_str(&log.outcome)
        )))
    }
}

pub fn run_evaluate(
    cfg: &ScenarioConfig,
    out: &Path,
    seed: u64,
    rollouts: usize,
    plan_path: Option<&Path>,
) -> Result<RunStatus> {
    let scene = cfg.scene();
    let task = cfg.task();
    let noise = cfg.noise();
    let params = StepParams::default();
    let bc = cfg.boundary_conditions();
    let initial = scene.command_from_config(&bc.q0);
    std::fs::create_dir_all(out)?;

    let (commands, plan_source) = match plan_path {
        Some(p) => {
            let commands = read_commands_csv(p)?;
            let n_eff = scene.effectors.len();
            if commands.iter().any(|c| c.effectors.len() != n_eff) {
                return Ok(RunStatus::ConfigError(format!(
                    "{} commands {n_eff} effectors per step to match the scene",
                    p.display()
                )));
            }
            (commands, "loaded")
        }
        None => {
            let log = plan_receding(
                &bc,
                &cfg.belief(seed),
                &scene,
                &task,
                &cfg.horizon_config(),
                &cfg.planner_config(seed),
                seed,
            )
            .map_err(|e| anyhow::anyhow!("planner rejected the configuration: {e}"))?;
            if !log.outcome.is_success() {
                return Ok(RunStatus::PlanningFailure(format!(
                    "cannot evaluate: planning ended with {}",
                    outcome_str(&log.outcome)
                )));
            }
            write_commands_csv(&out.join("commands.csv"), &log.commands)?;
            (log.commands, "planned")
        }
    };
    if commands.is_empty() {
        return Ok(RunStatus::ConfigError("the plan holds no commands".into()));
    }

    // Success region: the target ball for target tasks; for path tasks, a
    // ball around where the noise-free replay of the plan ends.
    let nominal = cfg.nominal_object();
    let intended = match nominal_rollout(
        &ParticleBelief::point(nominal),
        &initial,
        &commands,
        &scene,
        &params,
    ) {
        Ok(bt) => empirical_mean(bt.terminal()),
        Err(e) => {
            return Ok(RunStatus::PlanningFailure(format!(
                "noise-free replay of the plan is infeasible: {e}"
            )))
        }
    };
    let goal = match &task {
        Task::Target { position } => *position,
        Task::Path(_) => intended,
    };
    let tolerance = cfg.task.tolerance;

    let successes = (0..rollouts)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = stream(seed, Domain::Evaluate, i as u64, 0);
            let mut q = ObjectState { position: sample_start(cfg, &mut rng) };
            let mut prev = &initial;
            for u in &commands {
                match stochastic_step(&q, prev, u, &scene, &noise, &params, &mut rng) {
                    Ok(next) => q = next,
                    Err(_) => return false,
                }
                prev = u;
            }
            (q.position - goal).norm() <= tolerance
        })
        .count();
    let success_rate = successes as f64 / rollouts.max(1) as f64;

    write_summary(
        &out.join("summary.json"),
        &json!({
            "mode": "evaluate",
            "seed": seed,
            "plan_source": plan_source,
            "rollouts": rollouts,
            "successes": successes,
            "success_rate": success_rate,
            "tolerance": tolerance,
            "goal": [goal.x, goal.y],
            "intended_terminal": [intended.x, intended.y],
        }),
    )?;
    println!(
        "evaluate: {successes}/{rollouts} rollouts within {tolerance:.3} m of the goal \
         (success rate {success_rate:.3}) -> {}",
        out.display()
    );
    Ok(RunStatus::Ok)
}

pub fn run_mpc(cfg: &ScenarioConfig, out: &Path, seed: u64) -> Result<RunStatus> {
    if cfg.task.kind != TaskKind::Target {
        return Ok(RunStatus::ConfigError(
            "mpc-sim needs a target task; path tasks have no recovery predicate".into(),
        ));
    }
    let scene = cfg.scene();
    let task = cfg.task();
    let noise = cfg.noise();
    let params = StepParams::default();
    let hconfig = cfg.horizon_config();
    let pconfig = cfg.planner_config(seed);
    let target = match &task {
        Task::Target { position } => *position,
        Task::Path(_) => unreachable!(),
    };
    let obs_cov = Matrix2::identity() * cfg.mpc.obs_std * cfg.mpc.obs_std;
    std::fs::create_dir_all(out)?;

    let mut truth = ObjectState {
        position: sample_start(cfg, &mut stream(seed, Domain::World, 0, 2)),
    };
    let mut belief = cfg.belief(seed);
    let mut bc = cfg.boundary_conditions();
    let mut prev = scene.command_from_config(&bc.q0);
    let mut executed: Vec<RobotCommand> = Vec::new();
    let mut trace: Vec<(usize, Vector2<f64>, Vector2<f64>, Vector2<f64>, bool)> = Vec::new();
    let mut recovered_at: Option<usize> = None;
    let mut hold_cycles = 0usize;
    let mut filter_resets = 0usize;

    write_belief_csv(&out.join("belief_0.csv"), &belief)?;
    for k in 0..cfg.mpc.max_cycles {
        if (truth.position - target).norm() <= cfg.task.tolerance {
            recovered_at = Some(k);
            break;
        }
        if cfg.mpc.perturb_at_cycle == Some(k) {
            truth.position += Vector2::new(cfg.mpc.perturb_offset[0], cfg.mpc.perturb_offset[1]);
        }

        let obs = ParticleBelief::sample_gaussian(
            &truth.position,
            &obs_cov,
            1,
            &mut stream(seed, Domain::World, k as u64, 1),
        )
        .particles[0]
            .position;
        let step = mpc_step(
            &belief,
            Some(&obs),
            &obs_cov,
            &bc,
            &scene,
            &task,
            &hconfig,
            &pconfig,
            k as u64,
        )
        .map_err(|e| anyhow::anyhow!("planner rejected the configuration: {e}"))?;
        if step.planned.is_none() {
            hold_cycles += 1;
        }
        if step.reseeded {
            filter_resets += 1;
        }

        // The same commands drive the real object and the belief prediction;
        // an unresolvable squeeze freezes the object for the rest of the
        // cycle, mirroring the rollout semantics.
        let mut rng_w = stream(seed, Domain::World, k as u64, 0);
        let mut prev_w = prev.clone();
        for u in &step.commands {
            match stochastic_step(&truth, &prev_w, u, &scene, &noise, &params, &mut rng_w) {
                Ok(next) => truth = next,
                Err(_) => break,
            }
            prev_w = u.clone();
        }
        let rolled =
            stochastic_rollout(&step.belief, &prev, &step.commands, &scene, &noise, seed, k as u64);
        belief = rolled.belief;
        prev = step.commands.last().cloned().unwrap_or(prev);
        executed.extend(step.commands.iter().cloned());
        bc = step.bc_next;

        trace.push((k, truth.position, obs, empirical_mean(&belief), step.planned.is_none()));
        write_belief_csv(&out.join(format!("belief_{}.csv", k + 1)), &belief)?;
    }
    if recovered_at.is_none() && (truth.position - target).norm() <= cfg.task.tolerance {
        recovered_at = Some(cfg.mpc.max_cycles);
    }

    let mut w = csv::Writer::from_path(out.join("trace.csv"))?;
    w.write_record(["cycle", "true_x", "true_y", "obs_x", "obs_y", "mean_x", "mean_y", "held"])?;
    for (k, t, o, m, held) in &trace {
        w.write_record([
            k.to_string(),
            t.x.to_string(),
            t.y.to_string(),
            o.x.to_string(),
            o.y.to_string(),
            m.x.to_string(),
            m.y.to_string(),
            (*held as u8).to_string(),
        ])?;
    }
    w.flush()?;
    write_commands_csv(&out.join("commands.csv"), &executed)?;
    let positions: Vec<Vector2<f64>> = trace.iter().map(|(_, t, _, _, _)| *t).collect();
    std::fs::write(
        out.join("trace.svg"),
        export_trace_svg(&positions, target, cfg.task.tolerance, &PlotStyle::default()),
    )?;

    let final_error = (truth.position - target).norm();
    write_summary(
        &out.join("summary.json"),
        &json!({
            "mode": "mpc-sim",
            "seed": seed,
            "recovered": recovered_at.is_some(),
            "recovered_at_cycle": recovered_at,
            "max_cycles": cfg.mpc.max_cycles,
            "perturb_at_cycle": cfg.mpc.perturb_at_cycle,
            "perturb_offset": cfg.mpc.perturb_offset,
            "hold_cycles": hold_cycles,
            "filter_resets": filter_resets,
            "final_error": final_error,
            "final_true": [truth.position.x, truth.position.y],
        }),
    )?;
    match recovered_at {
        Some(k) => {
            println!(
                "mpc-sim: recovered at cycle {k} (final error {final_error:.4} m) -> {}",
                out.display()
            );
            Ok(RunStatus::Ok)
        }
        None => {
            println!(
                "mpc-sim: not recovered within {} cycles (final error {final_error:.4} m) -> {}",
                cfg.mpc.max_cycles,
                out.display()
            );
            Ok(RunStatus::PlanningFailure("closed-loop run did not reach the target".into()))
        }
    }
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Quick deterministic forms of the oracle suites.
pub fn run_validate(seed: u64, out: Option<&Path>) -> Result<RunStatus> {
    let mut checks = Vec::new();

    // Sampling-free variance prediction vs the Monte Carlo oracle.
    {
        let mut rng = stream(seed, Domain::Oracle, 1, 0);
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..5 {
            let obj_r = rng.gen_range(0.03..0.08);
            let (shape, reach) = if i % 2 == 0 {
                let r = rng.gen_range(0.02..0.06);
                (EffectorShape::circle(r), r)
            } else {
                let hx = rng.gen_range(0.01..0.04);
                (EffectorShape::rect(hx, rng.gen_range(0.05..0.2)), hx)
            };
            let scene = Scene::new(vec![shape], obj_r);
            let sigma = rng.gen_range(0.005..0.02);
            let b = ParticleBelief::sample_gaussian(
                &Vector2::zeros(),
                &(Matrix2::identity() * sigma * sigma),
                400,
                &mut rng,
            );
            let noise = NoiseModel::gaussian(rng.gen_range(1e-5..4e-4));
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let pen = rng.gen_range(0.5 * sigma..2.0 * sigma);
            let pos = Vector2::new(phi.cos(), phi.sin()) * (reach + obj_r - pen);
            let u = RobotCommand::new(vec![push_core::geometry::EffectorPose::new(
                pos,
                phi + std::f64::consts::PI,
            )]);
            let pred = predict_variance(&b, &u, &scene, &noise).unwrap();
            let (mc, se) = mc_variance_oracle(&b, &u, &scene, &noise, 20_000, &mut rng);
            worst = worst.max((pred - mc).abs() / se);
            ok &= (pred - mc).abs() <= 3.0 * se;
        }
        checks.push(Check {
            name: "variance prediction vs Monte Carlo",
            pass: ok,
            detail: format!("worst deviation {worst:.2} SE over 5 scenes"),
        });
    }

    // One-dimensional sweep vs the closed-form mixture.
    {
        let world = LineWorld::new();
        let alpha = 0.1;
        let noise = NoiseModel::uniform_forward(alpha);
        let params = StepParams::default();
        let n = 4000;
        let mut worst_ks = 0.0f64;
        let mut var_err = 0.0;
        for (k, u) in [0.5, 1.0].into_iter().enumerate() {
            let b = world.uniform_belief(0.0, 1.0, n);
            let cmd = world.command(u);
            let samples: Vec<f64> = b
                .particles
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut rng = stream(seed, Domain::Oracle, 100 + k as u64, i as u64);
                    let s = stochastic_settle(p, &cmd, &world.scene, &noise, &params, &mut rng)
                        .unwrap();
                    world.coord(&s)
                })
                .collect();
            let mix = closed_form_1d_push(0.0, 1.0, u, alpha).unwrap();
            worst_ks = worst_ks.max(ks_statistic(&samples, |x| mix.cdf(x)));
            if u == 1.0 {
                let mean = samples.iter().sum::<f64>() / n as f64;
                let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
                var_err = (var - alpha * alpha / 12.0).abs() / (alpha * alpha / 12.0);
            }
        }
        checks.push(Check {
            name: "1D closed-form distribution",
            pass: worst_ks < 0.02 && var_err <= 0.05,
            detail: format!("KS {worst_ks:.4}, full-sweep variance off {:.1}%", 100.0 * var_err),
        });
    }

    // Variance-gain signs on the canonical scenes.
    {
        let noise = NoiseModel::gaussian(1e-4);
        let params = StepParams::default();
        let gain = |b: &ParticleBelief, initial: &RobotCommand, push: &RobotCommand, scene: &Scene| {
            nominal_rollout(b, initial, std::slice::from_ref(push), scene, &params)
                .unwrap()
                .gains(&noise)[0]
        };
        let single = {
            let scene = Scene::new(vec![EffectorShape::circle(0.02)], 0.05);
            let mut rng = stream(seed, Domain::Oracle, 2, 0);
            let b = ParticleBelief::sample_gaussian(
                &Vector2::zeros(),
                &(Matrix2::identity() * 0.0009),
                300,
                &mut rng,
            );
            gain(&b, &RobotCommand::single(-0.3, 0.0), &RobotCommand::single(-0.03, 0.0), &scene)
        };
        let flat = {
            let scene = Scene::new(vec![EffectorShape::rect(0.02, 0.2)], 0.05);
            let mut rng = stream(seed, Domain::Oracle, 3, 0);
            let b = ParticleBelief::sample_gaussian(
                &Vector2::zeros(),
                &Matrix2::new(0.0, 0.0, 0.0, 0.0016),
                300,
                &mut rng,
            );
            gain(&b, &RobotCommand::single(-0.2, 0.0), &RobotCommand::single(-0.04, 0.0), &scene)
        };
        let enclosing = {
            let scene =
                Scene::new(vec![EffectorShape::circle(0.04), EffectorShape::circle(0.04)], 0.05);
            let mut rng = stream(seed, Domain::Oracle, 4, 0);
            let b = ParticleBelief::sample_gaussian(
                &Vector2::zeros(),
                &(Matrix2::identity() * 0.0009),
                300,
                &mut rng,
            );
            let initial = RobotCommand::new(vec![
                push_core::geometry::EffectorPose::at(-0.08, -0.25),
                push_core::geometry::EffectorPose::at(0.08, -0.25),
            ]);
            let push = RobotCommand::new(vec![
                push_core::geometry::EffectorPose::at(-0.08, -0.05),
                push_core::geometry::EffectorPose::at(0.08, -0.05),
            ]);
            gain(&b, &initial, &push, &scene)
        };
        checks.push(Check {
            name: "variance-gain signs",
            pass: single > 1.0 && (flat - 1.0).abs() <= 0.05 && enclosing < 1.0,
            detail: format!("single {single:.3}, flat {flat:.4}, enclosing {enclosing:.3}"),
        });
    }

    // Expected-cost separation identity.
    {
        let mut rng = stream(seed, Domain::Oracle, 5, 0);
        let samples: Vec<Vector2<f64>> = (0..400)
            .map(|_| Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let (lhs, rhs) = cost_separation_check(&samples, &Vector2::new(0.3, -0.2));
        let pass = (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0);
        checks.push(Check {
            name: "cost separation identity",
            pass,
            detail: format!("|lhs - rhs| = {:.2e}", (lhs - rhs).abs()),
        });
    }

    // Product of Gaussians adds precisions exactly.
    {
        let mut rng = stream(seed, Domain::Oracle, 6, 0);
        let mut spd = || {
            let m = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            &m * m.transpose() + DMatrix::identity(3, 3) * 0.5
        };
        let p1 = spd();
        let p2 = spd();
        let a = GaussianPrior::new(DVector::zeros(3), p1.clone());
        let b = GaussianPrior::new(DVector::from_element(3, 0.3), p2.clone());
        let p = product_of_gaussians(&a, &b);
        checks.push(Check {
            name: "precision additivity",
            pass: p.precision == p1 + p2,
            detail: "exact matrix equality".into(),
        });
    }

    // CMA-ES ranks, not values.
    {
        let mut rng = stream(seed, Domain::Oracle, 7, 0);
        let state = CmaState::new(4);
        let scored: Vec<(DVector<f64>, f64)> = (0..10)
            .map(|_| {
                (DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0)), rng.gen_range(-2.0..2.0))
            })
            .collect();
        let rescored: Vec<(DVector<f64>, f64)> =
            scored.iter().map(|(x, f)| (x.clone(), 2.5 * f + 7.0)).collect();
        let s1 = cmaes_step(&state, &scored);
        let s2 = cmaes_step(&state, &rescored);
        checks.push(Check {
            name: "CMA-ES rank invariance",
            pass: s1.mean == s2.mean && s1.cov == s2.cov && s1.sigma == s2.sigma,
            detail: "affine fitness rescale changes nothing".into(),
        });
    }

    // The interpolant hits its via points.
    {
        let mut rng = stream(seed, Domain::Oracle, 8, 0);
        let (n_via, n_dof) = (3, 2);
        let theta = DVector::from_fn(n_via * n_dof, |_, _| rng.gen_range(-0.5..0.5));
        let tp = TrajectoryParams::new(theta.clone(), n_via, n_dof);
        let bc = BoundaryConditions::new(
            DVector::from_fn(n_dof, |_, _| rng.gen_range(-0.5..0.5)),
            DVector::from_fn(n_dof, |_, _| rng.gen_range(-0.5..0.5)),
        );
        let t_total = 1.3;
        let mut worst = 0.0f64;
        for i in 0..n_via {
            let (q, _, _) = eval_trajectory(&tp, &bc, t_total, t_total * (i + 1) as f64 / n_via as f64);
            for d in 0..n_dof {
                worst = worst.max((q[d] - theta[i * n_dof + d]).abs());
            }
        }
        checks.push(Check {
            name: "interpolation exactness",
            pass: worst <= 1e-9,
            detail: format!("worst via-point error {worst:.2e}"),
        });
    }

    // Planning twice with one seed is bit-identical.
    {
        let scene = Scene::new(vec![EffectorShape::rect(0.02, 0.12)], 0.05);
        let bc = BoundaryConditions::at_rest(DVector::from_row_slice(&[-0.12, 0.0, 0.0]));
        let mut rng = stream(seed, Domain::Oracle, 9, 0);
        let b0 = ParticleBelief::sample_gaussian(
            &Vector2::zeros(),
            &(Matrix2::identity() * 1e-4),
            20,
            &mut rng,
        );
        let task = Task::Target { position: Vector2::new(0.1, 0.0) };
        let config = PlannerConfig {
            n_candidates: 12,
            n_iterations: 2,
            n_via: 2,
            n_steps: 10,
            noise: NoiseModel::gaussian(2.5e-5),
            seed,
            ..PlannerConfig::default()
        };
        let x = bs_vp_sto(&bc, &b0, &scene, &task, &config, 0);
        let y = bs_vp_sto(&bc, &b0, &scene, &task, &config, 0);
        checks.push(Check {
            name: "planner determinism",
            pass: match (&x, &y) {
                (Ok(a), Ok(b)) => a == b,
                _ => false,
            },
            detail: "two runs, one seed, identical candidate".into(),
        });
    }

    let mut failed = 0;
    for c in &checks {
        println!(
            "validate: {}: {} ({})",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        );
        if !c.pass {
            failed += 1;
        }
    }
    println!("validate: {}/{} checks passed", checks.len() - failed, checks.len());

    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        write_summary(
            &out.join("summary.json"),
            &json!({
                "mode": "validate",
                "seed": seed,
                "passed": checks.len() - failed,
                "failed": failed,
                "checks": checks
                    .iter()
                    .map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail }))
                    .collect::<Vec<_>>(),
            }),
        )
        .context("writing validate summary")?;
    }
    if failed == 0 {
        Ok(RunStatus::Ok)
    } else {
        Ok(RunStatus::ValidationFailure(format!("{failed} oracle checks failed")))
    }
}
