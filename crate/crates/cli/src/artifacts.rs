//! CSV and JSON artifact plumbing.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the original values bit for bit and a fixed seed
//! yields byte-identical files across runs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::Vector2;
use push_core::belief::ParticleBelief;
use push_core::dynamics::RobotCommand;
use push_core::geometry::EffectorPose;

/// commands.csv: one row per (step, effector).
pub fn write_commands_csv(path: &Path, commands: &[RobotCommand]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["step", "effector", "x", "y", "yaw"])?;
    for (step, cmd) in commands.iter().enumerate() {
        for (e, pose) in cmd.effectors.iter().enumerate() {
            w.write_record([
                step.to_string(),
                e.to_string(),
                pose.position.x.to_string(),
                pose.position.y.to_string(),
                pose.yaw.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_commands_csv`]. Steps must be contiguous from zero and
/// every step must command the same number of effectors.
pub fn read_commands_csv(path: &Path) -> Result<Vec<RobotCommand>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut commands: Vec<Vec<EffectorPose>> = Vec::new();
    for record in r.records() {
        let record = record?;
        if record.len() != 5 {
            bail!("{}: expected 5 columns, got {}", path.display(), record.len());
        }
        let step: usize = record[0].parse().context("bad step index")?;
        let effector: usize = record[1].parse().context("bad effector index")?;
        let x: f64 = record[2].parse().context("bad x")?;
        let y: f64 = record[3].parse().context("bad y")?;
        let yaw: f64 = record[4].parse().context("bad yaw")?;
        if step == commands.len() {
            commands.push(Vec::new());
        }
        if step >= commands.len() || effector != commands[step].len() {
            bail!("{}: rows out of order at step {step}", path.display());
        }
        commands[step].push(EffectorPose::new(Vector2::new(x, y), yaw));
    }
    let poses_per_step = commands.first().map(Vec::len).unwrap_or(0);
    if commands.iter().any(|c| c.len() != poses_per_step) {
        bail!("{}: inconsistent effector count across steps", path.display());
    }
    Ok(commands.into_iter().map(RobotCommand::new).collect())
}

/// belief_k.csv: the particle cloud after horizon k (k = 0 is the prior).
pub fn write_belief_csv(path: &Path, belief: &ParticleBelief) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["particle", "x", "y"])?;
    for (i, p) in belief.particles.iter().enumerate() {
        w.write_record([
            i.to_string(),
            p.position.x.to_string(),
            p.position.y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One executed step of the belief trace, as plotted and exported.
#[derive(Debug, Clone, Copy)]
pub struct GainsRow {
    pub gamma: f64,
    pub contact_fraction: f64,
    /// Belief variance after the step.
    pub variance: f64,
}

pub fn write_gains_csv(path: &Path, rows: &[GainsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["step", "gamma", "contact_fraction", "variance"])?;
    for (step, row) in rows.iter().enumerate() {
        w.write_record([
            step.to_string(),
            row.gamma.to_string(),
            row.contact_fraction.to_string(),
            row.variance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// summary.json, pretty-printed with a trailing newline.
pub fn write_summary(path: &Path, summary: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
