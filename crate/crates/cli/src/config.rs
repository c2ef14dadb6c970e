//! Scenario configuration: one TOML file describing the scene, the initial
//! belief, the noise model, the task, and the planner settings.
//!
//! Every section has complete defaults, so an empty file is a valid scenario.
//! Fields that only apply to one `kind` are optional and validated against
//! the selected kind; unknown keys are rejected at parse time. Seeds are
//! always explicit: nothing in this crate reads a clock or OS entropy.

use anyhow::{bail, Context, Result};
use nalgebra::{DVector, Matrix2, Vector2};
use push_core::belief::ParticleBelief;
use push_core::dynamics::{NoiseModel, ObjectState, Scene};
use push_core::geometry::EffectorShape;
use push_core::optimizer::{CirclePath, PlannerConfig, Task};
use push_core::receding::HorizonConfig;
use push_core::rng::{stream, Domain};
use push_core::trajectory::BoundaryConditions;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub robot: RobotConfig,
    pub belief: BeliefConfig,
    pub noise: NoiseConfig,
    pub task: TaskConfig,
    pub planner: PlannerSection,
    pub mpc: MpcConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub object_radius: f64,
    pub effectors: Vec<EffectorConfig>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            object_radius: 0.05,
            effectors: vec![EffectorConfig {
                kind: ShapeKind::Rect,
                radius: None,
                half_width: Some(0.02),
                half_height: Some(0.15),
            }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Rect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectorConfig {
    pub kind: ShapeKind,
    /// Circle effectors only.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Rect effectors only: half-extents of the hand.
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub half_height: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    /// Flat initial configuration, effector-major: (x, y[, yaw]) per effector.
    pub initial_config: Vec<f64>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self { initial_config: vec![-0.15, 0.05, 0.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefKind {
    Gaussian,
    Uniform,
    Point,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeliefConfig {
    pub kind: BeliefKind,
    pub mean: [f64; 2],
    /// Gaussian: per-axis standard deviations (diagonal covariance).
    pub std: Option<[f64; 2]>,
    /// Gaussian: full covariance; mutually exclusive with `std`.
    pub cov: Option<[[f64; 2]; 2]>,
    /// Uniform box corners.
    pub low: Option<[f64; 2]>,
    pub high: Option<[f64; 2]>,
    pub n_particles: usize,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        Self {
            kind: BeliefKind::Gaussian,
            mean: [0.0, 0.0],
            std: Some([0.01, 0.01]),
            cov: None,
            low: None,
            high: None,
            n_particles: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    UniformTangential,
    UniformForward,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub family: NoiseKind,
    /// Trace variance per contact event (gaussian / uniform_tangential).
    pub variance: f64,
    /// Support width (uniform_forward only).
    pub alpha: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { family: NoiseKind::Gaussian, variance: 1e-4, alpha: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Target,
    Path,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Target tasks only.
    pub position: Option<[f64; 2]>,
    /// Path tasks only.
    pub center: [f64; 2],
    pub radius: f64,
    /// Success radius: distance to target, or radial path error at full lap.
    pub tolerance: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Path,
            position: None,
            center: [0.0, 0.0],
            radius: 0.15,
            tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    /// CMA-ES generations per horizon (M).
    pub iterations: usize,
    /// Candidates per generation.
    pub candidates: usize,
    /// Via-points per candidate (N).
    pub via_points: usize,
    /// Discretization steps per horizon (K).
    pub steps: usize,
    /// Steps executed before re-planning (H).
    pub execute_steps: usize,
    /// Outer receding-horizon iteration cap.
    pub max_horizons: usize,
    pub w_progress: f64,
    pub w_error: f64,
    /// Score candidates with the robustness barrier.
    pub robust: bool,
    /// Blend the contact-seeking prior into the sampling distribution.
    pub contact_prior: bool,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            iterations: 4,
            candidates: 30,
            via_points: 3,
            steps: 20,
            execute_steps: 4,
            max_horizons: 50,
            w_progress: 100.0,
            w_error: 2000.0,
            robust: true,
            contact_prior: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    /// Control cycles before the closed-loop run gives up.
    pub max_cycles: usize,
    /// Std of the simulated position observation, per axis.
    pub obs_std: f64,
    /// Cycle at which the object is kicked, if any.
    pub perturb_at_cycle: Option<usize>,
    pub perturb_offset: [f64; 2],
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self { max_cycles: 30, obs_std: 0.005, perturb_at_cycle: None, perturb_offset: [0.0, 0.0] }
    }
}

impl ScenarioConfig {
    /// Parse and validate a scenario file. Parse errors keep the TOML line
    /// and column; semantic errors name the offending key.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: Self = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene.object_radius <= 0.0 {
            bail!("scene.object_radius must be positive");
        }
        if self.scene.effectors.is_empty() {
            bail!("scene.effectors must list at least one effector");
        }
        for (i, e) in self.scene.effectors.iter().enumerate() {
            match e.kind {
                ShapeKind::Circle => {
                    let r = e
                        .radius
                        .with_context(|| format!("scene.effectors[{i}]: circle needs radius"))?;
                    if r <= 0.0 {
                        bail!("scene.effectors[{i}].radius must be positive");
                    }
                    if e.half_width.is_some() || e.half_height.is_some() {
                        bail!("scene.effectors[{i}]: half extents are for rect effectors");
                    }
                }
                ShapeKind::Rect => {
                    let hx = e.half_width.with_context(|| {
                        format!("scene.effectors[{i}]: rect needs half_width")
                    })?;
                    let hy = e.half_height.with_context(|| {
                        format!("scene.effectors[{i}]: rect needs half_height")
                    })?;
                    if hx <= 0.0 || hy <= 0.0 {
                        bail!("scene.effectors[{i}]: half extents must be positive");
                    }
                    if e.radius.is_some() {
                        bail!("scene.effectors[{i}]: radius is for circle effectors");
                    }
                }
            }
        }

        let dof: usize = self
            .scene
            .effectors
            .iter()
            .map(|e| if e.kind == ShapeKind::Rect { 3 } else { 2 })
            .sum();
        if self.robot.initial_config.len() != dof {
            bail!(
                "robot.initial_config has {} entries but the scene has {dof} degrees of freedom",
                self.robot.initial_config.len()
            );
        }

        match self.belief.kind {
            BeliefKind::Gaussian => match (&self.belief.std, &self.belief.cov) {
                (Some(s), None) => {
                    if s.iter().any(|v| *v < 0.0) {
                        bail!("belief.std entries must be non-negative");
                    }
                }
                (None, Some(c)) => {
                    if (c[0][1] - c[1][0]).abs() > 1e-12 {
                        bail!("belief.cov must be symmetric");
                    }
                }
                (Some(_), Some(_)) => bail!("belief: give std or cov, not both"),
                (None, None) => bail!("belief: gaussian needs std or cov"),
            },
            BeliefKind::Uniform => {
                let low = self.belief.low.context("belief: uniform needs low")?;
                let high = self.belief.high.context("belief: uniform needs high")?;
                if low[0] >= high[0] || low[1] >= high[1] {
                    bail!("belief: uniform box needs low < high per axis");
                }
            }
            BeliefKind::Point => {}
        }
        if self.belief.n_particles == 0 {
            bail!("belief.n_particles must be at least 1");
        }

        match self.noise.family {
            NoiseKind::UniformForward => {
                let a = self.noise.alpha.context("noise: uniform_forward needs alpha")?;
                if a <= 0.0 {
                    bail!("noise.alpha must be positive");
                }
            }
            _ => {
                if self.noise.variance < 0.0 {
                    bail!("noise.variance must be non-negative");
                }
            }
        }

        match self.task.kind {
            TaskKind::Target => {
                self.task.position.context("task: target needs position")?;
            }
            TaskKind::Path => {
                if self.task.radius <= 0.0 {
                    bail!("task.radius must be positive");
                }
            }
        }
        if self.task.tolerance <= 0.0 {
            bail!("task.tolerance must be positive");
        }

        let p = &self.planner;
        if p.iterations == 0 || p.candidates == 0 || p.via_points == 0 || p.steps == 0 {
            bail!("planner counts must all be at least 1");
        }
        if p.execute_steps == 0 || p.execute_steps > p.steps {
            bail!("planner.execute_steps must be in 1..=planner.steps");
        }
        if p.max_horizons == 0 {
            bail!("planner.max_horizons must be at least 1");
        }

        if self.mpc.max_cycles == 0 {
            bail!("mpc.max_cycles must be at least 1");
        }
        if self.mpc.obs_std <= 0.0 {
            bail!("mpc.obs_std must be positive");
        }
        Ok(())
    }

    pub fn scene(&self) -> Scene {
        let shapes = self
            .scene
            .effectors
            .iter()
            .map(|e| match e.kind {
                ShapeKind::Circle => EffectorShape::circle(e.radius.unwrap()),
                ShapeKind::Rect => {
                    EffectorShape::rect(e.half_width.unwrap(), e.half_height.unwrap())
                }
            })
            .collect();
        Scene::new(shapes, self.scene.object_radius)
    }

    pub fn boundary_conditions(&self) -> BoundaryConditions {
        BoundaryConditions::at_rest(DVector::from_row_slice(&self.robot.initial_config))
    }

    /// Sample the initial belief. Deterministic in `seed`.
    pub fn belief(&self, seed: u64) -> ParticleBelief {
        let mean = Vector2::new(self.belief.mean[0], self.belief.mean[1]);
        let mut rng = stream(seed, Domain::Belief, 0, 0);
        match self.belief.kind {
            BeliefKind::Gaussian => {
                let cov = self.belief_cov();
                ParticleBelief::sample_gaussian(&mean, &cov, self.belief.n_particles, &mut rng)
            }
            BeliefKind::Uniform => {
                let low = self.belief.low.unwrap();
                let high = self.belief.high.unwrap();
                let particles = (0..self.belief.n_particles)
                    .map(|_| {
                        ObjectState::new(
                            rng.gen_range(low[0]..high[0]),
                            rng.gen_range(low[1]..high[1]),
                        )
                    })
                    .collect();
                ParticleBelief::equal_weights(particles)
            }
            BeliefKind::Point => ParticleBelief::point(mean),
        }
    }

    fn belief_cov(&self) -> Matrix2<f64> {
        match (&self.belief.std, &self.belief.cov) {
            (Some(s), None) => Matrix2::new(s[0] * s[0], 0.0, 0.0, s[1] * s[1]),
            (None, Some(c)) => Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]),
            _ => Matrix2::zeros(),
        }
    }

    /// The nominal object position: the belief mean (box midpoint for the
    /// uniform family). Evaluation measures path success against the
    /// noise-free replay from this point.
    pub fn nominal_object(&self) -> Vector2<f64> {
        match self.belief.kind {
            BeliefKind::Uniform => {
                let low = self.belief.low.unwrap();
                let high = self.belief.high.unwrap();
                Vector2::new(0.5 * (low[0] + high[0]), 0.5 * (low[1] + high[1]))
            }
            _ => Vector2::new(self.belief.mean[0], self.belief.mean[1]),
        }
    }

    pub fn noise(&self) -> NoiseModel {
        match self.noise.family {
            NoiseKind::Gaussian => NoiseModel::gaussian(self.noise.variance),
            NoiseKind::UniformTangential => NoiseModel::uniform_tangential(self.noise.variance),
            NoiseKind::UniformForward => NoiseModel::uniform_forward(self.noise.alpha.unwrap()),
        }
    }

    pub fn task(&self) -> Task {
        match self.task.kind {
            TaskKind::Target => {
                let p = self.task.position.unwrap();
                Task::Target { position: Vector2::new(p[0], p[1]) }
            }
            TaskKind::Path => Task::Path(CirclePath::new(
                Vector2::new(self.task.center[0], self.task.center[1]),
                self.task.radius,
            )),
        }
    }

    pub fn planner_config(&self, seed: u64) -> PlannerConfig {
        PlannerConfig {
            n_candidates: self.planner.candidates,
            n_iterations: self.planner.iterations,
            n_via: self.planner.via_points,
            n_steps: self.planner.steps,
            noise: self.noise(),
            w_progress: self.planner.w_progress,
            w_error: self.planner.w_error,
            use_contact_prior: self.planner.contact_prior,
            robust: self.planner.robust,
            seed,
            ..PlannerConfig::default()
        }
    }

    pub fn horizon_config(&self) -> HorizonConfig {
        HorizonConfig {
            execute_steps: self.planner.execute_steps,
            tolerance: self.task.tolerance,
            max_outer: self.planner.max_horizons,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_scenario() {
        let parsed: ScenarioConfig = toml::from_str("").unwrap();
        parsed.validate().unwrap();
        assert_eq!(parsed.belief.n_particles, 20);
        assert_eq!(parsed.planner.candidates, 30);
    }

    #[test]
    fn reference_constants_are_pinned() {
        let c = ScenarioConfig::default();
        assert_eq!(c.belief.n_particles, 20);
        assert_eq!(c.planner.candidates, 30);
        assert_eq!(c.task.radius, 0.15);
        assert_eq!(c.planner.w_progress, 100.0);
        assert_eq!(c.planner.w_error, 2000.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ScenarioConfig>("[planner]\nwarp_drive = 9\n").unwrap_err();
        assert!(err.to_string().contains("warp_drive"));
    }

    #[test]
    fn kind_specific_fields_are_enforced() {
        let mut c = ScenarioConfig::default();
        c.task.kind = TaskKind::Target;
        c.task.position = None;
        assert!(c.validate().is_err());

        let mut c = ScenarioConfig::default();
        c.scene.effectors[0].kind = ShapeKind::Circle;
        assert!(c.validate().is_err(), "circle without radius must fail");

        let mut c = ScenarioConfig::default();
        c.robot.initial_config = vec![0.0, 0.0];
        assert!(c.validate().is_err(), "dof mismatch must fail");
    }
}
