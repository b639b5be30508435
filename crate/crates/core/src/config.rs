//! Experiment configuration: one TOML file (tables or dotted keys) drives
//! every command. Every key has a default, so an empty file is valid.
//!
//! ```toml
//! seed = 7
//! field.kind = "gyre"
//! field.strength = 0.5
//! field.noise_kmh = [1.0, 1.0]
//! grid.goal = [19, 19]
//! api.k = 2
//! sim.strengths = [0.0, 0.5, 1.0, 1.5, 2.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::{load_grid_field_path, FlowField, GyreParams, NoiseParams, Point2, Rect};
use crate::mdp::{MdpParams, RewardSpec, StateSpace};
use crate::policy_iter::{ApiConfig, ImprovementSet, InitialPolicy};
use crate::simulator::{NoiseMode, SimParams};
use crate::taylor_pde::{DiffusionForm, MomentConvention};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSource {
    #[default]
    Gyre,
    /// Lattice samples read from `field.csv`.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldSource,
    /// Gyre strength `A`, km/h.
    pub strength: f64,
    pub size_km: f64,
    /// Lattice CSV, relative to the config file.
    pub csv: Option<PathBuf>,
    /// Noise standard deviations `[σx, σy]`, km/h.
    pub noise_kmh: [f64; 2],
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            kind: FieldSource::Gyre,
            strength: 0.5,
            size_km: 20.0,
            csv: None,
            noise_kmh: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub min_km: [f64; 2],
    pub width_km: f64,
    pub height_km: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            min_km: [0.0, 0.0],
            width_km: 40.0,
            height_km: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub cell_km: f64,
    /// Center of cell `(0, 0)`.
    pub origin_km: [f64; 2],
    pub obstacles: Vec<[usize; 2]>,
    pub goal: [usize; 2],
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 20,
            ny: 20,
            cell_km: 2.0,
            origin_km: [1.0, 1.0],
            obstacles: Vec::new(),
            goal: [19, 19],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpConfig {
    pub dt_h: f64,
    pub v_max_kmh: f64,
    pub gamma: f64,
    pub step_reward: f64,
    pub obstacle_reward: f64,
}

impl Default for MdpConfig {
    fn default() -> Self {
        let p = MdpParams::default();
        Self {
            dt_h: p.dt_h,
            v_max_kmh: p.v_max_kmh,
            gamma: p.gamma,
            step_reward: p.rewards.step,
            obstacle_reward: p.rewards.obstacle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiSection {
    pub k: usize,
    pub max_iterations: usize,
    pub moment_convention: MomentConvention,
    pub diffusion_form: DiffusionForm,
    pub initial_policy: InitialPolicy,
    pub greedy_iterations: usize,
    pub switch_margin: f64,
    pub no_revisit: bool,
    /// Extra improvement points `[x_km, y_km]` whose actions are reported.
    pub points: Vec<[f64; 2]>,
}

impl Default for ApiSection {
    fn default() -> Self {
        let d = ApiConfig::default();
        Self {
            k: d.k,
            max_iterations: d.max_iterations,
            moment_convention: d.moment_convention,
            diffusion_form: d.diffusion_form,
            initial_policy: d.initial_policy,
            greedy_iterations: d.greedy_iterations,
            switch_margin: d.switch_margin,
            no_revisit: d.no_revisit,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    ClassicPi,
    ApiK1,
    ApiK2,
    GoalOriented,
}

impl PlannerKind {
    pub fn label(self) -> &'static str {
        match self {
            PlannerKind::ClassicPi => "classic-pi",
            PlannerKind::ApiK1 => "api-k1",
            PlannerKind::ApiK2 => "api-k2",
            PlannerKind::GoalOriented => "goal-oriented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub start_km: [f64; 2],
    pub trials: usize,
    pub budget_h: f64,
    pub dt_h: f64,
    pub goal_radius_km: f64,
    pub noise_mode: NoiseMode,
    /// Gyre strengths swept by `simulate`; empty means just `field.strength`.
    pub strengths: Vec<f64>,
    pub planners: Vec<PlannerKind>,
    /// At `A = 0` simulate without disturbance noise (planning keeps it).
    pub noise_free_when_calm: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let p = SimParams::default();
        Self {
            start_km: [3.0, 3.0],
            trials: 10,
            budget_h: p.budget_h,
            dt_h: p.dt_sim_h,
            goal_radius_km: p.goal_radius_km,
            noise_mode: p.noise_mode,
            strengths: Vec::new(),
            planners: vec![
                PlannerKind::ClassicPi,
                PlannerKind::ApiK1,
                PlannerKind::ApiK2,
                PlannerKind::GoalOriented,
            ],
            noise_free_when_calm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MseConfig {
    /// Grid sizes `n` (an `n x n` tiling of the domain) to sweep.
    pub grid_sizes: Vec<usize>,
    pub ks: Vec<usize>,
    /// Test hook: use the classic PI values as FEM coefficients.
    pub oracle_coefficients: bool,
}

impl Default for MseConfig {
    fn default() -> Self {
        Self {
            grid_sizes: vec![10, 20, 30],
            ks: vec![1, 2],
            oracle_coefficients: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Raster samples per axis for the continuous value export.
    pub raster_resolution: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            raster_resolution: 81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub field: FieldConfig,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub mdp: MdpConfig,
    pub api: ApiSection,
    pub sim: SimConfig,
    pub mse: MseConfig,
    pub output: OutputConfig,
    /// Directory that relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            field: FieldConfig::default(),
            domain: DomainConfig::default(),
            grid: GridConfig::default(),
            mdp: MdpConfig::default(),
            api: ApiSection::default(),
            sim: SimConfig::default(),
            mse: MseConfig::default(),
            output: OutputConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

/// Line (1-based) and dotted key of the text at byte offset `at`.
fn locate(text: &str, at: usize) -> (usize, String) {
    let line_no = text[..at.min(text.len())].matches('\n').count() + 1;
    let lines: Vec<&str> = text.lines().collect();
    let line = lines.get(line_no - 1).copied().unwrap_or("");
    let key = line.split('=').next().unwrap_or("").trim();
    if key.is_empty() || key.starts_with('[') {
        return (line_no, key.to_string());
    }
    let table = lines[..line_no.saturating_sub(1).min(lines.len())]
        .iter()
        .rev()
        .map(|l| l.trim())
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim());
    match table {
        Some(t) => (line_no, format!("{t}.{key}")),
        None => (line_no, key.to_string()),
    }
}

fn check(ok: bool, field: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl ExperimentConfig {
    /// Parses and validates TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, key) = e
                .span()
                .map(|s| locate(text, s.start))
                .unwrap_or((0, String::new()));
            let field = if key.is_empty() || key.starts_with('[') {
                format!("line {line}")
            } else {
                format!("{key} (line {line})")
            };
            Error::config(field, e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.field;
        check(f.strength.is_finite(), "field.strength", "must be finite")?;
        check(positive(f.size_km), "field.size_km", "must be positive")?;
        check(
            f.noise_kmh.iter().all(|s| *s >= 0.0 && s.is_finite()),
            "field.noise_kmh",
            "standard deviations must be finite and non-negative",
        )?;
        if f.kind == FieldSource::Grid {
            check(f.csv.is_some(), "field.csv", "required when field.kind = \"grid\"")?;
        }

        let d = &self.domain;
        check(
            positive(d.width_km) && positive(d.height_km),
            "domain",
            "width_km and height_km must be positive",
        )?;

        let g = &self.grid;
        check(g.nx >= 2 && g.ny >= 2, "grid.nx", "grid needs at least 2 x 2 states")?;
        check(positive(g.cell_km), "grid.cell_km", "must be positive")?;
        check(
            g.goal[0] < g.nx && g.goal[1] < g.ny,
            "grid.goal",
            format!("({}, {}) is outside the {}x{} grid", g.goal[0], g.goal[1], g.nx, g.ny),
        )?;
        for o in &g.obstacles {
            check(
                o[0] < g.nx && o[1] < g.ny,
                "grid.obstacles",
                format!("({}, {}) is outside the grid", o[0], o[1]),
            )?;
            check(*o != g.goal, "grid.obstacles", "the goal cell cannot be an obstacle")?;
        }

        let m = &self.mdp;
        check(positive(m.dt_h), "mdp.dt_h", "must be positive")?;
        check(positive(m.v_max_kmh), "mdp.v_max_kmh", "must be positive")?;
        check((0.0..1.0).contains(&m.gamma), "mdp.gamma", "must lie in [0, 1)")?;
        check(
            m.step_reward.is_finite() && m.obstacle_reward.is_finite(),
            "mdp.step_reward",
            "rewards must be finite",
        )?;

        let a = &self.api;
        check(a.k == 1 || a.k == 2, "api.k", format!("must be 1 or 2, got {}", a.k))?;
        check(a.max_iterations >= 1, "api.max_iterations", "must be at least 1")?;
        check(
            a.switch_margin >= 0.0 && a.switch_margin.is_finite(),
            "api.switch_margin",
            "must be finite and non-negative",
        )?;

        let s = &self.sim;
        check(s.trials >= 1, "sim.trials", "must be at least 1")?;
        check(positive(s.budget_h), "sim.budget_h", "must be positive")?;
        check(positive(s.dt_h), "sim.dt_h", "must be positive")?;
        check(positive(s.goal_radius_km), "sim.goal_radius_km", "must be positive")?;
        check(
            s.strengths.iter().all(|a| a.is_finite()),
            "sim.strengths",
            "must be finite",
        )?;
        check(!s.planners.is_empty(), "sim.planners", "name at least one planner")?;

        check(
            self.mse.grid_sizes.iter().all(|&n| n >= 2),
            "mse.grid_sizes",
            "every size must be at least 2",
        )?;
        check(
            self.mse.ks.iter().all(|&k| k == 1 || k == 2),
            "mse.ks",
            "entries must be 1 or 2",
        )?;
        check(
            self.output.raster_resolution >= 2,
            "output.raster_resolution",
            "must be at least 2",
        )?;

        if f.kind == FieldSource::Gyre {
            let dom = self.domain_rect()?;
            let states = self.state_space()?;
            let (lo, hi) = states.center_bounds();
            check(
                dom.contains(lo) && dom.contains(hi),
                "grid.origin_km",
                "state centers must lie inside the domain",
            )?;
            let start = Point2::new(s.start_km[0], s.start_km[1]);
            check(dom.contains(start), "sim.start_km", "start must lie inside the domain")?;
        }
        Ok(())
    }

    pub fn domain_rect(&self) -> Result<Rect> {
        let d = &self.domain;
        Rect::new(Point2::new(d.min_km[0], d.min_km[1]), d.width_km, d.height_km)
            .map_err(|e| Error::config("domain", e.to_string()))
    }

    pub fn noise(&self) -> Result<NoiseParams> {
        NoiseParams::new(self.field.noise_kmh[0], self.field.noise_kmh[1])
            .map_err(|e| Error::config("field.noise_kmh", e.to_string()))
    }

    /// The configured field with strength `a` (ignored for lattice fields).
    pub fn flow_field_with_strength(&self, a: f64) -> Result<FlowField> {
        let noise = self.noise()?;
        match self.field.kind {
            FieldSource::Gyre => {
                let params = GyreParams::new(a, self.field.size_km)
                    .map_err(|e| Error::config("field.strength", e.to_string()))?;
                Ok(FlowField::gyre(params, noise, self.domain_rect()?))
            }
            FieldSource::Grid => {
                let rel = self.field.csv.as_ref().expect("validated");
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    self.base_dir.join(rel)
                };
                load_grid_field_path(&path, noise).map_err(|e| match e {
                    Error::Io(io) => Error::config("field.csv", format!("{}: {io}", path.display())),
                    other => other,
                })
            }
        }
    }

    pub fn flow_field(&self) -> Result<FlowField> {
        self.flow_field_with_strength(self.field.strength)
    }

    pub fn state_space(&self) -> Result<StateSpace> {
        let g = &self.grid;
        StateSpace::new(
            Point2::new(g.origin_km[0], g.origin_km[1]),
            g.cell_km,
            g.nx,
            g.ny,
            &g.obstacles.iter().map(|o| (o[0], o[1])).collect::<Vec<_>>(),
            (g.goal[0], g.goal[1]),
        )
        .map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn mdp_params(&self) -> MdpParams {
        MdpParams {
            dt_h: self.mdp.dt_h,
            v_max_kmh: self.mdp.v_max_kmh,
            gamma: self.mdp.gamma,
            rewards: RewardSpec {
                step: self.mdp.step_reward,
                obstacle: self.mdp.obstacle_reward,
            },
        }
    }

    /// Approximate-PI settings with the mesh factor `k`.
    pub fn api_config(&self, k: usize) -> ApiConfig {
        let a = &self.api;
        ApiConfig {
            k,
            max_iterations: a.max_iterations,
            improvement_set: if a.points.is_empty() {
                ImprovementSet::GridStates
            } else {
                ImprovementSet::GridStatesAndPoints(
                    a.points.iter().map(|p| Point2::new(p[0], p[1])).collect(),
                )
            },
            moment_convention: a.moment_convention,
            diffusion_form: a.diffusion_form,
            initial_policy: a.initial_policy,
            greedy_iterations: a.greedy_iterations,
            switch_margin: a.switch_margin,
            no_revisit: a.no_revisit,
        }
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            dt_sim_h: self.sim.dt_h,
            budget_h: self.sim.budget_h,
            goal_radius_km: self.sim.goal_radius_km,
            v_max_kmh: self.mdp.v_max_kmh,
            replan_h: self.mdp.dt_h,
            noise_mode: self.sim.noise_mode,
        }
    }

    pub fn start(&self) -> Point2 {
        Point2::new(self.sim.start_km[0], self.sim.start_km[1])
    }

    /// Strengths swept by `simulate`.
    pub fn strengths(&self) -> Vec<f64> {
        if self.sim.strengths.is_empty() {
            vec![self.field.strength]
        } else {
            self.sim.strengths.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.state_space().unwrap().len(), 400);
    }

    #[test]
    fn dotted_keys_and_tables_agree() {
        let dotted = "seed = 3\nfield.strength = 1.5\nfield.noise_kmh = [3.0, 3.0]\napi.k = 2\n";
        let tables = "seed = 3\n[field]\nstrength = 1.5\nnoise_kmh = [3.0, 3.0]\n[api]\nk = 2\n";
        let a = ExperimentConfig::from_toml_str(dotted).unwrap();
        let b = ExperimentConfig::from_toml_str(tables).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.api.k, 2);
        assert_eq!(a.field.strength, 1.5);
    }

    #[test]
    fn round_trip_is_identical() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.obstacles = vec![[3, 4], [10, 2]];
        cfg.sim.strengths = vec![0.0, 0.5, 1.0];
        cfg.api.points = vec![[4.5, 7.25]];
        cfg.sim.noise_mode = NoiseMode::Brownian;
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }

    #[test]
    fn invalid_k_names_the_field() {
        match ExperimentConfig::from_toml_str("[api]\nk = 3\n") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "api.k"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_and_key() {
        let err = ExperimentConfig::from_toml_str("seed = 1\n[grid]\nnx = \"twenty\"\n").unwrap_err();
        match err {
            Error::Config { field, .. } => assert!(field == "grid.nx (line 3)", "{field}"),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = ExperimentConfig::from_toml_str("[grid]\nnz = 4\n").unwrap_err();
        assert!(matches!(unknown, Error::Config { .. }));
    }

    #[test]
    fn consistency_checks() {
        for (text, field) in [
            ("grid.goal = [20, 3]", "grid.goal"),
            ("grid.obstacles = [[19, 19]]", "grid.obstacles"),
            ("mdp.gamma = 1.0", "mdp.gamma"),
            ("sim.start_km = [50.0, 1.0]", "sim.start_km"),
            ("field.kind = \"grid\"", "field.csv"),
            ("mse.ks = [1, 4]", "mse.ks"),
        ] {
            match ExperimentConfig::from_toml_str(text) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn sweep_defaults_to_field_strength() {
        let cfg = ExperimentConfig::from_toml_str("field.strength = 1.25").unwrap();
        assert_eq!(cfg.strengths(), vec![1.25]);
    }
}
