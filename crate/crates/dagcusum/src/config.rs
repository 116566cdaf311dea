//! Experiment configuration files (TOML).
//!
//! ```toml
//! [scenario]
//! theta = 1.0
//! tau = 1.0
//! b = 0.18
//! mu = 0.2                 # one value for every sensor, or a list of N values
//! attack_time = 10         # omit for attack-free runs only
//! secure_len = 1000
//! q_rounds = 10
//! alpha = 0.979
//! master_seed = 2024
//! noise = { kind = "gaussian", std_dev = 1.0 }
//!
//! [topology]
//! file = "../data/net12.toml"   # relative to this file; or inline n_sensors/edges/secure
//! weights = "squared-spectrum"  # or "best-constant"
//!
//! [experiment]
//! replications = 200
//! horizon = 400
//! output = "results.csv"
//!
//! [[detectors]]
//! kind = "gcusum"
//! h_grid = [20.0, 40.0]         # or kappa_grid = [...] for thresholds from the false-alarm bound
//! ```

use std::path::{Path, PathBuf};

use dagcusum_core::replication::uniform_matrices;
use dagcusum_core::signal::q as bit0_probability;
use dagcusum_core::topology::build_laplacian_weights_with;
use dagcusum_core::{
    threshold_for_kappa, DetectorKind, DetectorPlan, Eta3Scaling, LaplacianScaling, NetworkTopology, NoiseModel,
    ReplicationSpec, ScenarioConfig, Threshold,
};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::topology_file::TopologyFile;

/// Environment variable that redirects the output directory.
pub const OUTPUT_DIR_ENV: &str = "DAGCUSUM_OUTPUT_DIR";

/// Secure phase and replication count of the full-scale run.
pub const PAPER_SECURE_LEN: usize = 5000;
pub const PAPER_REPLICATIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Scalar(f64),
    PerSensor(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseSection {
    Gaussian {
        #[serde(default = "one")]
        std_dev: f64,
    },
    Logistic {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection::Gaussian { std_dev: 1.0 }
    }
}

impl NoiseSection {
    pub fn model(self) -> NoiseModel {
        match self {
            NoiseSection::Gaussian { std_dev } => NoiseModel::Gaussian { std_dev },
            NoiseSection::Logistic { scale } => NoiseModel::Logistic { scale },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub theta: f64,
    pub tau: f64,
    pub b: f64,
    pub mu: MuSpec,
    #[serde(default)]
    pub attack_time: Option<usize>,
    pub secure_len: usize,
    #[serde(default = "default_q_rounds")]
    pub q_rounds: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub noise: NoiseSection,
}

fn default_q_rounds() -> usize {
    10
}

fn default_alpha() -> f64 {
    0.979
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsChoice {
    #[default]
    SquaredSpectrum,
    BestConstant,
}

impl WeightsChoice {
    pub fn scaling(self) -> LaplacianScaling {
        match self {
            WeightsChoice::SquaredSpectrum => LaplacianScaling::SquaredSpectrum,
            WeightsChoice::BestConstant => LaplacianScaling::BestConstant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub n_sensors: Option<usize>,
    #[serde(default)]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub secure: Option<Vec<usize>>,
    #[serde(default)]
    pub weights: WeightsChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Eta3Choice {
    #[default]
    Local,
    TimesN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub eta3_scaling: Eta3Choice,
    #[serde(default)]
    pub collapsed_warm_up: bool,
    /// Also simulate attack-free runs for the false-alarm period.
    #[serde(default = "yes")]
    pub null_runs: bool,
    /// Directory for per-replication trace files (replication 0 only).
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
}

fn default_replications() -> usize {
    200
}

fn default_horizon() -> usize {
    500
}

fn yes() -> bool {
    true
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            replications: default_replications(),
            horizon: default_horizon(),
            output: None,
            eta3_scaling: Eta3Choice::Local,
            collapsed_warm_up: false,
            null_runs: true,
            trace_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: String,
    #[serde(default)]
    pub h_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub kappa_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub topology: TopologySection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub detectors: Vec<DetectorSection>,
}

/// Command-line adjustments applied before the plan is resolved.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paper_scale: bool,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub spec: ReplicationSpec,
    pub replications: usize,
    pub null_runs: bool,
    pub output: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn attacked_runs(&self) -> bool {
        self.spec.scenario.attack_time.is_some()
    }
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("at byte {}", s.start)).unwrap_or_default();
            HarnessError::Parse { path: origin.to_path_buf(), message: format!("{} {}", e.message(), field).trim().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(seed) = o.seed {
            self.scenario.master_seed = seed;
        }
        if o.paper_scale {
            self.scenario.secure_len = PAPER_SECURE_LEN;
            self.experiment.replications = PAPER_REPLICATIONS;
        }
    }

    pub fn noise(&self) -> NoiseModel {
        self.scenario.noise.model()
    }

    /// `q(theta)` of the configured scenario.
    pub fn q(&self) -> f64 {
        bit0_probability(&self.noise(), self.scenario.theta, self.scenario.tau)
    }

    /// Resolves the topology; relative file paths are taken from `base_dir`.
    pub fn topology(&self, base_dir: &Path) -> Result<NetworkTopology> {
        let t = &self.topology;
        match (&t.file, t.n_sensors) {
            (Some(_), Some(_)) => {
                Err(HarnessError::config("topology", "give either `file` or inline `n_sensors`/`edges`, not both"))
            }
            (Some(f), None) => {
                let path = if f.is_absolute() { f.clone() } else { base_dir.join(f) };
                crate::topology_file::load_topology(&path)
            }
            (None, Some(n)) => TopologyFile {
                n_sensors: n,
                edges: t.edges.clone().unwrap_or_default(),
                secure: t.secure.clone().unwrap_or_default(),
            }
            .to_topology(),
            (None, None) => Err(HarnessError::config("topology", "missing `file` or `n_sensors`")),
        }
    }

    fn mu(&self, n: usize) -> Result<Vec<f64>> {
        match &self.scenario.mu {
            MuSpec::Scalar(v) => Ok(vec![*v; n]),
            MuSpec::PerSensor(v) if v.len() == n => Ok(v.clone()),
            MuSpec::PerSensor(v) => {
                Err(HarnessError::config("scenario.mu", format!("expected {n} values, got {}", v.len())))
            }
        }
    }

    fn detector_plans(&self, n: usize) -> Result<Vec<DetectorPlan>> {
        if self.detectors.is_empty() {
            return Err(HarnessError::config("detectors", "at least one detector is required"));
        }
        let mut plans: Vec<DetectorPlan> = Vec::new();
        for (i, d) in self.detectors.iter().enumerate() {
            let field = |name: &str| format!("detectors[{i}].{name}");
            let kind = DetectorKind::from_name(&d.kind).ok_or_else(|| {
                HarnessError::config(
                    field("kind"),
                    format!("unknown detector `{}` (expected oracle-cusum, gcusum, alternative or dag-cusum)", d.kind),
                )
            })?;
            if plans.iter().any(|p| p.kind == kind) {
                return Err(HarnessError::config(field("kind"), format!("`{}` listed twice", d.kind)));
            }
            let h_grid = match (&d.h_grid, &d.kappa_grid) {
                (Some(h), None) => h.clone(),
                (None, Some(kappas)) => {
                    let mut h = Vec::with_capacity(kappas.len());
                    for &kappa in kappas {
                        let (v, _) = threshold_for_kappa(kappa, self.scenario.secure_len, n, self.q())?;
                        h.push(v);
                    }
                    h
                }
                _ => return Err(HarnessError::config(field("h_grid"), "give exactly one of `h_grid` or `kappa_grid`")),
            };
            if h_grid.is_empty() {
                return Err(HarnessError::config(field("h_grid"), "must not be empty"));
            }
            if h_grid.windows(2).any(|w| !(w[0] < w[1])) || h_grid.iter().any(|h| !(*h >= 0.0)) {
                return Err(HarnessError::config(field("h_grid"), "must be non-negative and strictly increasing"));
            }
            plans.push(DetectorPlan { kind, h_grid });
        }
        Ok(plans)
    }

    /// Builds and validates the full experiment plan.
    pub fn resolve(&self, base_dir: &Path) -> Result<ExperimentPlan> {
        let topology = self.topology(base_dir)?;
        let n = topology.n_sensors();
        let s = &self.scenario;
        let noise = self.noise();
        if !noise.is_valid() {
            return Err(HarnessError::config("scenario.noise", "scale must be positive and finite"));
        }
        let detectors = self.detector_plans(n)?;
        let scenario = ScenarioConfig {
            theta: s.theta,
            tau: s.tau,
            b: s.b,
            mu: self.mu(n)?,
            attack_time: s.attack_time,
            secure_len: s.secure_len,
            q_rounds: s.q_rounds,
            alpha: s.alpha,
            threshold: Threshold::H(detectors[0].h_grid[0]),
            master_seed: s.master_seed,
        };
        scenario.validate(&topology).map_err(scenario_error)?;
        let w = build_laplacian_weights_with(&topology, self.topology.weights.scaling())
            .map_err(|e| HarnessError::config("topology", e.to_string()))?;
        let e = &self.experiment;
        if e.replications == 0 {
            return Err(HarnessError::config("experiment.replications", "must be at least 1"));
        }
        if e.horizon == 0 {
            return Err(HarnessError::config("experiment.horizon", "must be at least 1"));
        }
        if !e.null_runs && s.attack_time.is_none() {
            return Err(HarnessError::config("experiment.null_runs", "nothing to simulate without attack or null runs"));
        }
        let spec = ReplicationSpec {
            topology,
            matrices: uniform_matrices(w),
            noise,
            scenario,
            detectors,
            horizon: e.horizon,
            eta3_scaling: match e.eta3_scaling {
                Eta3Choice::Local => Eta3Scaling::Local,
                Eta3Choice::TimesN => Eta3Scaling::TimesN,
            },
            collapsed_warm_up: e.collapsed_warm_up,
            record_trace: false,
        };
        spec.validate()?;
        if spec.detectors.iter().any(|d| matches!(d.kind, DetectorKind::Gcusum | DetectorKind::Alternative))
            && e.horizon > 5000
        {
            log::warn!("centralized detectors cost grows with horizon^2; horizon = {}", e.horizon);
        }
        let relative = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base_dir.join(p) };
        Ok(ExperimentPlan {
            spec,
            replications: e.replications,
            null_runs: e.null_runs,
            output: e.output.as_ref().map(relative),
            trace_dir: e.trace_dir.as_ref().map(relative),
        })
    }
}

fn scenario_error(e: dagcusum_core::Error) -> HarnessError {
    use dagcusum_core::Error as E;
    match e {
        E::AttackBelowFloor { sensor, .. } => HarnessError::config(format!("scenario.mu[{sensor}]"), e.to_string()),
        E::InvalidScenario { field, reason } => HarnessError::config(format!("scenario.{field}"), reason),
        E::DimensionMismatch { .. } => HarnessError::config("scenario.mu", e.to_string()),
        other => HarnessError::Core(other),
    }
}

/// Applies the output-directory override to a file path.
pub fn redirect_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            Path::new(&dir).join(path.file_name().unwrap_or_else(|| std::ffi::OsStr::new("results.csv")))
        }
        _ => path.to_path_buf(),
    }
}
