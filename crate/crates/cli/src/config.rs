//! Experiment configuration: a TOML file holding the problem, the grid and
//! path parameters of each suite, the enabled checks, a master seed and
//! the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stoplab_core::problem::ProblemSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
}

fn invalid(key: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<PathSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant: Option<InvariantSection>,
    pub checks: Checks,
}

/// The reference obstacle solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub radius: f64,
    pub spacing: Vec<f64>,
    pub time_steps: usize,
    /// Penalty level of the penalized solve.
    pub epsilon: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_delta")]
    pub delta_contact: f64,
    pub probes: Vec<Vec<f64>>,
    /// Start point of the path checks; defaults to the problem's `x0`
    /// truncated or zero-padded to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

fn default_omega() -> f64 {
    1.5
}

fn default_delta() -> f64 {
    stoplab_core::stopping::DELTA_CONTACT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub count: usize,
    /// Path steps; a multiple of `solve.time_steps`.
    pub steps: usize,
    /// Shift of the perturbed "shifted boundary" rule along the first axis.
    pub shift: f64,
    /// Lag, in field time levels, of the perturbed "lagged" rule.
    pub lag: usize,
    /// Cut times of the dynamic-programming check.
    pub sigmas: Vec<f64>,
    pub lsmc_paths: usize,
    pub lsmc_degree: u32,
    pub lsmc_stride: usize,
    pub lipschitz_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub half_width: f64,
    pub spacing: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub radii: Vec<f64>,
    pub penalties: Vec<f64>,
    pub audit: AuditSection,
}

/// One-factor sweeps of the norm audit around the reference solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub radii: Vec<f64>,
    pub penalties: Vec<f64>,
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    pub exponents: Vec<f64>,
    /// Per-axis spacing used by the dimension sweep (first `n` entries).
    pub n_spacing: Vec<f64>,
    pub n_time_steps: usize,
    pub n_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub alphas: Vec<f64>,
    pub alpha_n: usize,
    pub ns: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub galerkin_alpha: Option<f64>,
    pub paths: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantSection {
    pub n: usize,
    pub paths: usize,
    pub steps: usize,
    pub checkpoints: usize,
    pub quadrature_nodes: usize,
    pub random_fields: usize,
    pub uniqueness_radius: f64,
    pub uniqueness_spacing: Vec<f64>,
    pub uniqueness_steps: usize,
    pub uniqueness_epsilon: f64,
}

/// Toggles for each verification suite.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub obstacle: bool,
    pub value_bounds: bool,
    pub optimal_rule: bool,
    pub dynamic_programming: bool,
    pub lsmc: bool,
    pub penalty: bool,
    pub domain: bool,
    pub norm_audit: bool,
    pub ladder: bool,
    pub trace: bool,
    pub invariant: bool,
    pub trivial: bool,
}

pub const CHECK_IDS: [&str; 12] = [
    "trivial",
    "obstacle",
    "value_bounds",
    "optimal_rule",
    "dynamic_programming",
    "lsmc",
    "penalty",
    "domain",
    "norm_audit",
    "ladder",
    "trace",
    "invariant",
];

/// The checks that sweep a parameter rather than test one instance.
pub const SWEEP_IDS: [&str; 4] = ["penalty", "domain", "norm_audit", "ladder"];

impl Checks {
    pub fn get(&self, id: &str) -> Option<bool> {
        Some(match id {
            "obstacle" => self.obstacle,
            "value_bounds" => self.value_bounds,
            "optimal_rule" => self.optimal_rule,
            "dynamic_programming" => self.dynamic_programming,
            "lsmc" => self.lsmc,
            "penalty" => self.penalty,
            "domain" => self.domain,
            "norm_audit" => self.norm_audit,
            "ladder" => self.ladder,
            "trace" => self.trace,
            "invariant" => self.invariant,
            "trivial" => self.trivial,
            _ => return None,
        })
    }

    pub fn enabled(&self) -> Vec<&'static str> {
        CHECK_IDS.iter().copied().filter(|id| self.get(id) == Some(true)).collect()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            source: Box::new(e),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Start point for the path checks at solve dimension `n`.
    pub fn x0(&self, n: usize) -> Vec<f64> {
        if let Some(x) = self.solve.as_ref().and_then(|s| s.x0.clone()) {
            return x;
        }
        let mut x = self.problem.x0_head(n);
        x.resize(n, 0.0);
        x
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        self.problem
            .validate()
            .map_err(|e| invalid("problem", e.to_string()))?;
        let n_master = self.problem.n_master();
        let needs = |ids: &[&str]| ids.iter().any(|id| self.checks.get(id) == Some(true));
        let solve_checks = ["obstacle", "value_bounds", "optimal_rule", "dynamic_programming", "lsmc", "penalty", "domain", "norm_audit"];
        if needs(&solve_checks) && self.solve.is_none() {
            return Err(invalid("solve", "section required by the enabled checks"));
        }
        if let Some(s) = &self.solve {
            if s.n == 0 || s.n > 3 || s.n > n_master {
                return Err(invalid("solve.n", format!("must lie in 1..={}", n_master.min(3))));
            }
            if let Some(a) = s.alpha {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(invalid("solve.alpha", "must be positive"));
                }
            }
            if s.spacing.len() != s.n {
                return Err(invalid("solve.spacing", format!("needs {} entries", s.n)));
            }
            stoplab_core::vi::DomainSpec::with_spacing(s.radius, &s.spacing)
                .map_err(|e| invalid("solve.spacing", e.to_string()))?;
            if s.time_steps == 0 {
                return Err(invalid("solve.time_steps", "must be >= 1"));
            }
            if !(s.epsilon > 0.0) {
                return Err(invalid("solve.epsilon", "must be > 0"));
            }
            if !(s.omega > 0.0 && s.omega < 2.0) {
                return Err(invalid("solve.omega", "must lie in (0, 2)"));
            }
            if !(s.delta_contact > stoplab_core::vi::NUM_TOL) {
                return Err(invalid("solve.delta_contact", "must exceed the solver tolerance 1e-8"));
            }
            for (i, p) in s.probes.iter().enumerate() {
                let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if p.len() != s.n || r >= s.radius {
                    return Err(invalid(
                        &format!("solve.probes[{i}]"),
                        format!("must have {} coordinates and lie inside the ball of radius {}", s.n, s.radius),
                    ));
                }
            }
            let x0 = self.x0(s.n);
            if x0.len() != s.n || x0.iter().map(|v| v * v).sum::<f64>().sqrt() >= s.radius {
                return Err(invalid("solve.x0", "must have n coordinates and lie inside the ball"));
            }
        }
        let path_checks = ["optimal_rule", "dynamic_programming", "lsmc", "value_bounds"];
        if needs(&path_checks) {
            let p = self.paths.as_ref().ok_or_else(|| invalid("paths", "section required by the enabled checks"))?;
            let s = self.solve.as_ref().expect("checked above");
            if p.count == 0 || p.lsmc_paths == 0 || p.lipschitz_paths == 0 {
                return Err(invalid("paths", "path counts must be >= 1"));
            }
            if p.steps == 0 || p.steps % s.time_steps != 0 {
                return Err(invalid("paths.steps", "must be a positive multiple of solve.time_steps"));
            }
            if p.lsmc_stride == 0 || p.steps % p.lsmc_stride != 0 {
                return Err(invalid("paths.lsmc_stride", "must divide paths.steps"));
            }
            let t_end = self.problem.horizon();
            if p.sigmas.iter().any(|&s| !(0.0..=t_end).contains(&s)) {
                return Err(invalid("paths.sigmas", format!("cut times must lie in [0, {t_end}]")));
            }
        }
        if self.checks.obstacle {
            let s = self.solve.as_ref().expect("checked above");
            if s.n == 1 && self.lattice.is_none() {
                return Err(invalid("lattice", "section required for one-dimensional obstacle checks"));
            }
        }
        if needs(&["penalty", "domain", "norm_audit"]) {
            let w = self.sweeps.as_ref().ok_or_else(|| invalid("sweeps", "section required by the enabled checks"))?;
            if w.penalties.len() < 3 || !w.penalties.windows(2).all(|p| p[1] < p[0]) {
                return Err(invalid("sweeps.penalties", "needs >= 3 strictly decreasing levels"));
            }
            if w.radii.len() < 2 || !w.radii.windows(2).all(|p| p[1] > p[0]) {
                return Err(invalid("sweeps.radii", "needs >= 2 strictly increasing radii"));
            }
            let a = &w.audit;
            if a.ns.iter().any(|&n| n == 0 || n > 3 || n > n_master || n > a.n_spacing.len()) {
                return Err(invalid("sweeps.audit.ns", "dimensions must lie in 1..=3 and be covered by n_spacing"));
            }
            if a.exponents.iter().any(|&p| !(p > 1.0)) {
                return Err(invalid("sweeps.audit.exponents", "exponents must exceed 1"));
            }
        }
        if self.checks.ladder {
            let l = self.ladder.as_ref().ok_or_else(|| invalid("ladder", "section required by the ladder check"))?;
            if !l.alphas.windows(2).all(|p| p[1] > p[0]) || l.alphas.iter().any(|a| !(*a > 0.0)) {
                return Err(invalid("ladder.alphas", "must be positive and strictly increasing"));
            }
            if !l.ns.windows(2).all(|p| p[1] > p[0]) || l.ns.iter().any(|&n| n == 0 || n > n_master) {
                return Err(invalid("ladder.ns", format!("must be strictly increasing within 1..={n_master}")));
            }
            if !l.alphas.is_empty() && !self.problem.operator.is_diagonal() {
                return Err(invalid("ladder.alphas", "the Yosida study needs a diagonal operator"));
            }
            if l.alpha_n == 0 || l.alpha_n > n_master {
                return Err(invalid("ladder.alpha_n", format!("must lie in 1..={n_master}")));
            }
        }
        if self.checks.invariant {
            let i = self
                .invariant
                .as_ref()
                .ok_or_else(|| invalid("invariant", "section required by the invariant check"))?;
            if i.n == 0 || i.n > n_master || i.uniqueness_spacing.len() != i.n {
                return Err(invalid("invariant.n", "must lie in 1..=n_master and match uniqueness_spacing"));
            }
        }
        Ok(())
    }
}
