//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "tree": { "k": 3, "m": 6 },
//!   "marginal": { "kind": "lognormal", "mean": 670000.0, "sd": 8100000.0 },
//!   "copula": { "kind": "gaussian", "grid": [0.0, 0.2, 0.4, 1.0] },
//!   "alpha": 0.01,
//!   "n_sims": 200000,
//!   "seed": 42,
//!   "output": "lognormal_gaussian.csv",
//!   "mode": "mc",
//!   "shapes": [{ "k": 3, "m": 6 }, { "k": 729, "m": 1 }],
//!   "depths": []
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::copulas::CopulaSpec;
use crate::covariance::DEFAULT_SIZE_CAP;
use crate::error::{Error, Result};
use crate::hierarchy::TreeSpec;
use crate::marginals::MarginalSpec;

/// Gaussian grid value standing for full dependence.
pub const RHO_COMONOTONE: f64 = 1.0;
/// ρ actually simulated for the comonotone endpoint.
pub const RHO_MC_ENDPOINT: f64 = 0.999;
/// Clayton grid values at or above this stand for θ → ∞.
pub const THETA_INFINITE: f64 = 1e9;
/// θ actually simulated for the θ → ∞ endpoint.
pub const THETA_MC_ENDPOINT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub k: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKind {
    Normal,
    LogNormal,
}

/// Leaf marginal given by its first two moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalConfig {
    pub kind: MarginalKind,
    pub mean: f64,
    pub sd: f64,
}

impl MarginalConfig {
    pub fn spec(&self) -> Result<MarginalSpec> {
        match self.kind {
            MarginalKind::Normal => MarginalSpec::normal(self.mean, self.sd),
            MarginalKind::LogNormal => MarginalSpec::lognormal_from_moments(self.mean, self.sd),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaKind {
    Independence,
    Gaussian,
    Clayton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaGrid {
    pub kind: CopulaKind,
    /// ρ values (Gaussian) or θ values (Clayton). Ignored for independence.
    #[serde(default)]
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Analytic,
    Mc,
    Both,
    Covariance,
    CompareShapes,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown mode '{s}'")))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| std::fmt::Error)?;
        f.write_str(s.as_str().unwrap_or_default())
    }
}

fn default_alpha() -> f64 {
    0.01
}

fn default_n_sims() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tree: Shape,
    pub marginal: MarginalConfig,
    pub copula: CopulaGrid,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n_sims")]
    pub n_sims: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    pub mode: Mode,
    /// Tree shapes to evaluate instead of `tree`.
    #[serde(default)]
    pub shapes: Vec<Shape>,
    /// Depths to evaluate with the branching factor of `tree`.
    #[serde(default)]
    pub depths: Vec<usize>,
}

/// One evaluated copula parameter: the grid value and what is simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub value: f64,
    pub used: f64,
    pub substituted: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Shapes to evaluate: `shapes`, else `depths` with `tree.k`, else `tree`.
    pub fn shapes(&self) -> Vec<Shape> {
        if !self.shapes.is_empty() {
            self.shapes.clone()
        } else if !self.depths.is_empty() {
            self.depths.iter().map(|&m| Shape { k: self.tree.k, m }).collect()
        } else {
            vec![self.tree]
        }
    }

    /// Grid points; independence yields a single point at 0.
    pub fn grid_points(&self, monte_carlo: bool) -> Vec<GridPoint> {
        match self.copula.kind {
            CopulaKind::Independence => vec![GridPoint { value: 0.0, used: 0.0, substituted: false }],
            CopulaKind::Gaussian => self
                .copula
                .grid
                .iter()
                .map(|&v| {
                    let sub = monte_carlo && v >= RHO_COMONOTONE;
                    GridPoint { value: v, used: if sub { RHO_MC_ENDPOINT } else { v }, substituted: sub }
                })
                .collect(),
            CopulaKind::Clayton => self
                .copula
                .grid
                .iter()
                .map(|&v| {
                    let sub = v >= THETA_INFINITE;
                    GridPoint { value: v, used: if sub { THETA_MC_ENDPOINT } else { v }, substituted: sub }
                })
                .collect(),
        }
    }

    pub fn copula_spec(&self, k: usize, param: f64) -> Result<CopulaSpec> {
        match self.copula.kind {
            CopulaKind::Independence => CopulaSpec::independence(k),
            CopulaKind::Gaussian => CopulaSpec::gaussian(k, param),
            CopulaKind::Clayton => CopulaSpec::clayton(k, param),
        }
    }

    pub fn tree_spec(&self, shape: Shape, param: f64) -> Result<TreeSpec> {
        TreeSpec::new(shape.k, shape.m, self.marginal.spec()?, self.copula_spec(shape.k, param)?)
    }

    /// Field-level validation; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Err(Error::Config(format!("{name}: {msg}")));
        let check_shape = |name: String, s: &Shape| -> Result<()> {
            if s.k < 2 {
                return field(&name, format!("k must be >= 2, got {}", s.k));
            }
            if s.m < 1 {
                return field(&name, "m must be >= 1".into());
            }
            Ok(())
        };
        check_shape("tree".into(), &self.tree)?;
        for (i, s) in self.shapes.iter().enumerate() {
            check_shape(format!("shapes[{i}]"), s)?;
        }
        for (i, &m) in self.depths.iter().enumerate() {
            check_shape(format!("depths[{i}]"), &Shape { k: self.tree.k, m })?;
        }
        if let Err(e) = self.marginal.spec() {
            return field("marginal", e.to_string());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return field("alpha", format!("must lie in (0,1), got {}", self.alpha));
        }
        let monte_carlo = matches!(self.mode, Mode::Mc | Mode::Both);
        if monte_carlo && self.n_sims < 2 {
            return field("n_sims", format!("must be >= 2, got {}", self.n_sims));
        }
        if self.copula.kind != CopulaKind::Independence && self.copula.grid.is_empty() {
            return field("copula.grid", "must contain at least one value".into());
        }
        for (i, &v) in self.copula.grid.iter().enumerate() {
            let name = format!("copula.grid[{i}]");
            match self.copula.kind {
                CopulaKind::Independence => {}
                CopulaKind::Gaussian => {
                    for s in self.shapes() {
                        let lower = -1.0 / (s.k as f64 - 1.0);
                        if !(v > lower && v <= 1.0) {
                            return field(&name, format!("rho={v} outside ({lower}, 1] for k={}", s.k));
                        }
                    }
                }
                CopulaKind::Clayton => {
                    if !(v > 0.0 && v.is_finite()) {
                        return field(&name, format!("theta={v} must be > 0"));
                    }
                }
            }
        }

        let gaussian_tree = self.marginal.kind == MarginalKind::Normal && self.copula.kind != CopulaKind::Clayton;
        match self.mode {
            Mode::Analytic | Mode::Both | Mode::CompareShapes if !gaussian_tree => {
                return field("mode", format!("'{}' needs a normal marginal and a gaussian copula", self.mode));
            }
            Mode::Covariance => {
                if !gaussian_tree {
                    return field("mode", "'covariance' needs a normal marginal and a gaussian copula".into());
                }
                if self.copula.kind == CopulaKind::Gaussian && self.copula.grid.iter().any(|&r| r >= 1.0) {
                    return field("copula.grid", "covariance mode needs rho < 1".into());
                }
                let n = self.tree.k.checked_pow(self.tree.m as u32);
                if n.is_none_or(|n| n > DEFAULT_SIZE_CAP) {
                    return Err(Error::Resource(format!(
                        "tree: ({}, {}) exceeds the {DEFAULT_SIZE_CAP}-leaf covariance cap",
                        self.tree.k, self.tree.m
                    )));
                }
            }
            Mode::CompareShapes => {
                if self.shapes.is_empty() {
                    return field("shapes", "compare-shapes needs at least one shape".into());
                }
                let n = (self.tree.k as u128).checked_pow(self.tree.m as u32);
                for (i, s) in self.shapes.iter().enumerate() {
                    if (s.k as u128).checked_pow(s.m as u32) != n {
                        return field(
                            &format!("shapes[{i}]"),
                            format!("({}, {}) does not have the {}^{} leaves of tree", s.k, s.m, self.tree.k, self.tree.m),
                        );
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}
