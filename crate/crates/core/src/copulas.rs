//! Copula samplers applied among the children of each aggregation node.
//!
//! * `Independence`
//! * `GaussianEqui`: k-dimensional Gaussian copula with equicorrelation matrix
//!   `Σ = I + ρ(J − I)`, valid for `−1/(k−1) < ρ < 1`.
//! * `Clayton`: k-dimensional Clayton copula with generator `(1 + t)^(−1/θ)`,
//!   sampled exactly through the Marshall–Olkin gamma frailty construction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::std_normal_cdf;
use crate::rng::{Stream, BLOCK_ROWS};

/// Uniforms are clamped to `[ε, 1 − ε]` so quantile transforms stay finite.
pub const UNIFORM_EPS: f64 = 1e-15;

/// Clayton parameters at or below this value are sampled as independence.
pub const CLAYTON_MIN_THETA: f64 = 1e-8;

/// Dependence model tying together the `k` children of a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CopulaSpec {
    Independence { k: usize },
    GaussianEqui { k: usize, rho: f64 },
    Clayton { k: usize, theta: f64 },
}

impl CopulaSpec {
    pub fn independence(k: usize) -> Result<Self> {
        let c = CopulaSpec::Independence { k };
        c.validate()?;
        Ok(c)
    }

    pub fn gaussian(k: usize, rho: f64) -> Result<Self> {
        let c = CopulaSpec::GaussianEqui { k, rho };
        c.validate()?;
        Ok(c)
    }

    pub fn clayton(k: usize, theta: f64) -> Result<Self> {
        let c = CopulaSpec::Clayton { k, theta };
        c.validate()?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        match *self {
            CopulaSpec::Independence { k }
            | CopulaSpec::GaussianEqui { k, .. }
            | CopulaSpec::Clayton { k, .. } => k,
        }
    }

    /// Same family and parameter in another dimension.
    pub fn with_dim(&self, k: usize) -> Self {
        match *self {
            CopulaSpec::Independence { .. } => CopulaSpec::Independence { k },
            CopulaSpec::GaussianEqui { rho, .. } => CopulaSpec::GaussianEqui { k, rho },
            CopulaSpec::Clayton { theta, .. } => CopulaSpec::Clayton { k, theta },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        if k < 2 {
            return Err(Error::Parameter(format!("copula dimension must be >= 2, got {k}")));
        }
        match *self {
            CopulaSpec::Independence { .. } => Ok(()),
            CopulaSpec::GaussianEqui { rho, .. } => check_equicorrelation(k, rho),
            CopulaSpec::Clayton { theta, .. } => {
                if theta > 0.0 && theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("clayton theta must be > 0 and finite, got {theta}")))
                }
            }
        }
    }

    /// True when sampling reduces to independent columns.
    pub fn is_independent(&self) -> bool {
        match *self {
            CopulaSpec::Independence { .. } => true,
            CopulaSpec::GaussianEqui { rho, .. } => rho == 0.0,
            CopulaSpec::Clayton { theta, .. } => theta <= CLAYTON_MIN_THETA,
        }
    }

    /// Column-major `k × n` draws whose column ranks equal those of a copula
    /// sample. Gaussian columns are left as normal scores since Φ is monotone.
    pub(crate) fn sample_scores(&self, n: usize, stream: &Stream) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let k = self.dim();
        let mut cols = vec![vec![0.0; n]; k];
        let n_blocks = n.div_ceil(BLOCK_ROWS);
        let sampler = BlockSampler::new(self)?;
        // Each block fills a row-major buffer that is scattered into columns.
        let blocks: Vec<Vec<f64>> = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let rows = BLOCK_ROWS.min(n - b * BLOCK_ROWS);
                let mut rng = stream.block_rng(b as u64);
                let mut buf = vec![0.0; rows * k];
                for row in buf.chunks_exact_mut(k) {
                    sampler.fill_row(&mut rng, row);
                }
                buf
            })
            .collect();
        for (b, buf) in blocks.iter().enumerate() {
            let start = b * BLOCK_ROWS;
            for (r, row) in buf.chunks_exact(k).enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    cols[c][start + r] = v;
                }
            }
        }
        Ok(cols)
    }
}

fn check_equicorrelation(k: usize, rho: f64) -> Result<()> {
    let lower = -1.0 / (k as f64 - 1.0);
    if rho > lower && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "equicorrelation rho must satisfy {lower} < rho < 1 for k={k}, got {rho}"
        )))
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = Σ` for the equicorrelation matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum EquicorrFactor {
    /// `x_i = √ρ z₀ + √(1−ρ) z_i`, used when `ρ ≥ 0`.
    OneFactor { k: usize, rho: f64 },
    /// Dense row-major Cholesky factor, used when `ρ < 0`.
    Triangular { k: usize, l: Vec<f64> },
}

impl EquicorrFactor {
    pub fn dim(&self) -> usize {
        match self {
            EquicorrFactor::OneFactor { k, .. } | EquicorrFactor::Triangular { k, .. } => *k,
        }
    }

    /// Reconstructs `L Lᵀ` as a dense row-major matrix.
    pub fn reconstruct(&self) -> Vec<f64> {
        let k = self.dim();
        let mut s = vec![0.0; k * k];
        match self {
            EquicorrFactor::OneFactor { rho, .. } => {
                let a = rho.sqrt();
                let b = (1.0 - rho).sqrt();
                for i in 0..k {
                    for j in 0..k {
                        s[i * k + j] = if i == j { a * a + b * b } else { a * a };
                    }
                }
            }
            EquicorrFactor::Triangular { l, .. } => {
                for i in 0..k {
                    for j in 0..=i {
                        let v: f64 = (0..=j).map(|p| l[i * k + p] * l[j * k + p]).sum();
                        s[i * k + j] = v;
                        s[j * k + i] = v;
                    }
                }
            }
        }
        s
    }

    /// Maps i.i.d. standard normals to a row with correlation Σ. `z` holds
    /// `k + 1` values for the one-factor form and `k` for the triangular one.
    fn apply(&self, z: &[f64], out: &mut [f64]) {
        match self {
            EquicorrFactor::OneFactor { rho, .. } => {
                let a = rho.sqrt();
                let b = (1.0 - rho).sqrt();
                for (o, zi) in out.iter_mut().zip(&z[1..]) {
                    *o = a * z[0] + b * zi;
                }
            }
            EquicorrFactor::Triangular { k, l } => {
                for i in 0..*k {
                    out[i] = (0..=i).map(|p| l[i * k + p] * z[p]).sum();
                }
            }
        }
    }
}

/// Factorisation of the k-dimensional equicorrelation matrix.
pub fn equicorr_factorization(k: usize, rho: f64) -> Result<EquicorrFactor> {
    if k < 2 {
        return Err(Error::Parameter(format!("copula dimension must be >= 2, got {k}")));
    }
    check_equicorrelation(k, rho)?;
    if rho >= 0.0 {
        return Ok(EquicorrFactor::OneFactor { k, rho });
    }
    let mut l = vec![0.0; k * k];
    for j in 0..k {
        let mut d: f64 = 1.0;
        for p in 0..j {
            d -= l[j * k + p] * l[j * k + p];
        }
        if d <= 0.0 {
            return Err(Error::Numeric(format!("equicorrelation matrix not positive definite (k={k}, rho={rho})")));
        }
        let d = d.sqrt();
        l[j * k + j] = d;
        for i in j + 1..k {
            let mut v = rho;
            for p in 0..j {
                v -= l[i * k + p] * l[j * k + p];
            }
            l[i * k + j] = v / d;
        }
    }
    Ok(EquicorrFactor::Triangular { k, l })
}

enum BlockSampler {
    Independent,
    Gaussian { factor: EquicorrFactor },
    Clayton { inv_theta: f64, frailty: Gamma<f64> },
}

impl BlockSampler {
    fn new(spec: &CopulaSpec) -> Result<Self> {
        let k = spec.dim();
        if spec.is_independent() {
            return Ok(BlockSampler::Independent);
        }
        Ok(match *spec {
            CopulaSpec::Independence { .. } => BlockSampler::Independent,
            CopulaSpec::GaussianEqui { rho, .. } => {
                BlockSampler::Gaussian { factor: equicorr_factorization(k, rho)? }
            }
            CopulaSpec::Clayton { theta, .. } => BlockSampler::Clayton {
                inv_theta: 1.0 / theta,
                frailty: Gamma::new(1.0 / theta, 1.0)
                    .map_err(|e| Error::Parameter(format!("clayton frailty: {e}")))?,
            },
        })
    }

    /// One row of scores. Independent rows are uniforms, Gaussian rows are
    /// normal scores, Clayton rows are uniforms.
    fn fill_row(&self, rng: &mut ChaCha8Rng, row: &mut [f64]) {
        match self {
            BlockSampler::Independent => {
                for v in row.iter_mut() {
                    *v = rng.gen::<f64>();
                }
            }
            BlockSampler::Gaussian { factor } => {
                let m = match factor {
                    EquicorrFactor::OneFactor { k, .. } => k + 1,
                    EquicorrFactor::Triangular { k, .. } => *k,
                };
                let mut z = [0.0f64; 64];
                if m <= z.len() {
                    for zi in z[..m].iter_mut() {
                        *zi = StandardNormal.sample(rng);
                    }
                    factor.apply(&z[..m], row);
                } else {
                    let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
                    factor.apply(&z, row);
                }
            }
            BlockSampler::Clayton { inv_theta, frailty } => {
                let v: f64 = frailty.sample(rng);
                for u in row.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *u = (-inv_theta * (e / v).ln_1p()).exp();
                }
            }
        }
    }

    fn to_uniform(&self, score: f64) -> f64 {
        match self {
            BlockSampler::Gaussian { .. } => std_normal_cdf(score),
            _ => score,
        }
    }
}

/// `n × k` block of copula uniforms, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformBlock {
    columns: Vec<Vec<f64>>,
}

impl UniformBlock {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }
}

/// Draws `n` rows from the copula; every entry lies in `[ε, 1 − ε]`.
pub fn sample_copula(spec: &CopulaSpec, n: usize, stream: &Stream) -> Result<UniformBlock> {
    if n == 0 {
        return Err(Error::Parameter("copula sample size must be >= 1".into()));
    }
    let sampler = BlockSampler::new(spec)?;
    let mut columns = spec.sample_scores(n, stream)?;
    for col in columns.iter_mut() {
        for v in col.iter_mut() {
            *v = sampler.to_uniform(*v).clamp(UNIFORM_EPS, 1.0 - UNIFORM_EPS);
        }
    }
    Ok(UniformBlock { columns })
}
