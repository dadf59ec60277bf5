//! Leaf covariance of the conditionally independent Gaussian tree.
//!
//! The matrix is built by the block recurrence: the `k^d × k^d` correlation
//! matrix at depth `d` has the depth `d − 1` matrix on its diagonal blocks and
//! `β_{d−1} = ρ(1/k + (1 − 1/k)ρ)^{d−1}` everywhere else. A second, per-entry
//! route through [`effective_correlation`] is kept for cross-checking.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hierarchy::{NodeId, ScenarioSet};
use crate::riskmetrics::fmt17;
use crate::rng::{Purpose, Stream, BLOCK_ROWS};

/// Largest leaf count built densely unless a larger cap is requested.
pub const DEFAULT_SIZE_CAP: usize = 4096;
/// Relative tolerance for negative eigenvalues and Cholesky pivots.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Pivots below this are treated as exact zeros by [`cholesky_psd`].
pub const PIVOT_FLOOR: f64 = 1e-12;

fn check_params(k: usize, rho: f64, sigma_leaf: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::Parameter(format!("branching factor k must be >= 2, got {k}")));
    }
    let lower = -1.0 / (k as f64 - 1.0);
    if !(rho > lower && rho < 1.0) {
        return Err(Error::Parameter(format!("rho must satisfy {lower} < rho < 1 for k={k}, got {rho}")));
    }
    if !(sigma_leaf > 0.0 && sigma_leaf.is_finite()) {
        return Err(Error::Parameter(format!("leaf sd must be > 0, got {sigma_leaf}")));
    }
    Ok(())
}

/// Correlation between two leaves whose first common ancestor sits at level `p`.
pub fn effective_correlation(k: usize, m: usize, rho: f64, p: usize) -> Result<f64> {
    check_params(k, rho, 1.0)?;
    if m == 0 || p > m - 1 {
        return Err(Error::Domain(format!("ancestor level {p} outside [0, m-1] for m={m}")));
    }
    let a = 1.0 / k as f64 + (1.0 - 1.0 / k as f64) * rho;
    Ok(rho * a.powi((m - p - 1) as i32))
}

/// Level of the first common ancestor of leaves `i` and `j` (0-based indices).
pub fn common_ancestor_level(k: usize, m: usize, i: usize, j: usize) -> usize {
    let (mut a, mut b, mut up) = (i, j, 0);
    while a != b {
        a /= k;
        b /= k;
        up += 1;
    }
    m - up
}

/// Dense symmetric `N × N` leaf covariance, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix {
    pub k: usize,
    pub m: usize,
    pub rho: f64,
    pub sigma_leaf: f64,
    n: usize,
    data: Vec<f64>,
}

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Variance of the sum of all leaves.
    pub fn grand_sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `σ_leaf² (k + (k² − k)ρ)^m`.
    pub fn sigma_z_squared(&self) -> f64 {
        let k = self.k as f64;
        self.sigma_leaf * self.sigma_leaf * (k + (k * k - k) * self.rho).powi(self.m as i32)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_extremes(&self) -> (f64, f64) {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.data);
        let eig = SymmetricEigen::new(m);
        let ev = eig.eigenvalues;
        (ev.min(), ev.max())
    }

    pub fn is_psd(&self) -> bool {
        let (lo, hi) = self.eigen_extremes();
        lo >= -PSD_TOLERANCE * hi.abs().max(f64::MIN_POSITIVE)
    }

    /// Full matrix, one row per line, 17 significant digits, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 24);
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|&v| fmt17(v)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Builds `C^(m)` by the block recurrence with the default size cap.
pub fn build_ci_covariance(k: usize, m: usize, rho: f64, sigma_leaf: f64) -> Result<CovMatrix> {
    build_ci_covariance_capped(k, m, rho, sigma_leaf, DEFAULT_SIZE_CAP)
}

pub fn build_ci_covariance_capped(k: usize, m: usize, rho: f64, sigma_leaf: f64, cap: usize) -> Result<CovMatrix> {
    check_params(k, rho, sigma_leaf)?;
    let n = match k.checked_pow(m as u32) {
        Some(n) if n <= cap => n,
        _ => {
            return Err(Error::Resource(format!("tree ({k}, {m}) has more than {cap} leaves")));
        }
    };
    let var = sigma_leaf * sigma_leaf;
    if m == 0 {
        return Ok(CovMatrix { k, m, rho, sigma_leaf, n: 1, data: vec![var] });
    }
    let a = 1.0 / k as f64 + (1.0 - 1.0 / k as f64) * rho;

    // depth-1 equicorrelation block
    let mut size = k;
    let mut corr: Vec<f64> = (0..k * k).map(|e| if e / k == e % k { 1.0 } else { rho }).collect();
    for d in 2..=m {
        let beta = rho * a.powi(d as i32 - 1);
        let sub = size;
        size *= k;
        let mut next = vec![beta; size * size];
        for blk in 0..k {
            let off = blk * sub;
            for r in 0..sub {
                let dst = (off + r) * size + off;
                next[dst..dst + sub].copy_from_slice(&corr[r * sub..(r + 1) * sub]);
            }
        }
        corr = next;
    }
    let data = corr.into_iter().map(|c| c * var).collect();
    Ok(CovMatrix { k, m, rho, sigma_leaf, n, data })
}

/// Same matrix assembled entry by entry from [`effective_correlation`].
pub fn covariance_from_effective_correlations(k: usize, m: usize, rho: f64, sigma_leaf: f64) -> Result<CovMatrix> {
    check_params(k, rho, sigma_leaf)?;
    let n = k
        .checked_pow(m as u32)
        .filter(|&n| n <= DEFAULT_SIZE_CAP)
        .ok_or_else(|| Error::Resource(format!("tree ({k}, {m}) too large")))?;
    let var = sigma_leaf * sigma_leaf;
    let by_level: Vec<f64> = (0..m).map(|p| effective_correlation(k, m, rho, p)).collect::<Result<_>>()?;
    let mut data = vec![var; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                data[i * n + j] = var * by_level[common_ancestor_level(k, m, i, j)];
            }
        }
    }
    Ok(CovMatrix { k, m, rho, sigma_leaf, n, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub max_violation: f64,
    pub checks: u64,
}

/// Checks every conditional-independence statement of the tree.
///
/// For each internal non-root node `W` with leaf set `J`, every leaf `i ∈ J`
/// and every leaf `j ∉ J` must satisfy `C_ij = C_iJ · C_jJ / C_JJ`, the
/// vanishing of their covariance conditional on the sum over `J`.
pub fn verify_ci(c: &CovMatrix) -> Result<CiReport> {
    let n = c.dim();
    let k = c.k;
    let mut max_violation: f64 = 0.0;
    let mut checks = 0u64;
    for level in 1..c.m {
        let width = k.pow((c.m - level) as u32);
        for start in (0..n).step_by(width) {
            let block = start..start + width;
            let to_block: Vec<f64> = (0..n).map(|i| c.row(i)[block.clone()].iter().sum()).collect();
            let within: f64 = block.clone().map(|i| to_block[i]).sum();
            if within.is_nan() || within <= 0.0 {
                return Err(Error::Numeric(format!(
                    "node at level {level} starting at leaf {start} has variance {within}"
                )));
            }
            for i in block.clone() {
                for j in (0..n).filter(|j| !block.contains(j)) {
                    let v = (c.get(i, j) - to_block[i] * to_block[j] / within).abs();
                    max_violation = max_violation.max(v);
                    checks += 1;
                }
            }
        }
    }
    Ok(CiReport { max_violation, checks })
}

/// Lower-triangular `L` (row-major) with `L Lᵀ = C` for a PSD matrix. Pivots
/// under [`PIVOT_FLOOR`] × the largest diagonal entry are zeroed; clearly
/// negative pivots are an error.
pub fn cholesky_psd(c: &CovMatrix) -> Result<Vec<f64>> {
    let n = c.dim();
    let scale = (0..n).map(|i| c.get(i, i)).fold(0.0, f64::max);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = c.get(j, j);
        for p in 0..j {
            d -= l[j * n + p] * l[j * n + p];
        }
        if d < -PSD_TOLERANCE * scale {
            return Err(Error::Numeric(format!("matrix is not positive semidefinite (pivot {j} = {d})")));
        }
        if d <= PIVOT_FLOOR * scale {
            continue;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut v = c.get(i, j);
            for p in 0..j {
                v -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = v / d;
        }
    }
    Ok(l)
}

/// `n` i.i.d. draws from `N(0, C)`, returned as the leaf level of a scenario set.
pub fn sample_joint(c: &CovMatrix, n: usize, seed: u64) -> Result<ScenarioSet> {
    if n < 2 {
        return Err(Error::Parameter(format!("sample size must be >= 2, got {n}")));
    }
    let l = cholesky_psd(c)?;
    let dim = c.dim();
    let stream = Stream::new(seed, Purpose::Joint, dim as u64, 0);
    let blocks: Vec<Vec<f64>> = (0..n.div_ceil(BLOCK_ROWS))
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK_ROWS.min(n - b * BLOCK_ROWS);
            let mut rng = stream.block_rng(b as u64);
            let mut z = vec![0.0; dim];
            let mut buf = vec![0.0; rows * dim];
            for row in buf.chunks_exact_mut(dim) {
                z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                for (i, out) in row.iter_mut().enumerate() {
                    *out = l[i * dim..i * dim + i + 1].iter().zip(&z).map(|(a, b)| a * b).sum();
                }
            }
            buf
        })
        .collect();
    let mut leaves = vec![vec![0.0; n]; dim];
    for (b, buf) in blocks.iter().enumerate() {
        for (r, row) in buf.chunks_exact(dim).enumerate() {
            for (i, &v) in row.iter().enumerate() {
                leaves[i][b * BLOCK_ROWS + r] = v;
            }
        }
    }
    let nodes: BTreeMap<NodeId, Vec<f64>> =
        leaves.into_iter().enumerate().map(|(i, v)| (NodeId::new(c.m, i + 1), v)).collect();
    Ok(ScenarioSet::from_nodes(seed, n, nodes))
}
