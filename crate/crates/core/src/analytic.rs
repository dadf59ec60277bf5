//! Closed-form solution of the regular Gaussian tree.
//!
//! With N(0, σ²) leaves and the equicorrelation Gaussian copula of parameter ρ
//! at every node, each node at level `p` is normal with
//! `σ_(p) = σ_leaf · (k + (k² − k)ρ)^((m − p)/2)`. The sums at risk are the
//! normal tail factor times the standalone, actual and independent root
//! standard deviations, so η and DB do not depend on α or σ_leaf.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginals::normal_tail_factor;

/// Checks `−1/(k−1) < ρ ≤ 1`. ρ = 1 is admitted as the comonotone limit.
fn check_rho(k: usize, rho: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::Domain(format!("branching factor k must be >= 2, got {k}")));
    }
    let lower = -1.0 / (k as f64 - 1.0);
    if rho > lower && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("rho must satisfy {lower} < rho <= 1 for k={k}, got {rho}")))
    }
}

fn check_depth(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::Domain("tree depth m must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// `b^e` for a strictly positive base.
fn pow_pos(b: f64, e: f64) -> Result<f64> {
    if b > 0.0 {
        Ok((e * b.ln()).exp())
    } else {
        Err(Error::Numeric(format!("non-positive base {b} in closed form")))
    }
}

/// Variance growth factor of one aggregation step, `k + (k² − k)ρ`.
pub fn step_factor(k: usize, rho: f64) -> f64 {
    let k = k as f64;
    k + (k * k - k) * rho
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTreeParams {
    pub k: usize,
    pub m: usize,
    pub rho: f64,
    pub sigma_leaf: f64,
    pub alpha: f64,
}

impl GaussianTreeParams {
    pub fn new(k: usize, m: usize, rho: f64, sigma_leaf: f64, alpha: f64) -> Result<Self> {
        check_rho(k, rho)?;
        check_depth(m)?;
        if !(sigma_leaf > 0.0 && sigma_leaf.is_finite()) {
            return Err(Error::Domain(format!("leaf sd must be > 0, got {sigma_leaf}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(GaussianTreeParams { k, m, rho, sigma_leaf, alpha })
    }
}

/// Standard deviation of any node at level `p`.
pub fn sigma_level(params: &GaussianTreeParams, p: usize) -> Result<f64> {
    if p > params.m {
        return Err(Error::Domain(format!("level {p} outside [0, {}]", params.m)));
    }
    let e = (params.m - p) as f64 / 2.0;
    Ok(params.sigma_leaf * pow_pos(step_factor(params.k, params.rho), e)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumsAtRisk {
    pub s0: f64,
    pub s_z: f64,
    pub s1: f64,
}

pub fn sums_at_risk(params: &GaussianTreeParams) -> Result<SumsAtRisk> {
    let f = normal_tail_factor(params.alpha)?;
    let k = params.k as f64;
    let m = params.m as f64;
    let scale = f * params.sigma_leaf;
    Ok(SumsAtRisk {
        s0: scale * k.powf(m / 2.0),
        s_z: scale * sigma_level(params, 0)? / params.sigma_leaf,
        s1: scale * k.powf(m),
    })
}

/// `DB(k, m, ρ) = 1 − (1/k + (1 − 1/k)ρ)^(m/2)`.
pub fn db_gaussian(k: usize, m: usize, rho: f64) -> Result<f64> {
    check_rho(k, rho)?;
    check_depth(m)?;
    let inv_k = 1.0 / k as f64;
    Ok(1.0 - pow_pos(inv_k + (1.0 - inv_k) * rho, m as f64 / 2.0)?)
}

/// `η(k, m, ρ) = ((k + (k² − k)ρ)^(m/2) − k^(m/2)) / (k^m − k^(m/2))`.
pub fn eta_gaussian(k: usize, m: usize, rho: f64) -> Result<f64> {
    check_rho(k, rho)?;
    check_depth(m)?;
    let half = m as f64 / 2.0;
    let kf = k as f64;
    // same pow path for every term so that ρ = 0 gives exactly 0
    let independent = pow_pos(kf, half)?;
    let comonotone = pow_pos(kf, m as f64)?;
    Ok((pow_pos(step_factor(k, rho), half)? - independent) / (comonotone - independent))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub k: usize,
    pub m: usize,
    pub db: f64,
    pub eta: f64,
}

/// Evaluates DB and η for several shapes with the same leaf count `n` and
/// returns them sorted by DB, most diversified first.
pub fn compare_shapes(n: usize, shapes: &[(usize, usize)], rho: f64) -> Result<Vec<ShapeReport>> {
    if shapes.is_empty() {
        return Err(Error::Parameter("no tree shapes given".into()));
    }
    let mut out = Vec::with_capacity(shapes.len());
    for &(k, m) in shapes {
        if (k as u128).checked_pow(m as u32) != Some(n as u128) {
            return Err(Error::Parameter(format!("shape ({k}, {m}) does not have {n} leaves")));
        }
        out.push(ShapeReport { k, m, db: db_gaussian(k, m, rho)?, eta: eta_gaussian(k, m, rho)? });
    }
    out.sort_by(|a, b| b.db.total_cmp(&a.db).then(a.k.cmp(&b.k)));
    if rho > 0.0 && rho < 1.0 {
        for w in out.windows(2) {
            if w[0].k == w[1].k {
                continue;
            }
            if !(w[0].k < w[1].k && w[0].db > w[1].db) {
                return Err(Error::Numeric(format!(
                    "thin-tree ordering violated between ({}, {}) and ({}, {})",
                    w[0].k, w[0].m, w[1].k, w[1].m
                )));
            }
        }
    }
    Ok(out)
}
