//! Empirical tail measures and the diversification metrics η and DB.
//!
//! The empirical TVaR at level α is the plain average of the `⌈αn⌉` largest
//! outcomes; no interpolation between order statistics.

use serde::{Deserialize, Serialize};

use crate::analytic::{self, GaussianTreeParams};
use crate::copulas::CopulaSpec;
use crate::error::{Error, Result};
use crate::hierarchy::{aggregate_mc_with, independent_baseline, standalone_sum_at_risk, AggregationOptions, TreeSpec};
use crate::marginals::MarginalSpec;

/// Slack allowed when η or DB leave `[0, 1]` through Monte-Carlo noise.
pub const UNIT_INTERVAL_SLACK: f64 = 1e-12;

/// Number of tail outcomes averaged at level α, `⌈αn⌉`. A product that is an
/// integer up to rounding is not bumped to the next integer.
pub fn tail_size(n: usize, alpha: f64) -> usize {
    let t = alpha * n as f64;
    let r = t.round();
    let count = if (t - r).abs() <= 1e-9 * r.max(1.0) { r } else { t.ceil() };
    (count as usize).clamp(1, n)
}

fn check_sample(sample: &[f64], alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if sample.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    Ok(())
}

/// Summary of the upper α-tail of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    /// Smallest outcome inside the tail.
    pub var: f64,
    pub tvar: f64,
    pub mean: f64,
    pub tail_count: usize,
    /// Asymptotic standard error of `tvar`.
    pub std_err: f64,
}

impl TailEstimate {
    pub fn xtvar(&self) -> f64 {
        self.tvar - self.mean
    }
}

pub fn tail_estimate(sample: &[f64], alpha: f64) -> Result<TailEstimate> {
    check_sample(sample, alpha)?;
    let n = sample.len();
    let t = tail_size(n, alpha);
    let mut work = sample.to_vec();
    let split = n - t;
    if split > 0 {
        work.select_nth_unstable_by(split, f64::total_cmp);
    }
    let tail = &mut work[split..];
    tail.sort_unstable_by(f64::total_cmp);
    let var = tail[0];
    let tvar = tail.iter().sum::<f64>() / t as f64;
    let mean = sample.iter().sum::<f64>() / n as f64;
    let tail_var = if t > 1 {
        tail.iter().map(|x| (x - tvar).powi(2)).sum::<f64>() / (t - 1) as f64
    } else {
        0.0
    };
    let a = t as f64 / n as f64;
    let std_err = ((tail_var + (1.0 - a) * (tvar - var).powi(2)) / t as f64).sqrt();
    Ok(TailEstimate { var, tvar, mean, tail_count: t, std_err })
}

/// Mean of the `⌈αn⌉` largest values.
pub fn empirical_tvar(sample: &[f64], alpha: f64) -> Result<f64> {
    Ok(tail_estimate(sample, alpha)?.tvar)
}

/// `empirical_tvar − sample mean`.
pub fn empirical_xtvar(sample: &[f64], alpha: f64) -> Result<f64> {
    Ok(tail_estimate(sample, alpha)?.xtvar())
}

/// Smallest of the `⌈αn⌉` largest values.
pub fn empirical_var(sample: &[f64], alpha: f64) -> Result<f64> {
    Ok(tail_estimate(sample, alpha)?.var)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diversification {
    pub eta: f64,
    pub db: f64,
    /// Both metrics lie in `[0, 1]` up to [`UNIT_INTERVAL_SLACK`].
    pub in_unit_interval: bool,
}

/// `η = (S_Z − S⁰)/(S¹ − S⁰)` and `DB = 1 − S_Z/S¹`, reported raw.
pub fn diversification(s0: f64, s_z: f64, s1: f64) -> Result<Diversification> {
    if s0.is_nan() || s1.is_nan() || s0 <= 0.0 || s1 <= s0 || !s1.is_finite() {
        return Err(Error::Degenerate(format!("need S1 > S0 > 0, got S0={s0}, S1={s1}")));
    }
    if !s_z.is_finite() {
        return Err(Error::Degenerate(format!("S_Z is not finite: {s_z}")));
    }
    let eta = (s_z - s0) / (s1 - s0);
    let db = 1.0 - s_z / s1;
    let inside = |x: f64| (-UNIT_INTERVAL_SLACK..=1.0 + UNIT_INTERVAL_SLACK).contains(&x);
    Ok(Diversification { eta, db, in_unit_interval: inside(eta) && inside(db) })
}

/// The three sums at risk with η and DB, as one flat record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub alpha: f64,
    /// `"mc"` or `"exact"`.
    pub estimator: String,
    pub n_sims: Option<usize>,
    pub seed: Option<u64>,
    pub s0: f64,
    pub s_z: f64,
    pub s1: f64,
    pub eta: f64,
    pub db: f64,
    pub in_unit_interval: bool,
    pub s0_std_err: Option<f64>,
    pub s_z_std_err: Option<f64>,
    /// Closed-form values, attached for Normal leaves with a Gaussian copula.
    pub s_z_exact: Option<f64>,
    pub eta_exact: Option<f64>,
    pub db_exact: Option<f64>,
}

/// 17 significant digits, `.` decimal separator.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

impl RiskReport {
    pub fn exact(s0: f64, s_z: f64, s1: f64, alpha: f64) -> Result<Self> {
        let d = diversification(s0, s_z, s1)?;
        Ok(RiskReport {
            alpha,
            estimator: "exact".into(),
            n_sims: None,
            seed: None,
            s0,
            s_z,
            s1,
            eta: d.eta,
            db: d.db,
            in_unit_interval: d.in_unit_interval,
            s0_std_err: None,
            s_z_std_err: None,
            s_z_exact: None,
            eta_exact: None,
            db_exact: None,
        })
    }

    pub const CSV_HEADER: &'static str =
        "alpha,estimator,n_sims,seed,S0,SZ,S1,eta,DB,in_unit_interval,S0_se,SZ_se,SZ_exact,eta_exact,DB_exact";

    pub fn csv_row(&self) -> String {
        [
            fmt17(self.alpha),
            self.estimator.clone(),
            self.n_sims.map(|n| n.to_string()).unwrap_or_default(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            fmt17(self.s0),
            fmt17(self.s_z),
            fmt17(self.s1),
            fmt17(self.eta),
            fmt17(self.db),
            self.in_unit_interval.to_string(),
            fmt_opt(self.s0_std_err),
            fmt_opt(self.s_z_std_err),
            fmt_opt(self.s_z_exact),
            fmt_opt(self.eta_exact),
            fmt_opt(self.db_exact),
        ]
        .join(",")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Closed-form parameters when the tree is a Gaussian tree with a single ρ.
pub fn gaussian_tree_params(tree: &TreeSpec, alpha: f64) -> Option<GaussianTreeParams> {
    let MarginalSpec::Normal { sd, .. } = tree.leaf else { return None };
    let rho = match tree.copula_at(0) {
        CopulaSpec::GaussianEqui { rho, .. } => *rho,
        CopulaSpec::Independence { .. } => 0.0,
        CopulaSpec::Clayton { .. } => return None,
    };
    let same_everywhere = (0..tree.m).all(|p| match tree.copula_at(p) {
        CopulaSpec::GaussianEqui { rho: r, .. } => *r == rho,
        CopulaSpec::Independence { .. } => rho == 0.0,
        CopulaSpec::Clayton { .. } => false,
    });
    if !same_everywhere {
        return None;
    }
    GaussianTreeParams::new(tree.k, tree.m, rho, sd, alpha).ok()
}

/// S¹ exactly, S⁰ from the independent baseline and S_Z from the coupled
/// simulation, both sharing the same leaf draws.
pub fn risk_report(tree: &TreeSpec, alpha: f64, n_sims: usize, seed: u64) -> Result<RiskReport> {
    let s1 = standalone_sum_at_risk(tree, alpha)?;
    let base = independent_baseline(tree, n_sims, seed)?;
    let s0 = tail_estimate(base.root(), alpha)?;
    drop(base);
    let coupled = aggregate_mc_with(tree, n_sims, seed, &AggregationOptions::root_only())?;
    let sz = tail_estimate(coupled.root(), alpha)?;
    report_from_estimates(tree, alpha, n_sims, seed, s0.xtvar(), s0.std_err, sz.xtvar(), sz.std_err, s1)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn report_from_estimates(
    tree: &TreeSpec,
    alpha: f64,
    n_sims: usize,
    seed: u64,
    s0: f64,
    s0_se: f64,
    s_z: f64,
    s_z_se: f64,
    s1: f64,
) -> Result<RiskReport> {
    let d = diversification(s0, s_z, s1)?;
    let mut report = RiskReport {
        alpha,
        estimator: "mc".into(),
        n_sims: Some(n_sims),
        seed: Some(seed),
        s0,
        s_z,
        s1,
        eta: d.eta,
        db: d.db,
        in_unit_interval: d.in_unit_interval,
        s0_std_err: Some(s0_se),
        s_z_std_err: Some(s_z_se),
        s_z_exact: None,
        eta_exact: None,
        db_exact: None,
    };
    if let Some(params) = gaussian_tree_params(tree, alpha) {
        let sums = analytic::sums_at_risk(&params)?;
        report.s_z_exact = Some(sums.s_z);
        report.eta_exact = Some(analytic::eta_gaussian(tree.k, tree.m, params.rho)?);
        report.db_exact = Some(analytic::db_gaussian(tree.k, tree.m, params.rho)?);
    }
    Ok(report)
}
