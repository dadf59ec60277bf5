//! C ABI for `riskagg`.
//!
//! Trees and covariance matrices are exposed as opaque handles created by a
//! `*_new` function and released with the matching `*_free`. Every fallible
//! call returns an [`RaStatus`] and writes its result through an out pointer;
//! the message of the last error on the calling thread is available from
//! [`ra_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use riskagg::analytic;
use riskagg::copulas::CopulaSpec;
use riskagg::covariance::{self, CovMatrix};
use riskagg::hierarchy::TreeSpec;
use riskagg::marginals::MarginalSpec;
use riskagg::riskmetrics;
use riskagg::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Parameter = 3,
    Numeric = 4,
    Resource = 5,
    Degenerate = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaMarginalKind {
    Normal = 0,
    LogNormal = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaCopulaKind {
    Independence = 0,
    Gaussian = 1,
    Clayton = 2,
}

/// Flat copy of a risk report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaRiskReport {
    pub alpha: f64,
    pub s0: f64,
    pub s_z: f64,
    pub s1: f64,
    pub eta: f64,
    pub db: f64,
    pub s0_std_err: f64,
    pub s_z_std_err: f64,
    /// 1 when η and DB lie in [0, 1].
    pub in_unit_interval: i32,
    /// 1 when the closed-form fields below are filled.
    pub has_exact: i32,
    pub eta_exact: f64,
    pub db_exact: f64,
}

/// Verification summary of a covariance matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaCiReport {
    pub max_violation: f64,
    pub checks: u64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub total_variance: f64,
    pub sigma_z_squared: f64,
}

/// Opaque aggregation tree.
pub struct RaTree(TreeSpec);

/// Opaque leaf covariance matrix.
pub struct RaCovMatrix(CovMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RaStatus {
    match err {
        Error::Domain(_) => RaStatus::Domain,
        Error::Parameter(_) | Error::Config(_) => RaStatus::Parameter,
        Error::Numeric(_) => RaStatus::Numeric,
        Error::Resource(_) => RaStatus::Resource,
        Error::Degenerate(_) => RaStatus::Degenerate,
        Error::Io(_) => RaStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> RaStatus
where
    F: FnOnce() -> Result<(), RaFailure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RaStatus::Ok,
        Ok(Err(RaFailure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            RaStatus::NullPointer
        }
        Ok(Err(RaFailure::Lib(e))) => {
            let status = status_of(&e);
            set_error(e.to_string());
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RaStatus::Internal
        }
    }
}

enum RaFailure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for RaFailure {
    fn from(e: Error) -> Self {
        RaFailure::Lib(e)
    }
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, RaFailure> {
    ptr.as_mut().ok_or(RaFailure::Null(what))
}

unsafe fn in_ref<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, RaFailure> {
    ptr.as_ref().ok_or(RaFailure::Null(what))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Diversification benefit of the Gaussian tree.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn ra_db_gaussian(k: usize, m: usize, rho: f64, out: *mut f64) -> RaStatus {
    guard(|| {
        *out_ref(out, "out")? = analytic::db_gaussian(k, m, rho)?;
        Ok(())
    })
}

/// Diversification factor η of the Gaussian tree.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn ra_eta_gaussian(k: usize, m: usize, rho: f64, out: *mut f64) -> RaStatus {
    guard(|| {
        *out_ref(out, "out")? = analytic::eta_gaussian(k, m, rho)?;
        Ok(())
    })
}

/// Standard deviation of a level-`p` node of the Gaussian tree.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn ra_sigma_level(
    k: usize,
    m: usize,
    rho: f64,
    sigma_leaf: f64,
    p: usize,
    out: *mut f64,
) -> RaStatus {
    guard(|| {
        let params = analytic::GaussianTreeParams::new(k, m, rho, sigma_leaf, 0.01)?;
        *out_ref(out, "out")? = analytic::sigma_level(&params, p)?;
        Ok(())
    })
}

/// Correlation of two leaves first joined at level `p`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn ra_effective_correlation(k: usize, m: usize, rho: f64, p: usize, out: *mut f64) -> RaStatus {
    guard(|| {
        *out_ref(out, "out")? = covariance::effective_correlation(k, m, rho, p)?;
        Ok(())
    })
}

/// Upper-tail xTVaR of a sample (`TVaR − mean`).
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn ra_empirical_xtvar(values: *const f64, len: usize, alpha: f64, out: *mut f64) -> RaStatus {
    guard(|| {
        if values.is_null() {
            return Err(RaFailure::Null("values"));
        }
        let sample = std::slice::from_raw_parts(values, len);
        *out_ref(out, "out")? = riskmetrics::empirical_xtvar(sample, alpha)?;
        Ok(())
    })
}

/// Creates a regular `(k, m)` tree.
///
/// For `RA_MARGINAL_KIND_NORMAL` the leaf parameters are mean and standard
/// deviation; for `RA_MARGINAL_KIND_LOG_NORMAL` they are the mean and standard
/// deviation of the LogNormal itself. `copula_param` is ρ or θ and is ignored
/// for independence.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to release
/// with [`ra_tree_free`].
#[no_mangle]
pub unsafe extern "C" fn ra_tree_new(
    k: usize,
    m: usize,
    marginal: RaMarginalKind,
    leaf_mean: f64,
    leaf_sd: f64,
    copula: RaCopulaKind,
    copula_param: f64,
    out: *mut *mut RaTree,
) -> RaStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let leaf = match marginal {
            RaMarginalKind::Normal => MarginalSpec::normal(leaf_mean, leaf_sd)?,
            RaMarginalKind::LogNormal => MarginalSpec::lognormal_from_moments(leaf_mean, leaf_sd)?,
        };
        let cop = match copula {
            RaCopulaKind::Independence => CopulaSpec::independence(k)?,
            RaCopulaKind::Gaussian => CopulaSpec::gaussian(k, copula_param)?,
            RaCopulaKind::Clayton => CopulaSpec::clayton(k, copula_param)?,
        };
        let tree = TreeSpec::new(k, m, leaf, cop)?;
        *slot = Box::into_raw(Box::new(RaTree(tree)));
        Ok(())
    })
}

/// Releases a tree handle. NULL is ignored.
///
/// # Safety
/// `tree` must come from [`ra_tree_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ra_tree_free(tree: *mut RaTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Number of leaves of a tree.
///
/// # Safety
/// `tree` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_tree_leaf_count(tree: *const RaTree, out: *mut usize) -> RaStatus {
    guard(|| {
        let t = in_ref(tree, "tree")?;
        *out_ref(out, "out")? = t.0.n_leaves();
        Ok(())
    })
}

/// Exact standalone sum at risk `N · xTVaR_α(leaf)`.
///
/// # Safety
/// `tree` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_tree_standalone(tree: *const RaTree, alpha: f64, out: *mut f64) -> RaStatus {
    guard(|| {
        let t = in_ref(tree, "tree")?;
        *out_ref(out, "out")? = riskagg::hierarchy::standalone_sum_at_risk(&t.0, alpha)?;
        Ok(())
    })
}

/// Simulates the tree and its independent baseline and fills `out`.
///
/// # Safety
/// `tree` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_risk_report(
    tree: *const RaTree,
    alpha: f64,
    n_sims: usize,
    seed: u64,
    out: *mut RaRiskReport,
) -> RaStatus {
    guard(|| {
        let t = in_ref(tree, "tree")?;
        let slot = out_ref(out, "out")?;
        let r = riskmetrics::risk_report(&t.0, alpha, n_sims, seed)?;
        *slot = RaRiskReport {
            alpha: r.alpha,
            s0: r.s0,
            s_z: r.s_z,
            s1: r.s1,
            eta: r.eta,
            db: r.db,
            s0_std_err: r.s0_std_err.unwrap_or(f64::NAN),
            s_z_std_err: r.s_z_std_err.unwrap_or(f64::NAN),
            in_unit_interval: r.in_unit_interval as i32,
            has_exact: r.eta_exact.is_some() as i32,
            eta_exact: r.eta_exact.unwrap_or(f64::NAN),
            db_exact: r.db_exact.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Builds the conditionally independent leaf covariance `C^(m)`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to release
/// with [`ra_cov_free`].
#[no_mangle]
pub unsafe extern "C" fn ra_cov_new(
    k: usize,
    m: usize,
    rho: f64,
    sigma_leaf: f64,
    out: *mut *mut RaCovMatrix,
) -> RaStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let c = covariance::build_ci_covariance(k, m, rho, sigma_leaf)?;
        *slot = Box::into_raw(Box::new(RaCovMatrix(c)));
        Ok(())
    })
}

/// Releases a covariance handle. NULL is ignored.
///
/// # Safety
/// `cov` must come from [`ra_cov_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ra_cov_free(cov: *mut RaCovMatrix) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// Side length `N` of the matrix.
///
/// # Safety
/// `cov` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_cov_dim(cov: *const RaCovMatrix, out: *mut usize) -> RaStatus {
    guard(|| {
        let c = in_ref(cov, "cov")?;
        *out_ref(out, "out")? = c.0.dim();
        Ok(())
    })
}

/// Entry `(i, j)`, 0-based.
///
/// # Safety
/// `cov` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_cov_get(cov: *const RaCovMatrix, i: usize, j: usize, out: *mut f64) -> RaStatus {
    guard(|| {
        let c = in_ref(cov, "cov")?;
        let n = c.0.dim();
        if i >= n || j >= n {
            return Err(Error::Domain(format!("index ({i}, {j}) outside {n}x{n} matrix")).into());
        }
        *out_ref(out, "out")? = c.0.get(i, j);
        Ok(())
    })
}

/// Copies the full row-major matrix into `buf`, which must hold `N * N` doubles.
///
/// # Safety
/// `cov` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ra_cov_copy(cov: *const RaCovMatrix, buf: *mut f64, len: usize) -> RaStatus {
    guard(|| {
        let c = in_ref(cov, "cov")?;
        if buf.is_null() {
            return Err(RaFailure::Null("buf"));
        }
        let data = c.0.as_slice();
        if len < data.len() {
            return Err(Error::Resource(format!("buffer holds {len} values, need {}", data.len())).into());
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// Runs the conditional-independence and spectrum checks.
///
/// # Safety
/// `cov` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ra_cov_verify(cov: *const RaCovMatrix, out: *mut RaCiReport) -> RaStatus {
    guard(|| {
        let c = in_ref(cov, "cov")?;
        let slot = out_ref(out, "out")?;
        let ci = covariance::verify_ci(&c.0)?;
        let (lo, hi) = c.0.eigen_extremes();
        *slot = RaCiReport {
            max_violation: ci.max_violation,
            checks: ci.checks,
            min_eigenvalue: lo,
            max_eigenvalue: hi,
            total_variance: c.0.grand_sum(),
            sigma_z_squared: c.0.sigma_z_squared(),
        };
        Ok(())
    })
}
