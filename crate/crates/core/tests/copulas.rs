mod common;

use common::{kendall_tau_brute, ks_uniform, pearson, spearman};
use riskagg::copulas::{equicorr_factorization, sample_copula, UNIFORM_EPS};
use riskagg::marginals::std_normal_quantile;
use riskagg::rng::{Purpose, Stream};
use riskagg::CopulaSpec;

fn stream(tag: u64) -> Stream {
    Stream::new(99, Purpose::User, tag, 0)
}

#[test]
fn margins_are_uniform() {
    let n = 100_000;
    let bound = 1.63 / (n as f64).sqrt(); // 1% critical value of the one-sample KS test
    for (tag, spec) in [
        CopulaSpec::independence(3).unwrap(),
        CopulaSpec::gaussian(4, 0.6).unwrap(),
        CopulaSpec::gaussian(3, -0.3).unwrap(),
        CopulaSpec::clayton(3, 0.7).unwrap(),
        CopulaSpec::clayton(5, 8.0).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let block = sample_copula(&spec, n, &stream(tag as u64)).unwrap();
        assert_eq!(block.n_rows(), n);
        assert_eq!(block.n_cols(), spec.dim());
        for c in 0..block.n_cols() {
            let col = block.column(c);
            assert!(col.iter().all(|&u| (UNIFORM_EPS..=1.0 - UNIFORM_EPS).contains(&u)));
            let d = ks_uniform(col);
            assert!(d < bound, "{spec:?} column {c}: D={d}");
        }
    }
}

#[test]
fn gaussian_score_correlation() {
    let n = 400_000;
    for (k, rho) in [(2, 0.4), (3, -0.2), (5, 0.8)] {
        let block = sample_copula(&CopulaSpec::gaussian(k, rho).unwrap(), n, &stream(10 + k as u64)).unwrap();
        let z: Vec<Vec<f64>> =
            block.columns().iter().map(|c| c.iter().map(|&u| std_normal_quantile(u).unwrap()).collect()).collect();
        for i in 0..k {
            for j in i + 1..k {
                let r = pearson(&z[i], &z[j]);
                // standard error of a correlation is about (1 − ρ²)/√n
                assert!((r - rho).abs() < 5.0 * (1.0 - rho * rho) / (n as f64).sqrt() + 1e-4, "k={k} ({i},{j}) r={r}");
            }
        }
    }
}

#[test]
fn clayton_kendall_tau() {
    for (tag, theta) in [0.3, 1.0, 4.0].into_iter().enumerate() {
        let block = sample_copula(&CopulaSpec::clayton(3, theta).unwrap(), 6_000, &stream(20 + tag as u64)).unwrap();
        let want = theta / (theta + 2.0);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let tau = kendall_tau_brute(block.column(i), block.column(j));
            assert!((tau - want).abs() < 0.02, "theta={theta} ({i},{j}) tau={tau}");
        }
    }
}

#[test]
fn clayton_lower_tail_dependence() {
    // C(u, u) ≈ u · 2^{−1/θ} as u → 0 for the Clayton copula
    let theta = 2.0;
    let n = 400_000;
    let block = sample_copula(&CopulaSpec::clayton(2, theta).unwrap(), n, &stream(30)).unwrap();
    let u = 0.01;
    let both = (0..n).filter(|&r| block.get(r, 0) < u && block.get(r, 1) < u).count() as f64;
    let exact = 2.0 * u.powf(-theta) - 1.0;
    let want = n as f64 * exact.powf(-1.0 / theta);
    assert!((both - want).abs() < 5.0 * want.sqrt(), "both={both} want={want}");
}

#[test]
fn exchangeable_columns() {
    let n = 200_000;
    let block = sample_copula(&CopulaSpec::clayton(4, 1.5).unwrap(), n, &stream(40)).unwrap();
    let mut taus = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            taus.push(spearman(block.column(i), block.column(j)));
        }
    }
    let spread = taus.iter().cloned().fold(f64::MIN, f64::max) - taus.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 5.0 / (n as f64).sqrt(), "spread {spread}");
}

#[test]
fn near_comonotone_endpoints() {
    let n = 50_000;
    let gauss = sample_copula(&CopulaSpec::gaussian(3, 0.999).unwrap(), n, &stream(50)).unwrap();
    assert!(spearman(gauss.column(0), gauss.column(2)) > 0.99);
    let clayton = sample_copula(&CopulaSpec::clayton(3, 50.0).unwrap(), n, &stream(51)).unwrap();
    assert!(spearman(clayton.column(0), clayton.column(1)) > 0.95);
}

#[test]
fn deterministic_per_stream() {
    let spec = CopulaSpec::clayton(3, 2.0).unwrap();
    let a = sample_copula(&spec, 40_000, &stream(60)).unwrap();
    let b = sample_copula(&spec, 40_000, &stream(60)).unwrap();
    let c = sample_copula(&spec, 40_000, &stream(61)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.column(0), c.column(0));
    // a shorter run is a prefix of a longer one
    let short = sample_copula(&spec, 20_000, &stream(60)).unwrap();
    assert_eq!(short.column(1), &a.column(1)[..20_000]);
}

#[test]
fn invalid_parameters() {
    assert!(CopulaSpec::gaussian(3, -0.5).is_err());
    assert!(CopulaSpec::gaussian(3, 1.0).is_err());
    assert!(CopulaSpec::gaussian(1, 0.2).is_err());
    assert!(CopulaSpec::clayton(3, -1.0).is_err());
    assert!(CopulaSpec::clayton(3, f64::NAN).is_err());
    assert!(equicorr_factorization(4, -0.34).is_err());
    assert!(equicorr_factorization(4, -0.33).is_ok());
}

#[test]
fn factorization_reconstructs_equicorrelation() {
    for (k, rho) in [(2, 0.5), (6, 0.1), (5, -0.2), (3, 0.999), (9, 0.0)] {
        let f = equicorr_factorization(k, rho).unwrap();
        let s = f.reconstruct();
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { rho };
                assert!((s[i * k + j] - want).abs() < 1e-12, "k={k} rho={rho}");
            }
        }
    }
}
