//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so that every line is printed even when
//! all criteria pass.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use riskagg::analytic::{compare_shapes, db_gaussian, eta_gaussian};
use riskagg::copulas::sample_copula;
use riskagg::covariance::{build_ci_covariance, common_ancestor_level, effective_correlation, sample_joint, verify_ci};
use riskagg::hierarchy::{aggregate_mc_with, independent_baseline, standalone_sum_at_risk, AggregationOptions};
use riskagg::marginals::std_normal_quantile;
use riskagg::riskmetrics::tail_estimate;
use riskagg::rng::{Purpose, Stream};
use riskagg::{CopulaSpec, MarginalSpec, NodeId, TreeSpec};

use common::{kendall_tau_brute, ks_p_value, ks_two_sample, pearson, variance};

const SEED: u64 = 20_240_601;
const ALPHA: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn normal_tree(k: usize, m: usize, rho: f64) -> TreeSpec {
    TreeSpec::new(k, m, MarginalSpec::normal(0.0, 1.0).unwrap(), CopulaSpec::gaussian(k, rho).unwrap()).unwrap()
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn criterion_1() -> Outcome {
    let db2 = db_gaussian(2, 10, 0.4).unwrap();
    let eta2 = eta_gaussian(2, 10, 0.4).unwrap();
    let db4 = db_gaussian(4, 5, 0.4).unwrap();
    let eta4 = eta_gaussian(4, 5, 0.4).unwrap();
    let pass = within(db2, 0.8315, 0.8325)
        && within(eta2, 0.140, 0.142)
        && within(db4, 0.775, 0.777)
        && within(eta4, 0.199, 0.200);
    outcome(pass, format!("(2,10): DB={db2:.5} eta={eta2:.5}; (4,5): DB={db4:.5} eta={eta4:.5}"))
}

fn criterion_2() -> Outcome {
    let n = 1_000_000;
    let mut worst_db: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut fails = Vec::new();
    for k in [2, 3] {
        for m in [2, 3] {
            for rho in [-0.2, 0.0, 0.4, 0.8] {
                let tree = normal_tree(k, m, rho);
                let s1 = standalone_sum_at_risk(&tree, ALPHA).unwrap();
                let root = aggregate_mc_with(&tree, n, SEED, &AggregationOptions::root_only()).unwrap();
                let sz = tail_estimate(root.root(), ALPHA).unwrap().xtvar();
                let db_err = ((1.0 - sz / s1) - db_gaussian(k, m, rho).unwrap()).abs();
                // closed-form root variance and the standard error of a normal sample variance
                let exact = (k as f64 + (k * k - k) as f64 * rho).powi(m as i32);
                let se = exact * (2.0 / (n as f64 - 1.0)).sqrt();
                let z = (variance(root.root()) - exact) / se;
                worst_db = worst_db.max(db_err);
                worst_z = worst_z.max(z.abs());
                if db_err >= 0.01 || z.abs() > 3.0 {
                    fails.push(format!("({k},{m},{rho}) dDB={db_err:.4} z={z:.2}"));
                }
            }
        }
    }
    outcome(fails.is_empty(), format!("16 cases, max |dDB|={worst_db:.5}, max |z_var|={worst_z:.2} {}", fails.join(" ")))
}

fn criterion_3() -> Outcome {
    let mut worst_violation: f64 = 0.0;
    let mut worst_eig: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for k in [2, 3, 4] {
        for m in [1, 2, 3] {
            for rho in [-0.2, 0.0, 0.3, 0.7] {
                let sigma: f64 = 1.7;
                let c = build_ci_covariance(k, m, rho, sigma).unwrap();
                let ci = verify_ci(&c).unwrap();
                let (lo, hi) = c.eigen_extremes();
                let want = sigma * sigma * (k as f64 + (k * k - k) as f64 * rho).powi(m as i32);
                worst_violation = worst_violation.max(ci.max_violation);
                worst_eig = worst_eig.max(-lo / hi);
                worst_sum = worst_sum.max((c.grand_sum() / want - 1.0).abs());
            }
        }
    }
    let pass = worst_violation < 1e-10 && worst_eig <= 1e-10 && worst_sum <= 1e-9;
    outcome(
        pass,
        format!("36 cases, max violation={worst_violation:.2e}, max -lambda_min/lambda_max={worst_eig:.2e}, max rel grand-sum error={worst_sum:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let n = 100_000;
    let mut pass = true;
    let mut details = Vec::new();
    for (k, m, rho) in [(2, 3, 0.4), (3, 2, 0.8)] {
        let c = build_ci_covariance(k, m, rho, 1.0).unwrap();
        let joint = sample_joint(&c, n, SEED).unwrap().level_sum(m);
        let root = aggregate_mc_with(&normal_tree(k, m, rho), n, SEED, &AggregationOptions::root_only()).unwrap();
        let ratio = variance(&joint) / variance(root.root());
        let d = ks_two_sample(&joint, root.root());
        let p = ks_p_value(d, n, n);
        pass &= within(ratio, 0.99, 1.01) && p > 0.01;
        details.push(format!("({k},{m},{rho}): var ratio={ratio:.4} KS D={d:.5} p={p:.3}"));
    }
    outcome(pass, details.join("; "))
}

fn criterion_5() -> Outcome {
    let (k, m, rho, n) = (2, 4, 0.5, 1_000_000);
    let c = build_ci_covariance(k, m, rho, 1.0).unwrap();
    let set = sample_joint(&c, n, SEED).unwrap();
    let leaves: Vec<&[f64]> = (1..=k.pow(m as u32)).map(|i| set.get(NodeId::new(m, i)).unwrap()).collect();
    let mut worst = [0.0f64; 4];
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            let p = common_ancestor_level(k, m, i, j);
            let want = effective_correlation(k, m, rho, p).unwrap();
            worst[p] = worst[p].max((pearson(leaves[i], leaves[j]) - want).abs());
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        max < 0.005,
        format!(
            "max |corr - rho_eff| by ancestor level p=0..3: {:.4} {:.4} {:.4} {:.4}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn lognormal_tree(k: usize, m: usize, copula: CopulaSpec) -> TreeSpec {
    TreeSpec::new(k, m, MarginalSpec::lognormal_from_moments(670_000.0, 8.1e6).unwrap(), copula).unwrap()
}

fn criterion_6() -> Outcome {
    let tree = lognormal_tree(3, 6, CopulaSpec::independence(3).unwrap());
    let s1 = standalone_sum_at_risk(&tree, ALPHA).unwrap();
    let base = independent_baseline(&tree, 200_000, SEED).unwrap();
    let s0 = tail_estimate(base.root(), ALPHA).unwrap();
    let pass = within(s1, 21.3e9, 23.5e9) && within(s0.xtvar(), 1.15e9, 1.45e9);
    outcome(
        pass,
        format!("S1={:.4}bn, S0={:.4}bn (se {:.4}bn, n=2e5)", s1 / 1e9, s0.xtvar() / 1e9, s0.std_err / 1e9),
    )
}

fn mc_db(tree: &TreeSpec, n: usize) -> f64 {
    let s1 = standalone_sum_at_risk(tree, ALPHA).unwrap();
    let root = aggregate_mc_with(tree, n, SEED, &AggregationOptions::root_only()).unwrap();
    1.0 - tail_estimate(root.root(), ALPHA).unwrap().xtvar() / s1
}

fn criterion_7() -> Outcome {
    // (a) thin beats fat at N = 1024
    let shapes = compare_shapes(1024, &[(32, 2), (4, 5), (2, 10)], 0.4);
    let order_ok = matches!(&shapes, Ok(r) if r.iter().map(|s| (s.k, s.m)).collect::<Vec<_>>() == [(2, 10), (4, 5), (32, 2)]);

    // (b) convexity of η(ρ) for k = 3 on a 0.01 grid
    let lower = -0.5 + 0.01;
    let grid: Vec<f64> = (0..).map(|i| lower + 0.01 * i as f64).take_while(|&r| r <= 1.0 + 1e-12).collect();
    let mut convex_ok = true;
    for m in [1, 3, 4, 5, 6, 8, 10] {
        let eta: Vec<f64> = grid.iter().map(|&r| eta_gaussian(3, m, r.min(1.0)).unwrap()).collect();
        for w in eta.windows(3) {
            let d2 = w[2] - 2.0 * w[1] + w[0];
            let ok = if m == 1 { d2 <= 1e-13 } else { d2 >= -1e-13 };
            convex_ok &= ok;
        }
    }

    // (c) hierarchical (3,6) against flat (729,1) LogNormal trees
    let n = 50_000;
    let mut gaps: Vec<(String, f64)> = Vec::new();
    let mut check = |label: String, hier: CopulaSpec, flat: CopulaSpec| {
        let gap = mc_db(&lognormal_tree(3, 6, hier), n) - mc_db(&lognormal_tree(729, 1, flat), n);
        gaps.push((label, gap));
    };
    for rho in [0.0, 0.2, 0.4, 0.6, 0.8, 0.999] {
        check(format!("rho={rho}"), CopulaSpec::gaussian(3, rho).unwrap(), CopulaSpec::gaussian(729, rho).unwrap());
    }
    for theta in [0.5, 1.0, 2.0, 5.0, 50.0] {
        check(format!("theta={theta}"), CopulaSpec::clayton(3, theta).unwrap(), CopulaSpec::clayton(729, theta).unwrap());
    }
    let hier_ok = gaps.iter().all(|(_, g)| *g >= -0.01);
    let listed: Vec<String> = gaps.iter().map(|(l, g)| format!("{l}:{g:+.4}")).collect();
    outcome(
        order_ok && convex_ok && hier_ok,
        format!(
            "(a) order {}; (b) second differences {}; (c) DB_hier - DB_flat (n={n}) {}",
            if order_ok { "ok" } else { "WRONG" },
            if convex_ok { "ok" } else { "WRONG" },
            listed.join(" ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let n = 1_000_000;
    let rho = 0.4;
    let block = sample_copula(&CopulaSpec::gaussian(3, rho).unwrap(), n, &Stream::new(SEED, Purpose::User, 8, 0)).unwrap();
    let scores: Vec<Vec<f64>> = block
        .columns()
        .iter()
        .map(|c| c.iter().map(|&u| std_normal_quantile(u).unwrap()).collect())
        .collect();
    let mut corr_err: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            corr_err = corr_err.max((pearson(&scores[i], &scores[j]) - rho).abs());
        }
    }

    let mut tau_err: f64 = 0.0;
    for theta in [0.5, 2.0] {
        let block =
            sample_copula(&CopulaSpec::clayton(2, theta).unwrap(), 10_000, &Stream::new(SEED, Purpose::User, 9, 0)).unwrap();
        let tau = kendall_tau_brute(block.column(0), block.column(1));
        tau_err = tau_err.max((tau - theta / (theta + 2.0)).abs());
    }
    outcome(
        corr_err < 0.004 && tau_err < 0.01,
        format!("Gaussian max |corr - rho|={corr_err:.5}; Clayton max |tau - theta/(theta+2)|={tau_err:.5}"),
    )
}

fn run_cli(config: &std::path::Path, out: &std::path::Path, threads: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_riskagg"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let experiments = [
        r#"{"tree":{"k":3,"m":3},"marginal":{"kind":"lognormal","mean":670000,"sd":8.1e6},
            "copula":{"kind":"gaussian","grid":[0.0,0.4,1.0]},"n_sims":40000,"seed":7,"mode":"mc"}"#,
        r#"{"tree":{"k":3,"m":2},"marginal":{"kind":"normal","mean":0,"sd":1},
            "copula":{"kind":"gaussian","grid":[-0.2,0.5,1.0]},"n_sims":40000,"seed":9,"mode":"both"}"#,
        r#"{"tree":{"k":2,"m":4},"marginal":{"kind":"normal","mean":0,"sd":1},
            "copula":{"kind":"clayton","grid":[0.5,2.0,1e9]},"n_sims":40000,"seed":11,"mode":"mc"}"#,
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (i, text) in experiments.iter().enumerate() {
        let cfg = dir.path().join(format!("exp{i}.json"));
        std::fs::write(&cfg, text).unwrap();
        let runs: Result<Vec<Vec<u8>>, String> = [(1, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|(t, tag)| run_cli(&cfg, &dir.path().join(format!("exp{i}{tag}.csv")), *t))
            .collect();
        match runs {
            Ok(r) => {
                let same = r[0] == r[1] && r[0] == r[2];
                pass &= same && !r[0].is_empty();
                details.push(format!("exp{i}: {} bytes, {}", r[0].len(), if same { "identical" } else { "DIFFERENT" }));
            }
            Err(e) => {
                pass = false;
                details.push(format!("exp{i}: cli failed: {}", e.trim()));
            }
        }
    }
    outcome(pass, format!("threads 1, 1, 4: {}", details.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let r = f();
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id}: {} [{:.1}s]", r.detail, start.elapsed().as_secs_f64());
        if !r.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
