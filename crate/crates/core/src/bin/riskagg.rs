use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use riskagg::cli::{run, CommandOutput};
use riskagg::config::{ExperimentConfig, Mode};
use riskagg::Error;

/// Hierarchical copula aggregation experiments.
#[derive(Debug, Parser)]
#[command(name = "riskagg", version)]
struct Args {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; the JSON report goes next to it with a `.json` extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Worker threads for the Monte-Carlo engine.
    #[arg(long, env = "RISKAGG_THREADS")]
    threads: Option<usize>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn report_path(csv: &Path) -> PathBuf {
    if csv.extension().is_some_and(|e| e == "json") {
        csv.with_extension("report.json")
    } else {
        csv.with_extension("json")
    }
}

fn write_outputs(out: Option<&Path>, output: &CommandOutput) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, &output.csv)?;
            eprintln!("wrote {}", path.display());
            if let Some(json) = &output.json {
                let rp = report_path(path);
                std::fs::write(&rp, json)?;
                eprintln!("wrote {}", rp.display());
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(output.csv.as_bytes())?;
        }
    }
    Ok(())
}

fn execute(args: &Args) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    cfg.validate()?;
    let out = args.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::Resource(e.to_string()))?;
    eprintln!(
        "mode={} shapes={} grid={} n_sims={} seed={} threads={}",
        cfg.mode,
        cfg.shapes().len(),
        cfg.copula.grid.len(),
        cfg.n_sims,
        cfg.seed,
        pool.current_num_threads()
    );
    if matches!(cfg.mode, Mode::Mc | Mode::Both) {
        let work: u128 = cfg.shapes().iter().map(|s| (s.k as u128).pow(s.m as u32)).sum::<u128>()
            * cfg.n_sims as u128
            * (cfg.copula.grid.len().max(1) as u128 + 1);
        if work > 5_000_000_000 {
            eprintln!("warning: about {work} leaf draws requested, this will take a while");
        }
    }

    let output = pool.install(|| run(&cfg))?;
    write_outputs(out.as_deref(), &output)?;
    if let Some(msg) = output.check_failed {
        return Err(Error::Numeric(msg));
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
