use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use structnet_cli::{report, run, verify, CliError, RunConfig};

/// Runs structnet experiments and invariant checks.
#[derive(Debug, Parser)]
#[command(name = "structnet", version)]
struct Args {
    /// Line-based key=value run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (the `out` key).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run seed (the `seed` key); also seeds the verification suites.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Run an invariant suite instead of an experiment:
    /// gradients, invertibility, equivariance, dissipation, deeplimit or all.
    #[arg(long, value_name = "SUITE")]
    verify: Option<String>,
}

fn overrides(args: &Args) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for s in &args.set {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(out) = &args.out {
        pairs.push(("out".into(), out.display().to_string()));
    }
    if let Some(seed) = args.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    Ok(pairs)
}

fn execute(args: &Args) -> Result<bool, CliError> {
    if let Some(suite) = &args.verify {
        let checks = verify(suite, args.seed.unwrap_or(2024))?;
        print!("{}", report(&checks));
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
        for c in &failed {
            let why = c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
            eprintln!("FAILED {}/{}: observed {:e}, required {}{why}", c.suite, c.name, c.observed, c.bound);
        }
        return Ok(failed.is_empty());
    }
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let cfg = RunConfig::parse(&text, &overrides(args)?)?;
    for path in run(&cfg)? {
        println!("{}", path.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
