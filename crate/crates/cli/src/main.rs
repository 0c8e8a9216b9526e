use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ris_bamp::harness::{
    emit, monte_carlo, monte_carlo_paired, run_trial_traced, selftest, write_csv, write_trace,
    ExperimentSpec, SweepAxis, SweepResult,
};
use ris_bamp::Scheme;

/// Joint channel estimation and signal recovery for RIS-assisted MIMO links.
#[derive(Parser, Debug)]
#[command(name = "ris-bamp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by the config and flags.
    Run(Common),
    /// Run the experiment over the given axis and values.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Numerical self-checks against quadrature and finite-difference references.
    Selftest {
        /// Also write the checks as JSON to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON experiment spec; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated SNR values in dB (replaces the sweep axis).
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Damping factor in (0, 1].
    #[arg(long)]
    damping: Option<f64>,
    /// Directory for the CSV and JSON results. Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-iteration diagnostics of the first trial of every sweep point.
    #[arg(long)]
    trace: bool,
    /// Exit with status 2 when any trial diverged.
    #[arg(long)]
    strict: bool,
    /// Also run the pilot-window baseline on the same observations.
    #[arg(long)]
    baseline: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SchemeArg {
    Bamp,
    Butamp,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Axis {
    Snr,
    PilotLen,
    AnchorRows,
    RisElements,
    Damping,
}

fn integers(values: &[f64], name: &str) -> Result<Vec<usize>> {
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                bail!("{name} values must be non-negative integers, got {v}")
            }
        })
        .collect()
}

fn axis_values(axis: Axis, values: &[f64]) -> Result<SweepAxis> {
    Ok(match axis {
        Axis::Snr => SweepAxis::SnrDb(values.to_vec()),
        Axis::PilotLen => SweepAxis::PilotLen(integers(values, "pilot-len")?),
        Axis::AnchorRows => SweepAxis::AnchorRows(integers(values, "anchor-rows")?),
        Axis::RisElements => SweepAxis::RisElements(integers(values, "ris-elements")?),
        Axis::Damping => SweepAxis::Damping(values.to_vec()),
    })
}

fn load_spec(c: &Common) -> Result<ExperimentSpec> {
    let mut spec = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(snr) = &c.snr {
        spec.sweep = SweepAxis::SnrDb(snr.clone());
    }
    if let Some(n) = c.trials {
        spec.n_trials = n;
    }
    if let Some(seed) = c.seed {
        spec.base_seed = seed;
    }
    if let Some(s) = c.scheme {
        spec.bamp.scheme = match s {
            SchemeArg::Bamp => Scheme::Bamp,
            SchemeArg::Butamp => Scheme::Butamp,
        };
    }
    if let Some(b) = c.damping {
        spec.bamp.damping = b;
    }
    if let Some(out) = &c.out {
        spec.output = Some(out.clone());
    }
    spec.validate()?;
    Ok(spec)
}

fn report(result: &SweepResult, stem: &str, spec: &ExperimentSpec, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => {
            let files = emit(spec, result, dir, stem)?;
            eprintln!("wrote {} and {}", files.csv.display(), files.json.display());
        }
        None => {
            if stem != "joint" {
                println!("# {stem}");
            }
            write_csv(result, io::stdout().lock(), Path::new("<stdout>"))?;
        }
    }
    for p in &result.points {
        if p.n_diverged > 0 {
            eprintln!(
                "{stem}: {} = {}: {}/{} trials diverged",
                result.axis, p.value, p.n_diverged, p.n_trials
            );
        }
    }
    Ok(())
}

fn execute(spec: ExperimentSpec, c: &Common) -> Result<ExitCode> {
    let out = spec.output.clone();
    if c.trace && out.is_none() {
        bail!("--trace needs --out");
    }
    let results = if c.baseline {
        let (joint, base) = monte_carlo_paired(&spec)?;
        vec![("joint", joint), ("baseline", base)]
    } else {
        vec![("joint", monte_carlo(&spec)?)]
    };
    for (stem, r) in &results {
        report(r, stem, &spec, out.as_deref())?;
    }
    if c.trace {
        let dir = out.as_deref().expect("checked above");
        for (i, point) in spec.points()?.iter().enumerate() {
            let (_, rows) = run_trial_traced(&point.gen, &point.bamp, spec.base_seed)?;
            let path = dir.join(format!("trace_{i}.csv"));
            write_trace(&rows, &path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    let diverged = results.iter().any(|(_, r)| r.any_diverged());
    Ok(if c.strict && diverged {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_selftest(out: Option<&Path>) -> Result<ExitCode> {
    let checks = selftest::run_all()?;
    for c in &checks {
        println!(
            "{} {:<28} {:>12.3e} (tol {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("selftest.json");
        fs::write(&path, serde_json::to_string_pretty(&checks)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(c) => execute(load_spec(&c)?, &c),
        Command::Sweep { axis, values, common } => {
            let mut spec = load_spec(&common)?;
            spec.sweep = axis_values(axis, &values)?;
            spec.validate()?;
            execute(spec, &common)
        }
        Command::Selftest { out } => run_selftest(out.as_deref()),
    }
}
