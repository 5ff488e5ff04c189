use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use irs_hybrid::experiments::{read_summary, run_sweep, write_outputs, ExperimentConfig, MethodId};

#[derive(Parser)]
#[command(name = "irs-sim", version = irs_hybrid::experiments::VERSION, about = "IRS-assisted hybrid beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write results.csv + summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the number of trials per sweep point.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Comma-separated subset of methods.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<MethodId>>,
    },
    /// Print the summary table of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn simulate(
    config: PathBuf,
    trials: Option<usize>,
    seed: Option<u64>,
    out: PathBuf,
    threads: Option<usize>,
    methods: Option<Vec<MethodId>>,
) -> irs_hybrid::Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(m) = methods {
        cfg.methods = m;
    }
    cfg.validate()?;
    let start = Instant::now();
    let output = run_sweep(&cfg, threads)?;
    write_outputs(&out, &cfg, &output)?;
    let failed = output.rows.iter().filter(|r| !r.is_ok()).count();
    eprintln!(
        "{} rows ({} failed) in {:.1}s -> {}",
        output.rows.len(),
        failed,
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn report(input: PathBuf) -> irs_hybrid::Result<()> {
    let doc = read_summary(&input)?;
    println!("version {}  sweep {}", doc.version, doc.sweep_axis);
    println!(
        "{:<32} {:>5} {:>8} {:>6} {:>8} {:>11} {:>10} {:>9} {:>6}",
        "method", "point", "ptx_dbm", "n_path", "nmse_db", "NtxNrxM", "mean", "stderr", "count"
    );
    for e in &doc.entries {
        let opt = |x: Option<f64>, p: usize| x.map_or("-".to_string(), |v| format!("{v:.p$}"));
        println!(
            "{:<32} {:>5} {:>8.1} {:>6} {:>8} {:>11} {:>10} {:>9} {:>6}",
            e.method.as_str(),
            e.sweep_index,
            e.p_tx_dbm,
            e.n_path,
            opt(e.nmse_db, 1),
            format!("{}x{}x{}", e.n_t, e.n_r, e.m),
            opt(e.mean_bps_hz, 3),
            opt(e.stderr_bps_hz, 3),
            e.count
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, trials, seed, out, threads, methods } => {
            simulate(config, trials, seed, out, threads, methods)
        }
        Command::Report { input } => report(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
