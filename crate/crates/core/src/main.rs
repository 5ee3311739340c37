use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fracdrift::experiment::{
    cmd_aci_sweep, cmd_estimate, cmd_simulate, cmd_table1, ExperimentConfig,
};
use fracdrift::model::{BuiltinModel, ModelChoice};
use fracdrift::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_PARSE: u8 = 3;
const EXIT_GATE: u8 = 4;
const EXIT_DEGENERATE: u8 = 5;
const EXIT_NOT_CONVERGED: u8 = 6;

#[derive(Parser)]
#[command(name = "fracdrift", version, about = "Drift estimation for fBm-driven SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset and write paths.csv plus a manifest.
    Simulate(Common),
    /// Estimate the drift parameter from a path CSV.
    Estimate {
        /// Path CSV with columns replication,k,t_k,B,X.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated estimation over (model, H) cells.
    Table1(Common),
    /// Estimates and intervals for N = 1..n_paths on one dataset.
    AciSweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin model name (A, B or C).
    #[arg(long)]
    model: Option<BuiltinModel>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = self.model {
            c.model = ModelChoice::Builtin(m);
        }
        if let Some(h) = self.hurst {
            c.h = h;
        }
        if let Some(n) = self.paths {
            c.n_paths = n;
        }
        if let Some(r) = self.reps {
            c.repetitions = r;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Csv(_) => EXIT_PARSE,
        Error::DegenerateCohort => EXIT_DEGENERATE,
        _ => EXIT_CONFIG,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.resolve()?;
            let paths = cmd_simulate(&cfg)?;
            println!("wrote {} paths to {}", paths.len(), cfg.output_dir.display());
            Ok(0)
        }
        Command::Estimate { data, common } => {
            let cfg = common.resolve()?;
            let r = cmd_estimate(&data, &cfg)?;
            println!(
                "theta_bar = {} (gated {}), interval [{}, {}]",
                r.result.theta_bar,
                r.result.theta_bar_gated,
                r.interval.lower(),
                r.interval.upper()
            );
            if !r.result.converged {
                Ok(EXIT_NOT_CONVERGED)
            } else if !r.result.gate.passed {
                Ok(EXIT_GATE)
            } else {
                Ok(0)
            }
        }
        Command::Table1(c) => {
            let cfg = c.resolve()?;
            let report = cmd_table1(&cfg)?;
            println!("model,h,mean_abs_error,std_abs_error,gate_pass_rate,coverage_rate,failed");
            for s in &report.summaries {
                println!(
                    "{},{},{:.4},{:.4},{:.3},{:.3},{}",
                    s.model,
                    s.h,
                    s.mean_abs_error,
                    s.std_abs_error,
                    s.gate_pass_rate,
                    s.coverage_rate,
                    s.failed
                );
            }
            Ok(0)
        }
        Command::AciSweep(c) => {
            let cfg = c.resolve()?;
            let rows = cmd_aci_sweep(&cfg)?;
            println!("wrote {} rows to {}", rows.len(), cfg.output_dir.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
