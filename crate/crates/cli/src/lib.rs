//! Command-line surface of the optquant toolkit: latent and label file
//! formats, JSON output documents and the distill, diffuse and train
//! pipeline.
//!
//! Exit status is 0 on success, 1 when a verified property fails, 2 for
//! a malformed command line and 3 for unusable input.

pub mod commands;
pub mod doc;
pub mod error;
pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use optquant::verify::Suite;
use serde::Serialize;

pub use commands::{ArchArg, SdeArg, ScheduleArg, WeightsArg};
pub use error::{CliError, CliResult, EXIT_INPUT, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED};

/// Master seed when neither `--seed` nor `OPTQUANT_SEED` is given.
pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "OPTQUANT_SEED";

#[derive(Debug, Parser)]
#[command(name = "optquant", version, about = "Dataset distillation by weighted optimal quantization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed.
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output document; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize every class of a labelled latent set.
    Distill {
        #[arg(long)]
        latents: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Quantization level per class.
        #[arg(long)]
        ipc: usize,
        #[arg(long, value_enum, default_value_t = ScheduleArg::CountReciprocal)]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Transport a distillation through the reverse diffusion of each class
    /// and check the transport bound.
    Diffuse {
        #[arg(long)]
        distilled: PathBuf,
        /// Latents defining each class's reference law.
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum, default_value_t = SdeArg::Brownian)]
        sde: SdeArg,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = optquant::diffusion::SdeSpec::<f64>::DEFAULT_STEPS)]
        steps: usize,
        /// Monte Carlo sample size of the bound check.
        #[arg(long, default_value_t = 2000)]
        n_mc: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Train a small classifier on a distill or diffuse document.
    Train {
        #[arg(long)]
        distilled: PathBuf,
        #[arg(long, value_enum, default_value_t = WeightsArg::VarianceReduced)]
        weights: WeightsArg,
        #[arg(long, value_enum, default_value_t = ArchArg::Logistic)]
        arch: ArchArg,
        /// Hidden width of the `mlp` architecture.
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, requires = "eval_labels")]
        eval_latents: Option<PathBuf>,
        #[arg(long, requires = "eval_latents")]
        eval_labels: Option<PathBuf>,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Exact W2 between the uniform measures on two latent files.
    W2 {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Quantization error against K for the uniform law on the unit cube.
    RateScan {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 16, 32, 64])]
        levels: Vec<usize>,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the numerical verification suites; exits 1 if any check fails.
    Verify {
        #[arg(long, default_value_t = Suite::All, value_parser = parse_suite)]
        suite: Suite,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Write the synthetic demo latents and labels.
    Demo {
        #[arg(long, default_value = "demo")]
        out_dir: PathBuf,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

fn emit<T: Serialize>(out: &OutArg, value: &T) -> CliResult<()> {
    match &out.out {
        Some(path) => doc::save(path, value),
        None => {
            print!("{}", doc::to_json(value)?);
            Ok(())
        }
    }
}

fn status(pass: bool) -> u8 {
    if pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}

/// Runs one parsed command and returns its exit status.
pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Distill {
            latents,
            labels,
            ipc,
            schedule,
            batch_size,
            iterations,
            seed,
            out,
        } => {
            let args = commands::DistillArgs {
                latents,
                labels,
                ipc,
                schedule,
                batch_size,
                iterations,
                seed: seed.seed,
            };
            emit(&out, &commands::distill(&args)?)?;
            Ok(EXIT_OK)
        }
        Command::Diffuse {
            distilled,
            reference,
            labels,
            sde,
            horizon,
            delta,
            steps,
            n_mc,
            seed,
            out,
        } => {
            let args = commands::DiffuseArgs {
                distilled,
                reference,
                labels,
                sde,
                horizon,
                delta,
                steps,
                n_mc,
                seed: seed.seed,
            };
            let d = commands::diffuse(&args)?;
            emit(&out, &d)?;
            Ok(status(d.bounds.iter().all(|b| b.pass)))
        }
        Command::Train {
            distilled,
            weights,
            arch,
            hidden,
            lr,
            epochs,
            eval_latents,
            eval_labels,
            seed,
            out,
        } => {
            let args = commands::TrainArgs {
                distilled,
                weights,
                arch,
                hidden,
                lr,
                epochs,
                seed: seed.seed,
                eval_latents,
                eval_labels,
            };
            emit(&out, &commands::train(&args)?)?;
            Ok(EXIT_OK)
        }
        Command::W2 { mu, nu, out } => {
            emit(&out, &commands::w2(&mu, &nu)?)?;
            Ok(EXIT_OK)
        }
        Command::RateScan {
            dim,
            levels,
            samples,
            restarts,
            seed,
            out,
        } => {
            emit(&out, &commands::rate(dim, &levels, samples, restarts, seed.seed)?)?;
            Ok(EXIT_OK)
        }
        Command::Verify { suite, seed, out } => {
            let v = commands::verify(suite, seed.seed)?;
            emit(&out, &v)?;
            for r in v.records.iter().filter(|r| !r.pass) {
                eprintln!("FAIL {}: measured {:.6e}, target {:.6e}", r.claim, r.measured, r.target);
            }
            Ok(status(v.failed == 0))
        }
        Command::Demo { out_dir } => {
            for p in commands::demo(&out_dir)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` and runs the command; errors are reported on standard
/// error and mapped to their exit status.
pub fn main_with_args<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Directory holding the bundled demo files.
pub fn bundled_demo_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/demo"))
}
