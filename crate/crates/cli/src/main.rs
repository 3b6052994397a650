//! `minimax-cert`: certification, classification and GAN experiments from the
//! command line. Reports are canonical JSON; exit status 0 means every
//! requested check passed, 1 means a check failed, 2 means bad input.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "minimax-cert", version, about = "Stationarity certificates and minimax classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    /// Registered example id (see `examples`).
    #[arg(long)]
    problem: String,
    /// JSON parameters for parametrized examples.
    #[arg(long)]
    params: Option<String>,
    /// Replace X by the box `[lo, hi]^n`, given as `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    x_set: Option<String>,
    /// Replace Y by the box `[lo, hi]^m`, given as `lo,hi`.
    #[arg(long, allow_hyphen_values = true)]
    y_set: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Print the canonical JSON report instead of a summary.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check stationarity conditions at a point.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
        /// `x1,x2,...;y1,...` (or a flat list split after n entries).
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
        /// Directional (d-stationarity) conditions; default for locally Lipschitz problems.
        #[arg(long)]
        nonsmooth: bool,
        /// Radii around y-hat for second-order direction sets, comma separated.
        #[arg(long)]
        delta_ladder: Option<String>,
        /// Difference-quotient scheme as JSON (missing fields take defaults).
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Classify a point as saddle / minimax (global and local) and stationary.
    Classify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Grid nodes per coordinate.
        #[arg(long)]
        grid: Option<usize>,
        /// Ball radii as fractions of the smaller set diameter, decreasing.
        #[arg(long)]
        delta_ladder: Option<String>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Search the grid for global minimax points.
    Search {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Max-min minus min-max over a box of half-width delta.
    Gap {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Box centre; defaults to the origin.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample a GAN instance and write it to `--out`.
    GanBuild {
        /// GAN configuration as JSON; overrides `--seed`/`--n`.
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample count.
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Certify a point of a stored GAN instance.
    GanCertify {
        #[arg(long)]
        instance: std::path::PathBuf,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "solve")]
        point: Option<String>,
        /// Run projected gradient descent-ascent from the reference point first.
        #[arg(long)]
        solve: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Residual-versus-N experiment; CSV on stdout or `--out`.
    GanConverge {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "16,64,256,1024")]
        n_list: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 16384)]
        n_ref: usize,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// List the registered examples.
    Examples {
        #[arg(long)]
        json: bool,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MINIMAX_CERT_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("MINIMAX_CERT_THREADS must be a positive integer"))?;
        if n == 0 {
            anyhow::bail!("MINIMAX_CERT_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
