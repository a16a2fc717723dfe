//! `dmot`: preprocess a doubling metric into a compact hierarchy file, then
//! answer approximate network-design queries over subsets without the
//! original distances.

mod cmds;
mod fileio;
mod gen;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dmot_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Points,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryKind {
    Steiner,
    Forest,
    Tsp,
    Kcenter,
    FlRestricted,
    FlUnrestricted,
}

/// Input selection shared by commands that need a metric.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Point or matrix file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "points")]
    pub input_format: InputFormat,
    /// Generate an instance instead of reading one.
    #[arg(long, value_enum)]
    pub generate: Option<gen::Family>,
    /// Instance size for --generate.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Hierarchy parameters: either explicit (tau, eta) or derived from epsilon.
#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 2)]
    pub eta: u32,
    /// Derive admissible (tau, eta) for a (1+epsilon) distance sandwich.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Parser)]
#[command(name = "dmot", version, about)]
struct Cli {
    #[arg(long, value_enum, default_value = "human", global = true)]
    format: OutputFormat,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Build the hierarchy from an input metric and write a structure file.
    Preprocess {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Output structure file.
        #[arg(long, short)]
        output: PathBuf,
        /// Opening-cost file enabling facility-location preprocessing.
        #[arg(long)]
        fl_costs: Option<PathBuf>,
        /// Facility-location accuracy parameter.
        #[arg(long, default_value_t = 0.5)]
        eps0: f64,
        /// Also write the (possibly generated) input points here.
        #[arg(long)]
        save_input: Option<PathBuf>,
    },
    /// Answer queries from a structure file (no original input needed).
    Query {
        kind: QueryKind,
        #[arg(long)]
        structure: PathBuf,
        /// Query file: one query per line, space-separated point ids.
        #[arg(long)]
        queries: PathBuf,
        /// Opening costs by point id (fl-restricted only).
        #[arg(long)]
        costs: Option<PathBuf>,
        /// Dump each query's spanner edges ("u v weight" lines) to a file.
        #[arg(long)]
        dump_spanner: Option<PathBuf>,
    },
    /// Maintain an approximate MST under a script of point updates.
    Dynamic {
        #[arg(long)]
        structure: PathBuf,
        /// Script file: lines `ins <id>` / `del <id>` / `check`.
        #[arg(long)]
        script: PathBuf,
        /// Seed for the maintained tree's random root choices.
        #[arg(long, default_value_t = 1)]
        mst_seed: u64,
        /// Check the approximation ratio against an exact MST per op;
        /// requires the original input.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Build and cross-check the structure against brute-force oracles.
    Verify {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Also validate an existing structure file (checksum + round trip).
        #[arg(long)]
        structure: Option<PathBuf>,
        /// Trials per sampled suite.
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Timing table over generated instances.
    Bench {
        #[arg(long, value_enum, default_value = "uniform2d")]
        family: gen::Family,
        /// Comma-separated instance sizes.
        #[arg(long, default_value = "1024,2048,4096", value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Comma-separated query sizes.
        #[arg(long, default_value = "32", value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let fmt = cli.format;
    let out = match cli.cmd {
        Cmd::Preprocess {
            input,
            params,
            output,
            fl_costs,
            eps0,
            save_input,
        } => cmds::preprocess(&input, &params, &output, fl_costs.as_deref(), eps0, save_input.as_deref(), fmt),
        Cmd::Query {
            kind,
            structure,
            queries,
            costs,
            dump_spanner,
        } => cmds::query(kind, &structure, &queries, costs.as_deref(), dump_spanner.as_deref(), fmt),
        Cmd::Dynamic {
            structure,
            script,
            mst_seed,
            verify,
            input,
        } => cmds::dynamic(&structure, &script, mst_seed, verify, &input, fmt),
        Cmd::Verify {
            input,
            params,
            structure,
            trials,
        } => cmds::verify(&input, &params, structure.as_deref(), trials, fmt),
        Cmd::Bench {
            family,
            sizes,
            ks,
            trials,
            seed,
        } => cmds::bench(family, &sizes, &ks, trials, seed, fmt),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ChecksumMismatch { .. }
                | Error::VersionUnsupported(_)
                | Error::Truncated(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
