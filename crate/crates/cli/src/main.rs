use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use baireclust::baire::parse_prefix;
use baireclust::pipeline::{
    cmd_cluster, cmd_encode, cmd_experiments, cmd_members, cmd_seriate, cmd_stats, PipelineConfig,
    OUT_DIR_ENV,
};
use baireclust::validate::{ExperimentOptions, Linkage};
use baireclust::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Linear-time hierarchical clustering by seriation and digit prefixes.
#[derive(Parser, Debug)]
#[command(name = "baireclust", version, about, long_about = None)]
struct Cli {
    /// Worker threads for the parallel stages (default: all cores). Results
    /// do not depend on this value.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summary statistics, marginals and normality diagnostics.
    Stats(PipelineArgs),
    /// Write the seriation (and, for a consensus source, the correlation curve).
    Seriate(PipelineArgs),
    /// Re-encode the seriation into [0, 1) and write histograms.
    Encode(PipelineArgs),
    /// Labels, partition tables and level-1 cluster summaries.
    Cluster {
        #[command(flatten)]
        args: PipelineArgs,
        /// Print the ids of one cluster instead of writing files, e.g. `3,7`.
        #[arg(long, value_name = "DIGITS")]
        prefix: Option<String>,
    },
    /// Print the ids in the cluster with the given digit prefix.
    Members {
        #[command(flatten)]
        args: PipelineArgs,
        /// Comma separated digits, e.g. `3,7`; empty for all ids.
        #[arg(long, value_name = "DIGITS", allow_hyphen_values = false)]
        prefix: String,
    },
    /// Run a canned cophenetic experiment (`iris` or `uniform`).
    Experiments(ExperimentArgs),
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Input table.
    #[arg(value_name = "INPUT")]
    input: Option<PathBuf>,

    /// File of `key = value` lines; command-line flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Input format: `tsv` (whitespace separated) or `csv`.
    #[arg(long)]
    format: Option<String>,

    /// The first line is data, not a header.
    #[arg(long)]
    no_header: bool,

    /// Rows carry no leading id field; ids become `row_1`, `row_2`, ...
    #[arg(long)]
    no_id_column: bool,

    /// Seriation: `row_mass`, `row_sum` or `consensus`.
    #[arg(long)]
    source: Option<String>,

    /// Number of random projections; implies `--source consensus`.
    #[arg(long, value_name = "K")]
    projections: Option<usize>,

    /// Average raw projections rather than projections rescaled to [0, 1).
    #[arg(long)]
    consensus_raw: bool,

    /// Skip re-encoding; the seriation must already lie in [0, 1).
    #[arg(long)]
    no_encode: bool,

    /// Transform chain; only `log,standardize,gaussian_cdf` is supported.
    #[arg(long)]
    chain: Option<String>,

    /// Base B of the digit expansion (default 10).
    #[arg(long)]
    base: Option<u32>,

    /// Number of levels L (default 3).
    #[arg(long)]
    depth: Option<usize>,

    /// Seed for every random stage (default 0).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (default: $BAIRECLUST_OUT, else the current directory).
    #[arg(long, short = 'o', value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Significance level of the normality diagnostics (default 0.05).
    #[arg(long)]
    alpha: Option<f64>,

    /// Histogram bins (default 50).
    #[arg(long)]
    bins: Option<usize>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            cfg.out_dir = dir.into();
        }
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let mut set = |key: &str, value: Option<String>| match value {
            Some(v) => cfg.set(key, &v),
            None => Ok(()),
        };
        set("format", self.format.clone())?;
        set("header", self.no_header.then(|| "false".into()))?;
        set("id_column", self.no_id_column.then(|| "false".into()))?;
        set("source", self.source.clone())?;
        set("projections", self.projections.map(|k| k.to_string()))?;
        set("consensus_raw", self.consensus_raw.then(|| "true".into()))?;
        set("encode", self.no_encode.then(|| "false".into()))?;
        set("chain", self.chain.clone())?;
        set("base", self.base.map(|b| b.to_string()))?;
        set("depth", self.depth.map(|d| d.to_string()))?;
        set("seed", self.seed.map(|s| s.to_string()))?;
        set("alpha", self.alpha.map(|a| a.to_string()))?;
        set("bins", self.bins.map(|b| b.to_string()))?;
        if let Some(p) = &self.input {
            cfg.input = Some(p.clone());
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// `iris` or `uniform`.
    name: String,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Random projections in the consensus.
    #[arg(long, default_value_t = 100)]
    projections: usize,

    /// `average` or `single`.
    #[arg(long, default_value = "average")]
    linkage: String,

    /// Build the reference hierarchies on only the first N rows (uniform only).
    #[arg(long, value_name = "N")]
    subsample: Option<usize>,

    /// Output directory (default: $BAIRECLUST_OUT, else the current directory).
    #[arg(long, short = 'o', value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

fn print_lines<S: AsRef<str>>(lines: impl IntoIterator<Item = S>) -> Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for l in lines {
        writeln!(out, "{}", l.as_ref()).map_err(|e| Error::io("<stdout>", e))?;
    }
    out.flush().map_err(|e| Error::io("<stdout>", e))
}

fn print_paths(paths: Vec<PathBuf>) -> Result<()> {
    print_lines(paths.iter().map(|p| p.display().to_string()))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "--threads must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Stats(a) => print_paths(cmd_stats(&a.config()?)?),
        Command::Seriate(a) => print_paths(cmd_seriate(&a.config()?)?),
        Command::Encode(a) => print_paths(cmd_encode(&a.config()?)?),
        Command::Cluster { args, prefix: None } => print_paths(cmd_cluster(&args.config()?)?),
        Command::Cluster {
            args,
            prefix: Some(p),
        }
        | Command::Members { args, prefix: p } => {
            print_lines(cmd_members(&args.config()?, &parse_prefix(&p)?)?)
        }
        Command::Experiments(a) => {
            let opts = ExperimentOptions {
                projections: a.projections,
                linkage: a.linkage.parse::<Linkage>()?,
                subsample: a.subsample,
            };
            let out_dir = a
                .out_dir
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let text = cmd_experiments(&a.name, a.seed, &opts, &out_dir)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("baireclust: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
