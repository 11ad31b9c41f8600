use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cubemr::datagen::generate;
use cubemr::io::{diff_cubes, load_config, read_dataset, write_cube};
use cubemr::sim::write_stats_jsonl;
use cubemr::{
    batched_materialize, broadcast_materialize, layered_materialize, render_stats, Error,
    SimConfig, ValueDictionary,
};

const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Data cube materialization on a simulated MapReduce cluster.
///
/// Exit codes: 0 success, 1 verification mismatch, 2 usage error,
/// 3 runtime error.
#[derive(Debug, Parser)]
#[command(name = "cubemr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Materialize the cube of a dataset and print per-phase run stats.
    Materialize(MaterializeArgs),
    /// Compare two cube files; exit 0 iff they hold the same counts.
    Verify(VerifyArgs),
    /// Write a seeded synthetic dataset for a config.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algorithm {
    Broadcast,
    Layered,
    Batched,
}

#[derive(Debug, Args)]
struct MaterializeArgs {
    /// Schema and grouping config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Input dataset (TSV with header).
    #[arg(long)]
    input: PathBuf,
    /// Output cube file (TSV, `*` for aggregated cells).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Algorithm::Batched)]
    algorithm: Algorithm,
    /// Number of simulated machines.
    #[arg(long, default_value_t = 16)]
    machines: usize,
    /// Seed for the shard hash.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only write segments with |count| >= this value.
    #[arg(long)]
    threshold: Option<u64>,
    /// Also write stats as JSON lines, one record per phase.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Reducer worker threads (does not change results).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Spill inter-phase outputs larger than this many rows to disk.
    #[arg(long, default_value_t = cubemr::sim::DEFAULT_SPILL_THRESHOLD)]
    spill_threshold: usize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    a: PathBuf,
    b: PathBuf,
    /// How many discrepancies to print.
    #[arg(long, default_value_t = 10)]
    max_print: usize,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Config with dimensions and optional per-dimension cardinalities/skew.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    rows: u64,
    /// Override the Zipf exponent of every dimension.
    #[arg(long)]
    skew: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Materialize(args) => materialize(&args),
        Command::Verify(args) => verify(&args),
        Command::Generate(args) => generate_cmd(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            context: format!("creating {}", path.display()),
            source: e,
        })
}

fn materialize(args: &MaterializeArgs) -> Result<ExitCode, Error> {
    let config = load_config(&args.config)?;
    let sim = SimConfig {
        machines: args.machines,
        seed: args.seed,
        spill_threshold: args.spill_threshold,
        workers: args.workers,
    };
    sim.validate()?;
    let mut dict = ValueDictionary::for_schema(&config.schema);
    let rows = read_dataset(&args.input, &config.schema, &mut dict)?;
    let (cube, stats) = match args.algorithm {
        Algorithm::Broadcast => broadcast_materialize(&config.schema, rows)?,
        Algorithm::Layered => layered_materialize(&config.schema, rows, &sim)?,
        Algorithm::Batched => batched_materialize(&config.schema, &config.grouping, rows, &sim)?,
    };
    let written = write_cube(&args.output, &config.schema, &dict, &cube, args.threshold)?;

    print!("{}", render_stats(&stats));
    if let Some(path) = &args.stats {
        let mut out = create(path)?;
        write_stats_jsonl(&stats, &mut out)?;
        out.flush().map_err(|e| Error::Io {
            context: format!("writing {}", path.display()),
            source: e,
        })?;
    }
    eprintln!(
        "cube: {} segments, {written} written to {}",
        cube.len(),
        args.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(args: &VerifyArgs) -> Result<ExitCode, Error> {
    let diffs = diff_cubes(&args.a, &args.b)?;
    if diffs.is_empty() {
        println!("identical");
        return Ok(ExitCode::SUCCESS);
    }
    println!("{} discrepancies", diffs.len());
    for d in diffs.iter().take(args.max_print) {
        println!("  {d}");
    }
    Ok(ExitCode::from(EXIT_MISMATCH))
}

fn generate_cmd(args: &GenerateArgs) -> Result<ExitCode, Error> {
    let mut config = load_config(&args.config)?;
    if let Some(skew) = args.skew {
        for p in &mut config.profiles {
            p.skew = skew;
        }
    }
    let out = create(&args.output)?;
    let mut out = generate(&config.schema, &config.profiles, args.rows, args.seed, out)?;
    out.flush().map_err(|e| Error::Io {
        context: format!("writing {}", args.output.display()),
        source: e,
    })?;
    Ok(ExitCode::SUCCESS)
}
