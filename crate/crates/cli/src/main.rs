//! Command-line driver for breeding sweeps, single runs, Wigner grids and bound tables.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gridbreed::breeding::{self, run_protocol, BredMode, MeasurementRecord, Protocol, Sampled};
use gridbreed::experiments::{
    bounds_table, calibrated_kappa0, corrected_state, emit_csv, emit_wigner, mises_repetitions, run_sweep, stream_rng,
    BreedReport, SweepConfig, Variant,
};
use gridbreed::gaussian_state::WignerSpec;
use gridbreed::mises::save_trajectories_csv;

#[derive(Parser)]
#[command(name = "gridbreed", version, about = "Simulate breeding of approximate grid states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean effective squeezing per variant and round count, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write every von Mises trajectory, one CSV per round count.
        #[arg(long)]
        trajectories: bool,
    },
    /// One seeded run; writes the measurement record and a squeezing report.
    Breed {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Wigner function of a fresh or recorded run on a square grid.
    Wigner {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        /// Rebuild the state from this record instead of running the protocol.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Skip the correcting displacement.
        #[arg(long)]
        raw: bool,
        /// Half-width of the grid in both quadratures.
        #[arg(long, default_value_t = 4.0)]
        range: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Output file name inside the output directory; `.json` selects JSON.
        #[arg(long, default_value = "wigner.csv")]
        file: String,
    },
    /// Rebuild a recorded run and print its squeezing report.
    Replay {
        record: PathBuf,
    },
    /// Tabulate the improvement-probability and variance bounds.
    Bounds {
        #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 20.0])]
        kappa: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5])]
        epsilon: Vec<f64>,
    },
}

/// Sweep parameters; flags override the config file.
#[derive(Args)]
struct Common {
    /// JSON sweep configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest round count of a sweep, or the round count of a single run.
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated subset of breeding,mises,postselect,lower.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    variants: Option<Vec<Variant>>,
    /// Output directory.
    #[arg(long, env = "GRIDBREED_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = ProtocolArg::Efficient)]
    protocol: ProtocolArg,
    /// Force every homodyne outcome to zero.
    #[arg(long)]
    postselect: bool,
    /// Use unshifted cats `(1 + D(alpha)) S(delta)|vac>`.
    #[arg(long)]
    no_preshift: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Slow,
    Efficient,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Slow => Protocol::Slow,
            ProtocolArg::Efficient => Protocol::Efficient,
        }
    }
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}

impl Common {
    fn resolve(&self) -> Result<SweepConfig> {
        let mut c = match &self.config {
            Some(path) => SweepConfig::load(path)?,
            None => SweepConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.rounds {
            c.rounds_max = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.xi {
            c.xi = v;
        }
        if let Some(v) = self.reps {
            c.repetitions = v;
        }
        if let Some(v) = &self.variants {
            c.variants = v.clone();
        }
        if let Some(v) = &self.out {
            c.output_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn output_dir(config: &SweepConfig) -> Result<&Path> {
    let dir = config.output_dir.as_path();
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

/// Same stream as repetition 0 of the matching sweep row.
fn single_run(config: &SweepConfig, run: &RunArgs) -> Result<(BredMode, MeasurementRecord)> {
    let mut pc = config.protocol_config(config.rounds_max);
    pc.preshift = config.preshift && !run.no_preshift;
    let protocol = Protocol::from(run.protocol);
    if run.postselect {
        return Ok(breeding::post_select_run(&pc, protocol)?);
    }
    let mut rng = stream_rng(config.seed, Variant::Breeding, config.rounds_max, 0);
    Ok(run_protocol(&pc, protocol, &mut Sampled(&mut rng))?)
}

fn sweep(common: &Common, trajectories: bool) -> Result<()> {
    let config = common.resolve()?;
    let dir = output_dir(&config)?;
    let result = run_sweep(&config)?;
    let path = dir.join("sweep.csv");
    emit_csv(&result, &path)?;
    println!("{}", path.display());
    if trajectories && config.variants.contains(&Variant::Mises) {
        let kappa0 = calibrated_kappa0(&config)?;
        for m in 0..=config.rounds_max {
            let runs: Vec<_> = mises_repetitions(&config, m, kappa0)?.into_iter().enumerate().collect();
            let path = dir.join(format!("mises_trajectories_M{m}.csv"));
            save_trajectories_csv(&path, &runs)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn breed(common: &Common, run: &RunArgs) -> Result<()> {
    let config = common.resolve()?;
    let dir = output_dir(&config)?;
    let (mode, record) = single_run(&config, run)?;
    record.write(&dir.join("record.json"))?;
    let report = BreedReport::new(&mode, &record)?.to_json()?;
    let path = dir.join("report.json");
    std::fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
    println!("{report}");
    Ok(())
}

fn wigner(common: &Common, run: &RunArgs, record: Option<&Path>, raw: bool, range: f64, points: usize, file: &str) -> Result<()> {
    let config = common.resolve()?;
    if !(range.is_finite() && range > 0.0) || points < 2 {
        anyhow::bail!("grid needs a positive range and at least 2 points per axis");
    }
    let (mode, xi) = match record {
        Some(path) => {
            let (mode, rec) = gridbreed::experiments::replay(path)?;
            (mode, rec.xi)
        }
        None => (single_run(&config, run)?.0, config.xi),
    };
    let state = if raw { mode.state } else { corrected_state(&mode, xi)? };
    let spec = WignerSpec { q_range: (-range, range), p_range: (-range, range), q_points: points, p_points: points };
    let path = output_dir(&config)?.join(file);
    emit_wigner(&state, &spec, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn replay(record: &Path) -> Result<()> {
    let (mode, rec) = gridbreed::experiments::replay(record)?;
    println!("{}", BreedReport::new(&mode, &rec)?.to_json()?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Sweep { common, trajectories } => sweep(common, *trajectories),
        Command::Breed { common, run } => breed(common, run),
        Command::Wigner { common, run, record, raw, range, points, file } => {
            wigner(common, run, record.as_deref(), *raw, *range, *points, file)
        }
        Command::Replay { record } => replay(record),
        Command::Bounds { kappa, epsilon } => {
            print!("{}", bounds_table(kappa, epsilon)?);
            Ok(())
        }
    }
}
