use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, ValueEnum};
use spinprice_core::dynamics::log_checkpoints;
use spinprice_core::experiments::BinWidth;
use spinprice_core::{Estimator, Execution, SimConfig};

use crate::output::{Format, OutputSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Pooled price distribution for several dimensions
    Fig1,
    /// Price distribution of a ring at every checkpoint
    Fig3,
    /// Peak price against time on a ring
    Fig4,
    /// Domain-wall count against time on a ring
    Fig5,
    /// Final peak price against ring size
    Fig6,
    /// Price variance against dimension
    Fig7,
    /// Every observable for the configuration given on the command line
    Custom,
}

pub const FIG1_DIMENSIONS: [f64; 5] = [1.0, 1.2, 1.6, 2.2, 3.0];
pub const FIG6_SIZES: [usize; 4] = [256, 512, 1024, 2048];

/// Dense near the integer dimensions, where the variance curve bends.
pub fn fig7_dimensions() -> Vec<f64> {
    let mut grid: Vec<f64> = (10..=32).map(|k| k as f64 / 10.0).collect();
    grid.extend([1.95, 2.05, 2.95, 3.05]);
    grid.sort_by(f64::total_cmp);
    grid
}

#[derive(Debug, Parser)]
#[command(
    name = "spinprice",
    version,
    about = "Spin-pair market simulator: local prices on a ring with long-range links"
)]
struct Args {
    #[arg(long, value_enum, default_value = "custom")]
    experiment: Experiment,

    /// Ring size
    #[arg(long, default_value_t = 1024)]
    nodes: usize,

    /// Number of long-range offsets m (each adds two neighbors)
    #[arg(long)]
    extra_neighbors: Option<usize>,

    /// Relative weight of a long-range neighbor, in [0, 1]; defaults to 1 when links are present
    #[arg(long)]
    q: Option<f64>,

    /// Effective dimension 1 + q m / 2; m and q are chosen by the fewest-links rule
    #[arg(long, conflicts_with_all = ["extra_neighbors", "q"])]
    dimension: Option<f64>,

    #[arg(long, default_value_t = 10_000)]
    sweeps: u64,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    #[arg(long, default_value_t = 16)]
    replicas: usize,

    /// Explicit long-range offsets, comma separated, strictly increasing
    #[arg(long, value_delimiter = ',')]
    offsets: Option<Vec<usize>>,

    /// Checkpoints per decade of sweeps
    #[arg(long, default_value_t = 2)]
    per_decade: u32,

    /// Dimension grid for fig1 and fig7, comma separated
    #[arg(long, value_delimiter = ',')]
    dimensions: Option<Vec<f64>>,

    /// Ring sizes for fig6, comma separated
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,

    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long, value_enum, default_value = "csv")]
    format: Format,

    /// Overwrite existing output files
    #[arg(long)]
    force: bool,

    /// Also write gnuplot data blocks (.dat)
    #[arg(long)]
    plot_data: bool,

    /// Histogram bin width in price units, or "auto" for Scott's rule
    #[arg(long, default_value = "auto", value_parser = parse_bin_width)]
    bin_width: BinWidth,

    /// Odd moving-average window applied before peak and mode search
    #[arg(long, default_value_t = 3)]
    smooth_window: usize,

    /// Run replicas on one thread (results are identical either way)
    #[arg(long)]
    serial: bool,
}

fn parse_bin_width(s: &str) -> Result<BinWidth, String> {
    if s == "auto" {
        return Ok(BinWidth::Scott);
    }
    match s.parse::<u64>() {
        Ok(w) if w > 0 => Ok(BinWidth::Fixed(w)),
        _ => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
    }
}

/// Everything a run needs, resolved from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub experiment: Experiment,
    pub config: SimConfig,
    pub output: OutputSpec,
    pub estimator: Estimator,
    pub execution: Execution,
    pub dimensions: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
}

/// Parses `argv` (program name first). Errors are clap errors, so
/// `error.exit()` prints usage and exits with status 2 (0 for `--help`).
pub fn parse_cli<I, T>(argv: I) -> Result<Invocation, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    resolve(args).map_err(|msg| Args::command().error(ErrorKind::ValueValidation, msg))
}

fn resolve(args: Args) -> Result<Invocation, String> {
    if let Some(q) = args.q {
        if !(0.0..=1.0).contains(&q) {
            return Err(format!("--q must lie in [0, 1], got {q}"));
        }
    }
    if args.smooth_window == 0 || args.smooth_window.is_multiple_of(2) {
        return Err(format!("--smooth-window must be odd, got {}", args.smooth_window));
    }
    if args.per_decade == 0 {
        return Err("--per-decade must be positive".into());
    }
    let mut config = SimConfig {
        n_nodes: args.nodes,
        sweeps: args.sweeps,
        seed: args.seed,
        replicas: args.replicas,
        checkpoints: log_checkpoints(args.sweeps, args.per_decade),
        ..SimConfig::default()
    };
    if let Some(d) = args.dimension {
        config = config.with_dimension(d).map_err(|e| format!("--dimension: {e}"))?;
    } else {
        let m = args
            .extra_neighbors
            .or(args.offsets.as_ref().map(Vec::len))
            .unwrap_or(0);
        config.m_extra = m;
        config.q = args.q.unwrap_or(if m > 0 { 1.0 } else { 0.0 });
    }
    config.offsets = args.offsets;
    config.validate().map_err(|e| e.to_string())?;
    Ok(Invocation {
        experiment: args.experiment,
        config,
        output: OutputSpec {
            dir: args.out,
            format: args.format,
            emit_plot_data: args.plot_data,
            force: args.force,
        },
        estimator: Estimator {
            bin_width: args.bin_width,
            smooth_window: args.smooth_window,
            ..Estimator::default()
        },
        execution: if args.serial {
            Execution::Serial
        } else {
            Execution::Parallel
        },
        dimensions: args.dimensions,
        sizes: args.sizes,
    })
}
