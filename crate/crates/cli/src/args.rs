use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Two-parameter persistent homology of point clouds with a rank function,
/// and statistics on the resulting invariants.
#[derive(Debug, Parser)]
#[command(name = "biperstat", version, propagate_version = true)]
pub struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a point cloud and write it as CSV.
    Gen(GenArgs),
    /// Build the function-Rips bifiltration of a point cloud.
    Bifiltration(BifArgs),
    /// Hilbert function of a point cloud on a grid.
    Hilbert(HilbertArgs),
    /// Bigraded Betti numbers of a point cloud on a grid.
    Betti(HilbertArgs),
    /// Barcode of the slice of a point cloud's module along a line.
    Slice(SliceArgs),
    /// Bottleneck distance between two diagram files.
    Bottleneck(BottleneckArgs),
    /// Matching distance between two point clouds.
    Matchdist(MatchdistArgs),
    /// Pixelwise test of two groups of Hilbert grids.
    StatsPixels(StatsPixelsArgs),
    /// Bootstrap test of between-group against within-group matching distances.
    StatsMatchdist(StatsMatchdistArgs),
    /// Bootstrap test of mean bar lengths.
    StatsBarlength(StatsBarlengthArgs),
    /// Matching distances along a replacement schedule.
    ExperimentReplace(ReplaceArgs),
    /// Pixelwise stability of Hilbert grids under replacement.
    ExperimentStability(StabilityArgs),
    /// Experiments, nested form: `experiment replace` / `experiment stability`.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
    },
    /// Render a Hilbert grid (with optional Betti dots and significance mask)
    /// or a replacement series as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    Replace(ReplaceArgs),
    Stability(StabilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CloudKind {
    /// Independent normal coordinates.
    Gaussian,
    /// Gaussian mixture with planted cluster centers.
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankMode {
    /// Point i gets rank i + 1.
    Identity,
    /// A seeded random permutation.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PercentileArg {
    Pooled,
    PerPixel,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of points.
    #[arg(long)]
    pub n: usize,
    /// Ambient dimension.
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CloudKind::Gaussian)]
    pub kind: CloudKind,
    /// Cluster count for `--kind clustered`.
    #[arg(long, default_value_t = 4)]
    pub clusters: usize,
    /// Standard deviation of cluster centers.
    #[arg(long, default_value_t = 0.8)]
    pub center_sd: f64,
    /// Standard deviation of points around their center.
    #[arg(long, default_value_t = 0.6)]
    pub spread_sd: f64,
    /// Coordinate mean for `--kind gaussian`.
    #[arg(long, default_value_t = 0.0)]
    pub mean: f64,
    /// Coordinate standard deviation for `--kind gaussian`.
    #[arg(long, default_value_t = 1.0)]
    pub sd: f64,
    #[arg(long, value_enum, default_value_t = RankMode::Identity)]
    pub ranks: RankMode,
    #[arg(long)]
    pub out: PathBuf,
}

/// Grid placement shared by the commands that coarsen.
#[derive(Debug, Args, Clone)]
pub struct GridArgs {
    /// Bins as MxN (function x scale).
    #[arg(long, value_name = "MxN", value_parser = parse_bins, default_value = "20x20")]
    pub bins: (usize, usize),
    /// Function range `lo,hi` (default: range of the cloud's ranks).
    #[arg(long, value_parser = parse_pair)]
    pub func_range: Option<(f64, f64)>,
    /// Largest scale on the grid (default: diameter of the input).
    #[arg(long)]
    pub max_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BifArgs {
    /// Point cloud CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Top simplex dimension, 1 or 2.
    #[arg(long, default_value_t = 2)]
    pub max_dim: usize,
    /// Leave out edges of length >= this.
    #[arg(long)]
    pub max_scale: Option<f64>,
    /// Coarsen onto an MxN grid over the cloud's ranks and scales.
    #[arg(long, value_name = "MxN", value_parser = parse_bins)]
    pub bins: Option<(usize, usize)>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HilbertArgs {
    /// Point cloud CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Homology degree, 0 or 1.
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an SVG rendering here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    /// Point cloud CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    /// Line angle in degrees, strictly between 0 and 90.
    #[arg(long, default_value_t = 45.0)]
    pub angle: f64,
    /// Signed offset `cos(angle) eps - sin(angle) alpha` of the line.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub offset: f64,
    /// Coarsen onto an MxN grid before slicing.
    #[arg(long, value_name = "MxN", value_parser = parse_bins)]
    pub bins: Option<(usize, usize)>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BottleneckArgs {
    /// Diagram file (`degree birth death` per line).
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Degree to read from both files.
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
}

#[derive(Debug, Args)]
pub struct MatchdistArgs {
    /// Point cloud CSV.
    #[arg(long)]
    pub a: PathBuf,
    /// Point cloud CSV.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    #[arg(long, default_value_t = 20)]
    pub angles: usize,
    #[arg(long, default_value_t = 20)]
    pub offsets: usize,
    /// Coarsen both clouds onto a shared MxN grid.
    #[arg(long, value_name = "MxN", value_parser = parse_bins)]
    pub bins: Option<(usize, usize)>,
    /// Rescale the rectangle of grades to the unit square.
    #[arg(long)]
    pub normalize: bool,
    /// Per-line table CSV (default: stdout after the value).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Slice diagram of `--a` on the realizing line.
    #[arg(long)]
    pub diagram_a: Option<PathBuf>,
    /// Slice diagram of `--b` on the realizing line.
    #[arg(long)]
    pub diagram_b: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsPixelsArgs {
    /// Hilbert grid CSVs of the tested group (comma separated or repeated).
    #[arg(long, visible_alias = "observed", value_delimiter = ',', num_args = 1.., required = true)]
    pub wiki: Vec<PathBuf>,
    /// Hilbert grid CSVs of the reference group; the null comes from splits of it.
    #[arg(long, visible_alias = "reference", value_delimiter = ',', num_args = 1.., required = true)]
    pub rand: Vec<PathBuf>,
    /// Degree recorded in the grids.
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    /// Random splits for the null.
    #[arg(long, default_value_t = 500)]
    pub experiments: usize,
    #[arg(long, value_enum, default_value_t = PercentileArg::Pooled)]
    pub percentile: PercentileArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-pixel report CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Human-readable summary (default: stdout).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Mean Hilbert grid of the tested group with significant pixels outlined.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsMatchdistArgs {
    /// Within-group distances, one per line.
    #[arg(long)]
    pub within: PathBuf,
    /// Between-group distances, one per line.
    #[arg(long)]
    pub observed: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report CSV (`value,exceeds`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsBarlengthArgs {
    /// Bar lengths of the null side, one per line.
    #[arg(long)]
    pub null: PathBuf,
    /// Observed bar lengths, one per line.
    #[arg(long)]
    pub observed: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report text.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplaceArgs {
    /// Base point cloud CSV.
    #[arg(long)]
    pub base: PathBuf,
    /// Pool of replacement points (CSV).
    #[arg(long)]
    pub pool: PathBuf,
    /// Strictly increasing replacement counts, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub schedule: Vec<usize>,
    #[arg(long, value_name = "MxN", value_parser = parse_bins, default_value = "20x20")]
    pub bins: (usize, usize),
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    #[arg(long, default_value_t = 20)]
    pub angles: usize,
    #[arg(long, default_value_t = 20)]
    pub offsets: usize,
    /// Report distances in grade units instead of the unit square.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Series CSV (`n,distance,realizing_angle,realizing_offset`).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a step plot here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Original point cloud CSVs (comma separated or repeated).
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub originals: Vec<PathBuf>,
    /// Pool of replacement points (CSV).
    #[arg(long)]
    pub pool: PathBuf,
    /// Replacement count of each replaced dataset (default 1..=30).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub replacements: Vec<usize>,
    #[arg(long, value_name = "MxN", value_parser = parse_bins, default_value = "20x20")]
    pub bins: (usize, usize),
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    #[arg(long, default_value_t = 20)]
    pub angles: usize,
    #[arg(long, default_value_t = 20)]
    pub offsets: usize,
    #[arg(long)]
    pub no_normalize: bool,
    /// Random splits for the null.
    #[arg(long, default_value_t = 500)]
    pub experiments: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-pixel report CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Distance trace CSV (`replacements,distance`).
    #[arg(long)]
    pub distances: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Hilbert grid CSV.
    #[arg(long, required_unless_present = "series", conflicts_with = "series")]
    pub hilbert: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    /// Betti grid CSV drawn as dots.
    #[arg(long)]
    pub betti: Option<PathBuf>,
    /// Pixel report CSV whose significant pixels are outlined.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Replacement series CSV drawn as a step plot.
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_bins(s: &str) -> Result<(usize, usize), String> {
    let (m, n) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxN, got `{s}`"))?;
    let m: usize = m.trim().parse().map_err(|_| format!("bad bin count `{m}`"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("bad bin count `{n}`"))?;
    if m == 0 || n == 0 {
        return Err("bin counts must be positive".into());
    }
    Ok((m, n))
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(format!("need finite lo < hi, got {a},{b}"));
    }
    Ok((a, b))
}
