//! End-to-end drivers: replacement series, bin-quantization study,
//! stability of Hilbert plots under replacement, and structured-vs-random
//! separation.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bifiltration::{build_function_rips, coarsen, Bifiltration};
use crate::bipersistence::{hilbert_function, HilbertGrid};
use crate::distance::{
    matching_from_slices, normalize_grades, slice_diagrams, LineGrid, MatchingDistanceResult, MatchingParams,
};
use crate::error::{input, Result};
use crate::geometry::{
    assign_ranks, distance_matrix, joint_diameter, replace_points, sample_clustered_cloud, sample_gaussian_cloud,
    GridSpec, PointCloud, RankOrder,
};
use crate::persistence::PersistenceDiagram;
use crate::rng::{derive_indexed, derive_seed};
use crate::stats::{
    cv_null, large_scale_test, matching_distance_test, percentile, MatchingTestReport, PercentileMode,
    PixelTestReport, ValueGrid,
};

/// Function-Rips bifiltration of `cloud` with simplices up to dimension
/// `degree + 1`, coarsened onto `grid`.
pub fn rips_on_grid(cloud: &PointCloud, degree: usize, grid: &GridSpec) -> Result<Bifiltration> {
    let raw = build_function_rips(cloud, &distance_matrix(cloud), degree + 1, None)?;
    Ok(coarsen(&raw, grid))
}

/// Grid over the function range of `base` and scales up to the largest
/// distance among the points of `base` and `pool` together, so that every
/// dataset of a replacement series lives on it.
pub fn series_grid(base: &PointCloud, pool: &PointCloud, m: usize, n: usize) -> Result<GridSpec> {
    GridSpec::for_cloud(base, joint_diameter(base, pool), m, n)
}

/// Slice diagrams of a set of bifiltrations on one line grid, reusable
/// across many comparisons.
pub struct Slicer {
    lines: LineGrid,
    grid: GridSpec,
    degree: usize,
    normalize: bool,
}

impl Slicer {
    pub fn new(grid: &GridSpec, degree: usize, params: &MatchingParams) -> Result<Self> {
        let rect = if params.normalize {
            ((0.0, 1.0), (0.0, 1.0))
        } else {
            (grid.func_range(), grid.scale_range())
        };
        Ok(Self {
            lines: LineGrid::new(rect, params.num_angles, params.num_offsets)?,
            grid: grid.clone(),
            degree,
            normalize: params.normalize,
        })
    }

    pub fn lines(&self) -> &LineGrid {
        &self.lines
    }

    pub fn slices(&self, cloud: &PointCloud) -> Result<Vec<PersistenceDiagram>> {
        let bif = rips_on_grid(cloud, self.degree, &self.grid)?;
        let bif = if self.normalize {
            normalize_grades(&bif, (self.grid.func_range(), self.grid.scale_range()))
        } else {
            bif
        };
        slice_diagrams(&bif, &self.lines, self.degree)
    }

    pub fn distance(&self, a: &[PersistenceDiagram], b: &[PersistenceDiagram]) -> Result<MatchingDistanceResult> {
        matching_from_slices(&self.lines, a, b)
    }
}

/// Matching distances between a base cloud and its nested replacements.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementSeries {
    pub schedule: Vec<usize>,
    pub distances: Vec<f64>,
    /// `(angle_deg, offset)` of the realizing line of each distance.
    pub realizing: Vec<(f64, f64)>,
    pub grid: GridSpec,
}

impl ReplacementSeries {
    /// `n,distance,realizing_angle,realizing_offset`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,distance,realizing_angle,realizing_offset\n");
        for ((n, d), (a, o)) in self.schedule.iter().zip(&self.distances).zip(&self.realizing) {
            let _ = writeln!(out, "{n},{d},{a},{o}");
        }
        out
    }
}

/// For each `k` in `schedule`, replace `k` points of `base` by points of
/// `pool` (nested in `k` for a fixed seed) and compute the matching
/// distance to `base` on `grid`.
pub fn run_replacement_series(
    base: &PointCloud,
    pool: &PointCloud,
    schedule: &[usize],
    grid: &GridSpec,
    degree: usize,
    params: &MatchingParams,
    seed: u64,
) -> Result<ReplacementSeries> {
    if schedule.is_empty() {
        return input("schedule is empty");
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return input(format!("schedule {schedule:?} is not strictly increasing"));
    }
    let last = *schedule.last().expect("nonempty");
    if last > base.len() || last > pool.len() {
        return input(format!(
            "schedule reaches {last} but base has {} and pool {} points",
            base.len(),
            pool.len()
        ));
    }
    let slicer = Slicer::new(grid, degree, params)?;
    let base_slices = slicer.slices(base)?;
    let results: Vec<(f64, (f64, f64))> = schedule
        .par_iter()
        .map(|&k| {
            let cloud = replace_points(base, pool, k, seed)?;
            let r = slicer.distance(&base_slices, &slicer.slices(&cloud)?)?;
            let l = r.realizing_line();
            Ok((r.value, (l.angle_deg(), l.offset())))
        })
        .collect::<Result<_>>()?;
    Ok(ReplacementSeries {
        schedule: schedule.to_vec(),
        distances: results.iter().map(|r| r.0).collect(),
        realizing: results.iter().map(|r| r.1).collect(),
        grid: grid.clone(),
    })
}

/// Maximal runs of consecutive values that differ by at most `tol` from
/// their predecessor. Levels are run medians and steps the absolute
/// differences of consecutive levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateaus {
    pub levels: Vec<f64>,
    pub lengths: Vec<usize>,
    pub steps: Vec<f64>,
    pub median_step: Option<f64>,
}

pub fn detect_plateaus(values: &[f64], tol: f64) -> Plateaus {
    let mut runs: Vec<Vec<f64>> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if (v - values[k - 1]).abs() <= tol => run.push(v),
            _ => runs.push(vec![v]),
        }
    }
    let levels: Vec<f64> = runs.iter().map(|r| percentile(r, 0.5)).collect();
    let steps: Vec<f64> = levels.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let median_step = (!steps.is_empty()).then(|| percentile(&steps, 0.5));
    Plateaus {
        lengths: runs.iter().map(Vec::len).collect(),
        levels,
        steps,
        median_step,
    }
}

/// Plateau tolerance for a grid: a quarter of one scale bin, in the units
/// distances are reported in.
pub fn plateau_tolerance(grid: &GridSpec, normalize: bool) -> f64 {
    let step = grid.eps_step();
    let (lo, hi) = grid.scale_range();
    0.25 * if normalize { step / (hi - lo) } else { step }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationStudy {
    pub bins: Vec<usize>,
    pub series: Vec<ReplacementSeries>,
    pub plateaus: Vec<Plateaus>,
    /// Median step of the first setting over that of the second.
    pub ratio: Option<f64>,
}

impl QuantizationStudy {
    /// `bins,n,distance` rows followed by a `bins,plateaus,median_step` summary.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bins,n,distance\n");
        for (b, s) in self.bins.iter().zip(&self.series) {
            for (n, d) in s.schedule.iter().zip(&s.distances) {
                let _ = writeln!(out, "{b},{n},{d}");
            }
        }
        out.push_str("bins,plateaus,median_step\n");
        for (b, p) in self.bins.iter().zip(&self.plateaus) {
            let step = p.median_step.map_or(String::from("NA"), |s| s.to_string());
            let _ = writeln!(out, "{b},{},{step}", p.levels.len());
        }
        out
    }
}

/// Replacement series of the same base, pool and seed at several square
/// bin counts, with plateau step sizes compared between the first two.
pub fn quantization_study(
    base: &PointCloud,
    pool: &PointCloud,
    schedule: &[usize],
    bins: &[usize],
    degree: usize,
    params: &MatchingParams,
    seed: u64,
) -> Result<QuantizationStudy> {
    if bins.len() < 2 {
        return input("quantization study needs at least two bin settings");
    }
    let top = joint_diameter(base, pool);
    let mut series = Vec::new();
    let mut plateaus = Vec::new();
    for &b in bins {
        let grid = GridSpec::for_cloud(base, top, b, b)?;
        let s = run_replacement_series(base, pool, schedule, &grid, degree, params, seed)?;
        plateaus.push(detect_plateaus(&s.distances, plateau_tolerance(&grid, params.normalize)));
        series.push(s);
    }
    let ratio = match (plateaus[0].median_step, plateaus[1].median_step) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    Ok(QuantizationStudy {
        bins: bins.to_vec(),
        series,
        plateaus,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityStudy {
    pub report: PixelTestReport,
    /// `(replacements, distance)` for each replaced dataset, in input order.
    pub distances: Vec<(usize, f64)>,
    /// Places where the trace, sorted by replacement count, drops by more
    /// than the plateau tolerance.
    pub monotonicity_violations: usize,
}

/// Hilbert grids of the originals give a cross-validated null; dataset `k`
/// replaces `replacements[k]` points of original `k mod len` by pool points
/// and the replaced group is tested pixelwise against the originals. Also
/// records the matching distance of each replaced dataset to its original.
#[allow(clippy::too_many_arguments)]
pub fn stability_study(
    originals: &[PointCloud],
    pool: &PointCloud,
    replacements: &[usize],
    grid: &GridSpec,
    degree: usize,
    params: &MatchingParams,
    null_experiments: usize,
    seed: u64,
) -> Result<StabilityStudy> {
    if originals.len() < 4 || replacements.len() < 2 {
        return input("need at least 4 originals and 2 replaced datasets");
    }
    let hilbert = |c: &PointCloud| -> Result<ValueGrid> {
        let bif = rips_on_grid(c, degree, grid)?;
        Ok(ValueGrid::from_hilbert(&hilbert_function(&bif, grid, degree)?))
    };
    let orig_grids: Vec<ValueGrid> = originals.par_iter().map(hilbert).collect::<Result<_>>()?;
    let half = originals.len() / 2;
    let null = cv_null(
        &orig_grids,
        null_experiments,
        (half, originals.len() - half),
        PercentileMode::Pooled,
        derive_seed(seed, "stability/null"),
    )?;
    let replaced: Vec<PointCloud> = replacements
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            replace_points(
                &originals[k % originals.len()],
                pool,
                r,
                derive_indexed(seed, "stability/replace", k as u64),
            )
        })
        .collect::<Result<_>>()?;
    let rep_grids: Vec<ValueGrid> = replaced.par_iter().map(hilbert).collect::<Result<_>>()?;
    let report = large_scale_test(&rep_grids, &orig_grids, &null)?;

    let slicer = Slicer::new(grid, degree, params)?;
    let orig_slices: Vec<Vec<PersistenceDiagram>> =
        originals.par_iter().map(|c| slicer.slices(c)).collect::<Result<_>>()?;
    let distances: Vec<(usize, f64)> = replaced
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let d = slicer.distance(&orig_slices[k % originals.len()], &slicer.slices(c)?)?;
            Ok((replacements[k], d.value))
        })
        .collect::<Result<_>>()?;
    let mut trace = distances.clone();
    trace.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let tol = plateau_tolerance(grid, params.normalize);
    let monotonicity_violations = trace.windows(2).filter(|w| w[1].1 < w[0].1 - tol).count();
    Ok(StabilityStudy {
        report,
        distances,
        monotonicity_violations,
    })
}

/// Settings of one structured-vs-random separation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub n_points: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Number of disjoint random-random pairs in the null, and of
    /// structured-random comparisons.
    pub pairs: usize,
    pub degree: usize,
    pub bins: usize,
    pub params: MatchingParams,
    pub bootstrap: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            n_points: 60,
            dim: 20,
            clusters: 4,
            pairs: 10,
            degree: 0,
            bins: 20,
            params: MatchingParams {
                normalize: true,
                ..MatchingParams::default()
            },
            bootstrap: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationRun {
    /// Distances between disjoint pairs of random clouds.
    pub within: Vec<f64>,
    /// Distances between the structured cloud and random clouds.
    pub between: Vec<f64>,
    pub test: MatchingTestReport,
    /// At least 95% of the between-group distances exceed the null's 95th percentile.
    pub separated: bool,
}

/// Standard-normal clouds vs one Gaussian mixture with the same coordinate
/// variance (cluster centers sd 0.8, points sd 0.6 around them). Every cloud
/// gets uniformly random ranks.
pub fn separation_run(cfg: &SeparationConfig, seed: u64) -> Result<SeparationRun> {
    if cfg.pairs == 0 {
        return input("need at least one pair");
    }
    let ranked = |c: PointCloud, k: u64| assign_ranks(&c, &RankOrder::Seed(derive_indexed(seed, "separation/ranks", k)));
    let randoms: Vec<PointCloud> = (0..2 * cfg.pairs)
        .map(|k| {
            let c = sample_gaussian_cloud(
                cfg.n_points,
                cfg.dim,
                0.0,
                1.0,
                derive_indexed(seed, "separation/random", k as u64),
            )?;
            ranked(c, k as u64)
        })
        .collect::<Result<_>>()?;
    let structured = ranked(
        sample_clustered_cloud(
            cfg.n_points,
            cfg.dim,
            cfg.clusters,
            0.8,
            0.6,
            derive_seed(seed, "separation/structured"),
        )?,
        u64::MAX,
    )?;
    let top = randoms
        .iter()
        .chain(std::iter::once(&structured))
        .map(|c| distance_matrix(c).max())
        .fold(0.0, f64::max);
    let grid = GridSpec::for_cloud(&structured, top, cfg.bins, cfg.bins)?;
    let slicer = Slicer::new(&grid, cfg.degree, &cfg.params)?;
    let rs: Vec<Vec<PersistenceDiagram>> = randoms.par_iter().map(|c| slicer.slices(c)).collect::<Result<_>>()?;
    let ss = slicer.slices(&structured)?;
    let within: Vec<f64> = (0..cfg.pairs)
        .into_par_iter()
        .map(|k| Ok(slicer.distance(&rs[2 * k], &rs[2 * k + 1])?.value))
        .collect::<Result<_>>()?;
    let between: Vec<f64> = (0..cfg.pairs)
        .into_par_iter()
        .map(|k| Ok(slicer.distance(&ss, &rs[2 * k])?.value))
        .collect::<Result<_>>()?;
    let test = matching_distance_test(&within, &between, cfg.bootstrap, derive_seed(seed, "separation/bootstrap"))?;
    Ok(SeparationRun {
        separated: test.fraction >= 0.95,
        within,
        between,
        test,
    })
}

/// Hilbert grids of a list of clouds on a shared grid.
pub fn hilbert_grids(clouds: &[PointCloud], grid: &GridSpec, degree: usize) -> Result<Vec<HilbertGrid>> {
    clouds
        .par_iter()
        .map(|c| hilbert_function(&rips_on_grid(c, degree, grid)?, grid, degree))
        .collect()
}
