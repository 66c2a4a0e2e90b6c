mod args;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biperstat::bifiltration::{build_function_rips, coarsen, Bifiltration};
use biperstat::bipersistence::{bigraded_betti, hilbert_function, slice_barcode, BettiGrid, HilbertGrid, SliceLine};
use biperstat::distance::{bottleneck_distance, matching_distance, MatchingParams};
use biperstat::experiments::{run_replacement_series, series_grid, stability_study};
use biperstat::geometry::{
    assign_ranks, distance_matrix, joint_diameter, sample_clustered_cloud, sample_gaussian_cloud, GridSpec,
    PointCloud, RankOrder,
};
use biperstat::persistence::PersistenceDiagram;
use biperstat::plot::{hilbert_svg, series_svg};
use biperstat::rng::derive_seed;
use biperstat::stats::{bar_length_test, cv_null, large_scale_test, matching_distance_test, PercentileMode, ValueGrid};
use biperstat::Error;
use clap::Parser;

use crate::args::*;

/// Exit status 2: bad flags or bad input data. Exit status 1: anything else.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Internal(String),
}

type Res<T> = std::result::Result<T, Failure>;

/// Attribute a library error to the flag whose value caused it.
fn at(flag: &'static str) -> impl Fn(Error) -> Failure {
    move |e| match e {
        Error::Io(e) => Failure::Internal(format!("{flag}: {e}")),
        e => Failure::Usage(format!("{flag}: {e}")),
    }
}

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(Failure::Usage(msg.into()))
}

fn read(flag: &'static str, path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{flag}: cannot read {}: {e}", path.display())))
}

/// Write through a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Res<()> {
    let fail = |e: std::io::Error| Failure::Internal(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn read_cloud(flag: &'static str, path: &Path) -> Res<PointCloud> {
    PointCloud::from_csv(&read(flag, path)?).map_err(at(flag))
}

fn read_numbers(flag: &'static str, path: &Path) -> Res<Vec<f64>> {
    let text = read(flag, path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Failure::Usage(format!("{flag}: line {}: `{line}` is not a number", k + 1)))?;
        out.push(v);
    }
    if out.is_empty() {
        return usage(format!("{flag}: {} holds no numbers", path.display()));
    }
    Ok(out)
}

fn check_degree(degree: usize) -> Res<()> {
    if degree > 1 {
        return usage(format!("--degree: expected 0 or 1, got {degree}"));
    }
    Ok(())
}

fn raw_rips(flag: &'static str, cloud: &PointCloud, max_dim: usize, max_scale: Option<f64>) -> Res<Bifiltration> {
    build_function_rips(cloud, &distance_matrix(cloud), max_dim, max_scale).map_err(at(flag))
}

/// Grid over the union of the clouds' function ranges and scales up to `top`.
fn shared_grid(clouds: &[&PointCloud], top: f64, (m, n): (usize, usize)) -> Res<GridSpec> {
    let (lo, hi) = clouds
        .iter()
        .map(|c| c.func_range())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let hi = if hi > lo { hi } else { lo + 1.0 };
    GridSpec::new(m, n, (lo, hi), (0.0, if top > 0.0 { top } else { 1.0 })).map_err(at("--bins"))
}

fn gen(a: &GenArgs) -> Res<()> {
    let cloud = match a.kind {
        CloudKind::Gaussian => sample_gaussian_cloud(a.n, a.dim, a.mean, a.sd, derive_seed(a.seed, "gen/points")),
        CloudKind::Clustered => sample_clustered_cloud(
            a.n,
            a.dim,
            a.clusters,
            a.center_sd,
            a.spread_sd,
            derive_seed(a.seed, "gen/points"),
        ),
    }
    .map_err(at("--n/--dim"))?;
    let cloud = match a.ranks {
        RankMode::Identity => cloud,
        RankMode::Random => {
            assign_ranks(&cloud, &RankOrder::Seed(derive_seed(a.seed, "gen/ranks"))).map_err(at("--ranks"))?
        }
    };
    write_atomic(&a.out, &cloud.to_csv())
}

fn bifiltration(a: &BifArgs) -> Res<()> {
    let cloud = read_cloud("--input", &a.input)?;
    let bif = raw_rips("--max-dim", &cloud, a.max_dim, a.max_scale)?;
    let bif = match a.bins {
        Some(bins) => {
            let top = a.max_scale.unwrap_or_else(|| distance_matrix(&cloud).max());
            coarsen(&bif, &shared_grid(&[&cloud], top, bins)?)
        }
        None => bif,
    };
    write_atomic(&a.out, &bif.to_text())
}

fn grid_for(cloud: &PointCloud, g: &GridArgs) -> Res<GridSpec> {
    let top = g.max_scale.unwrap_or_else(|| distance_matrix(cloud).max());
    if !(top > 0.0) {
        return usage(format!("--max-scale: must be positive, got {top}"));
    }
    match g.func_range {
        Some(r) => GridSpec::new(g.bins.0, g.bins.1, r, (0.0, top)).map_err(at("--func-range")),
        None => shared_grid(&[cloud], top, g.bins),
    }
}

fn hilbert(a: &HilbertArgs) -> Res<()> {
    check_degree(a.degree)?;
    let cloud = read_cloud("--input", &a.input)?;
    let grid = grid_for(&cloud, &a.grid)?;
    let bif = coarsen(&raw_rips("--input", &cloud, a.degree + 1, a.grid.max_scale)?, &grid);
    let h = hilbert_function(&bif, &grid, a.degree).map_err(at("--input"))?;
    write_atomic(&a.out, &h.to_csv())?;
    if let Some(svg) = &a.svg {
        write_atomic(svg, &hilbert_svg(&h, None, None))?;
    }
    Ok(())
}

fn betti(a: &HilbertArgs) -> Res<()> {
    check_degree(a.degree)?;
    let cloud = read_cloud("--input", &a.input)?;
    let grid = grid_for(&cloud, &a.grid)?;
    let bif = coarsen(&raw_rips("--input", &cloud, a.degree + 1, a.grid.max_scale)?, &grid);
    let b = bigraded_betti(&bif, &grid, a.degree).map_err(at("--input"))?;
    write_atomic(&a.out, &b.to_csv())?;
    if let Some(svg) = &a.svg {
        let h = hilbert_function(&bif, &grid, a.degree).map_err(at("--input"))?;
        write_atomic(svg, &hilbert_svg(&h, Some(&b), None))?;
    }
    Ok(())
}

fn slice(a: &SliceArgs) -> Res<()> {
    check_degree(a.degree)?;
    let cloud = read_cloud("--input", &a.input)?;
    let line = SliceLine::new(a.angle, a.offset).map_err(at("--angle"))?;
    let bif = raw_rips("--input", &cloud, a.degree + 1, None)?;
    let bif = match a.bins {
        Some(bins) => coarsen(&bif, &shared_grid(&[&cloud], distance_matrix(&cloud).max(), bins)?),
        None => bif,
    };
    let d = slice_barcode(&bif, &line, a.degree).map_err(at("--input"))?;
    write_atomic(&a.out, &d.to_text())
}

fn bottleneck(a: &BottleneckArgs) -> Res<()> {
    let da = PersistenceDiagram::from_text(&read("--a", &a.a)?, a.degree).map_err(at("--a"))?;
    let db = PersistenceDiagram::from_text(&read("--b", &a.b)?, a.degree).map_err(at("--b"))?;
    let d = bottleneck_distance(&da, &db).map_err(at("--a/--b"))?;
    println!("{d}");
    Ok(())
}

fn params(angles: usize, offsets: usize, normalize: bool) -> Res<MatchingParams> {
    if angles == 0 {
        return usage("--angles: must be at least 1");
    }
    if offsets == 0 {
        return usage("--offsets: must be at least 1");
    }
    Ok(MatchingParams {
        num_angles: angles,
        num_offsets: offsets,
        normalize,
    })
}

fn matchdist(a: &MatchdistArgs) -> Res<()> {
    check_degree(a.degree)?;
    let p = params(a.angles, a.offsets, a.normalize)?;
    let ca = read_cloud("--a", &a.a)?;
    let cb = read_cloud("--b", &a.b)?;
    if ca.dim() != cb.dim() {
        return usage(format!("--b: dimension {} differs from --a dimension {}", cb.dim(), ca.dim()));
    }
    let mut ba = raw_rips("--a", &ca, a.degree + 1, None)?;
    let mut bb = raw_rips("--b", &cb, a.degree + 1, None)?;
    if let Some(bins) = a.bins {
        let grid = shared_grid(&[&ca, &cb], joint_diameter(&ca, &cb), bins)?;
        ba = coarsen(&ba, &grid);
        bb = coarsen(&bb, &grid);
    }
    let r = matching_distance(&ba, &bb, a.degree, &p).map_err(at("--a/--b"))?;
    let mut stdout = format!("{}\n", r.value);
    match &a.table {
        Some(path) => write_atomic(path, &r.table_csv())?,
        None => stdout.push_str(&r.table_csv()),
    }
    if let Some(path) = &a.diagram_a {
        write_atomic(path, &r.diagrams.0.to_text())?;
    }
    if let Some(path) = &a.diagram_b {
        write_atomic(path, &r.diagrams.1.to_text())?;
    }
    print!("{stdout}");
    Ok(())
}

fn read_grids(flag: &'static str, paths: &[PathBuf], degree: usize) -> Res<Vec<HilbertGrid>> {
    paths
        .iter()
        .map(|p| HilbertGrid::from_csv(&read(flag, p)?, degree).map_err(at(flag)))
        .collect()
}

fn stats_pixels(a: &StatsPixelsArgs) -> Res<()> {
    let wiki = read_grids("--wiki", &a.wiki, a.degree)?;
    let rand = read_grids("--rand", &a.rand, a.degree)?;
    if rand.len() < 4 {
        return usage(format!("--rand: need at least 4 grids for the null, got {}", rand.len()));
    }
    if a.experiments == 0 {
        return usage("--experiments: must be at least 1");
    }
    let mode = match a.percentile {
        PercentileArg::Pooled => PercentileMode::Pooled,
        PercentileArg::PerPixel => PercentileMode::PerPixel,
    };
    let vw: Vec<ValueGrid> = wiki.iter().map(ValueGrid::from_hilbert).collect();
    let vr: Vec<ValueGrid> = rand.iter().map(ValueGrid::from_hilbert).collect();
    let half = vr.len() / 2;
    let null = cv_null(&vr, a.experiments, (half, vr.len() - half), mode, derive_seed(a.seed, "stats-pixels/null"))
        .map_err(at("--rand"))?;
    let report = large_scale_test(&vw, &vr, &null).map_err(at("--wiki"))?;
    write_atomic(&a.out, &report.to_csv())?;
    let summary = format!("{}null mu {} sigma {}\n", report.summary(), null.mu, null.sigma);
    match &a.summary {
        Some(p) => write_atomic(p, &summary)?,
        None => print!("{summary}"),
    }
    if let Some(svg) = &a.svg {
        let first = &wiki[0];
        let values: Vec<u32> = (0..first.values().len())
            .map(|k| (wiki.iter().map(|h| h.values()[k] as f64).sum::<f64>() / wiki.len() as f64).round() as u32)
            .collect();
        let mean = HilbertGrid::new(a.degree, first.grid().clone(), values).map_err(at("--wiki"))?;
        write_atomic(svg, &hilbert_svg(&mean, None, Some(&report.mask)))?;
    }
    Ok(())
}

fn stats_matchdist(a: &StatsMatchdistArgs) -> Res<()> {
    let within = read_numbers("--within", &a.within)?;
    let observed = read_numbers("--observed", &a.observed)?;
    if a.bootstrap == 0 {
        return usage("--bootstrap: must be at least 1");
    }
    let r = matching_distance_test(&within, &observed, a.bootstrap, a.seed).map_err(at("--within"))?;
    let mut csv = String::from("value,exceeds\n");
    for (v, e) in observed.iter().zip(&r.exceeds) {
        let _ = writeln!(csv, "{v},{}", *e as u8);
    }
    write_atomic(&a.out, &csv)?;
    println!(
        "null mean {} sd {} p95 {}\nexceeding {} of {} ({})",
        r.null.mean,
        r.null.sd,
        r.null.p95,
        r.exceeds.iter().filter(|&&e| e).count(),
        observed.len(),
        r.fraction
    );
    Ok(())
}

fn stats_barlength(a: &StatsBarlengthArgs) -> Res<()> {
    let null = read_numbers("--null", &a.null)?;
    let observed = read_numbers("--observed", &a.observed)?;
    if a.bootstrap == 0 {
        return usage("--bootstrap: must be at least 1");
    }
    let r = bar_length_test(&null, &observed, a.bootstrap, a.seed).map_err(at("--null"))?;
    write_atomic(&a.out, &r.summary())?;
    print!("{}", r.summary());
    Ok(())
}

fn experiment_replace(a: &ReplaceArgs) -> Res<()> {
    check_degree(a.degree)?;
    let p = params(a.angles, a.offsets, !a.no_normalize)?;
    let base = read_cloud("--base", &a.base)?;
    let pool = read_cloud("--pool", &a.pool)?;
    let grid = series_grid(&base, &pool, a.bins.0, a.bins.1).map_err(at("--bins"))?;
    let s = run_replacement_series(&base, &pool, &a.schedule, &grid, a.degree, &p, derive_seed(a.seed, "replace"))
        .map_err(at("--schedule"))?;
    write_atomic(&a.out, &s.to_csv())?;
    if let Some(svg) = &a.svg {
        let pts: Vec<(f64, f64)> = s.schedule.iter().map(|&n| n as f64).zip(s.distances.iter().copied()).collect();
        write_atomic(svg, &series_svg(&pts, "replaced points", "matching distance"))?;
    }
    Ok(())
}

fn experiment_stability(a: &StabilityArgs) -> Res<()> {
    check_degree(a.degree)?;
    let p = params(a.angles, a.offsets, !a.no_normalize)?;
    let originals: Vec<PointCloud> = a.originals.iter().map(|o| read_cloud("--originals", o)).collect::<Res<_>>()?;
    let pool = read_cloud("--pool", &a.pool)?;
    let replacements: Vec<usize> = if a.replacements.is_empty() {
        (1..=30).collect()
    } else {
        a.replacements.clone()
    };
    let top = originals.iter().map(|o| joint_diameter(o, &pool)).fold(0.0, f64::max);
    let refs: Vec<&PointCloud> = originals.iter().collect();
    let grid = shared_grid(&refs, top, a.bins)?;
    let study = stability_study(
        &originals,
        &pool,
        &replacements,
        &grid,
        a.degree,
        &p,
        a.experiments,
        derive_seed(a.seed, "stability"),
    )
    .map_err(at("--originals"))?;
    write_atomic(&a.out, &study.report.to_csv())?;
    if let Some(path) = &a.distances {
        let mut csv = String::from("replacements,distance\n");
        for (r, d) in &study.distances {
            let _ = writeln!(csv, "{r},{d}");
        }
        write_atomic(path, &csv)?;
    }
    print!(
        "{}monotonicity violations: {}\n",
        study.report.summary(),
        study.monotonicity_violations
    );
    Ok(())
}

/// Significance column of a pixel report, in pixel order.
fn read_mask(path: &Path) -> Res<Vec<bool>> {
    let text = read("--report", path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| match l.rsplit(',').next().map(str::trim) {
            Some("1") => Ok(true),
            Some("0") => Ok(false),
            _ => usage(format!("--report: bad row `{l}`")),
        })
        .collect()
}

fn plot(a: &PlotArgs) -> Res<()> {
    if let Some(series) = &a.series {
        let text = read("--series", series)?;
        let mut pts = Vec::new();
        for l in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let mut f = l.split(',');
            let parse = |s: Option<&str>| s.and_then(|s| s.trim().parse::<f64>().ok());
            match (parse(f.next()), parse(f.next())) {
                (Some(x), Some(y)) => pts.push((x, y)),
                _ => return usage(format!("--series: bad row `{l}`")),
            }
        }
        return write_atomic(&a.out, &series_svg(&pts, "replaced points", "matching distance"));
    }
    let Some(path) = &a.hilbert else {
        return usage("--hilbert: required unless --series is given");
    };
    let h = HilbertGrid::from_csv(&read("--hilbert", path)?, a.degree).map_err(at("--hilbert"))?;
    let b = match &a.betti {
        Some(p) => Some(BettiGrid::from_csv(&read("--betti", p)?, a.degree).map_err(at("--betti"))?),
        None => None,
    };
    let mask = match &a.report {
        Some(p) => {
            let m = read_mask(p)?;
            if m.len() != h.values().len() {
                return usage(format!("--report: {} pixels for a grid of {}", m.len(), h.values().len()));
            }
            Some(m)
        }
        None => None,
    };
    write_atomic(&a.out, &hilbert_svg(&h, b.as_ref(), mask.as_deref()))
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Bifiltration(a) => bifiltration(a),
        Command::Hilbert(a) => hilbert(a),
        Command::Betti(a) => betti(a),
        Command::Slice(a) => slice(a),
        Command::Bottleneck(a) => bottleneck(a),
        Command::Matchdist(a) => matchdist(a),
        Command::StatsPixels(a) => stats_pixels(a),
        Command::StatsMatchdist(a) => stats_matchdist(a),
        Command::StatsBarlength(a) => stats_barlength(a),
        Command::ExperimentReplace(a)
        | Command::Experiment {
            which: ExperimentCommand::Replace(a),
        } => experiment_replace(a),
        Command::ExperimentStability(a)
        | Command::Experiment {
            which: ExperimentCommand::Stability(a),
        } => experiment_stability(a),
        Command::Plot(a) => plot(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: --threads: {e}");
        return ExitCode::from(1);
    }
    eprintln!("biperstat: threads={} {:?}", rayon::current_num_threads(), cli.command);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
