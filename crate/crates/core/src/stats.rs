//! Pixelwise large-scale testing of Hilbert-function grids, bootstrap tests
//! on matching distances and on bar lengths.
//!
//! Percentiles use linear interpolation between order statistics
//! (Hyndman-Fan type 7): for sorted `x` of length `n`, `h = (n - 1) q` and the
//! value is `x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h])`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::bipersistence::HilbertGrid;
use crate::error::{input, Error, Result};
use crate::geometry::GridSpec;
use crate::rng::{derive_indexed, derive_seed, seeded};

/// Magnitude of the t statistic reported for samples with zero variance and
/// different means.
pub const SENTINEL: f64 = 1e9;

fn is_sentinel(t: f64) -> bool {
    t.abs() >= SENTINEL
}

/// Mean and sample variance (divisor `n - 1`).
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Welch's t statistic for `mean(b) - mean(a)` and the Welch-Satterthwaite
/// degrees of freedom. If both variances vanish the statistic is 0 for
/// equal means and `±SENTINEL` otherwise, with `na + nb - 2` degrees of
/// freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return input(format!(
            "t-test needs at least two values per group, got {} and {}",
            a.len(),
            b.len()
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let t = if mb > ma {
            SENTINEL
        } else if mb < ma {
            -SENTINEL
        } else {
            0.0
        };
        return Ok((t, na + nb - 2.0));
    }
    let t = (mb - ma) / se2.sqrt();
    let dof = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok((t, dof))
}

/// Linear-interpolation percentile of already sorted values, `q` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, q)
}

/// An `m x n` grid of reals, row-major, optionally tied to the grid spec it
/// was sampled on.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    m: usize,
    n: usize,
    spec: Option<GridSpec>,
    values: Vec<f64>,
}

impl ValueGrid {
    pub fn new(m: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n || m == 0 || n == 0 {
            return input(format!("{} values for a {m}x{n} grid", values.len()));
        }
        Ok(Self {
            m,
            n,
            spec: None,
            values,
        })
    }

    pub fn from_hilbert(h: &HilbertGrid) -> Self {
        Self {
            m: h.grid().m(),
            n: h.grid().n(),
            spec: Some(h.grid().clone()),
            values: h.values().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> Option<&GridSpec> {
        self.spec.as_ref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn compatible(&self, other: &Self) -> bool {
        self.m == other.m
            && self.n == other.n
            && match (&self.spec, &other.spec) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
    }
}

fn check_group(grids: &[ValueGrid], first: &ValueGrid) -> Result<()> {
    if let Some(g) = grids.iter().find(|g| !g.compatible(first)) {
        return Err(Error::IncompatibleGrids(format!(
            "{}x{} grid mixed with {}x{} grid or different ranges",
            first.m, first.n, g.m, g.n
        )));
    }
    Ok(())
}

fn sort_canonical(grids: &mut [&ValueGrid]) {
    grids.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

fn pixel_t(a: &[&ValueGrid], b: &[&ValueGrid]) -> Vec<f64> {
    let cells = a[0].values.len();
    let mut xa = vec![0.0; a.len()];
    let mut xb = vec![0.0; b.len()];
    (0..cells)
        .map(|p| {
            for (x, g) in xa.iter_mut().zip(a) {
                *x = g.values[p];
            }
            for (x, g) in xb.iter_mut().zip(b) {
                *x = g.values[p];
            }
            welch_t(&xa, &xb).expect("group sizes checked").0
        })
        .collect()
}

/// Welch t statistic of `b` against `a` at every pixel.
pub fn pixelwise_tests(a: &[ValueGrid], b: &[ValueGrid]) -> Result<ValueGrid> {
    if a.len() < 2 || b.len() < 2 {
        return input(format!("need at least two grids per group, got {} and {}", a.len(), b.len()));
    }
    check_group(a, &a[0])?;
    check_group(b, &a[0])?;
    let ra: Vec<&ValueGrid> = a.iter().collect();
    let rb: Vec<&ValueGrid> = b.iter().collect();
    Ok(ValueGrid {
        m: a[0].m,
        n: a[0].n,
        spec: a[0].spec.clone(),
        values: pixel_t(&ra, &rb),
    })
}

/// How the rejection level of each pixel is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PercentileMode {
    /// One 95th percentile over every null z value.
    #[default]
    Pooled,
    /// The 95th percentile of each pixel's own null z values.
    PerPixel,
}

/// Null distribution of pixelwise z-scores from random splits of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    pub m: usize,
    pub n: usize,
    pub spec: Option<GridSpec>,
    /// Mean and standard deviation of all non-sentinel null t statistics.
    pub mu: f64,
    pub sigma: f64,
    /// One z grid per split, in split order.
    pub z: Vec<Vec<f64>>,
    /// Per-pixel mean of the split t statistics, standardized by `mu`, `sigma`.
    pub mean_z: Vec<f64>,
    pub mode: PercentileMode,
    /// 95th-percentile rejection level of every pixel.
    pub thresholds: Vec<f64>,
}

impl NullDistribution {
    pub fn standardize(&self, t: f64) -> f64 {
        if is_sentinel(t) {
            t
        } else {
            (t - self.mu) / self.sigma
        }
    }
}

/// Cross-validated null: `n_experiments` random splits of `grids` into
/// groups of `split.0` and `split.1`, a pixelwise t-test for each, and
/// standardization of all t values by their pooled mean and standard
/// deviation (sentinels excluded). Grids are put in a canonical order first
/// so the result does not depend on input order.
pub fn cv_null(
    grids: &[ValueGrid],
    n_experiments: usize,
    split: (usize, usize),
    mode: PercentileMode,
    seed: u64,
) -> Result<NullDistribution> {
    if split.0 < 2 || split.1 < 2 || grids.len() != split.0 + split.1 {
        return input(format!(
            "cannot split {} grids into groups of {} and {} (each at least 2)",
            grids.len(),
            split.0,
            split.1
        ));
    }
    if n_experiments == 0 {
        return input("need at least one split");
    }
    check_group(grids, &grids[0])?;
    let mut sorted: Vec<&ValueGrid> = grids.iter().collect();
    sort_canonical(&mut sorted);
    let ts: Vec<Vec<f64>> = (0..n_experiments)
        .into_par_iter()
        .map(|e| {
            let mut rng = seeded(derive_indexed(seed, "cv_null/split", e as u64));
            let mut order: Vec<usize> = (0..sorted.len()).collect();
            order.shuffle(&mut rng);
            let a: Vec<&ValueGrid> = order[..split.0].iter().map(|&k| sorted[k]).collect();
            let b: Vec<&ValueGrid> = order[split.0..].iter().map(|&k| sorted[k]).collect();
            pixel_t(&a, &b)
        })
        .collect();
    let finite: Vec<f64> = ts.iter().flatten().copied().filter(|t| !is_sentinel(*t)).collect();
    let (mu, sigma) = if finite.len() > 1 {
        let (m, v) = mean_var(&finite);
        (m, if v > 0.0 { v.sqrt() } else { 1.0 })
    } else {
        (0.0, 1.0)
    };
    let std = |t: f64| if is_sentinel(t) { t } else { (t - mu) / sigma };
    let z: Vec<Vec<f64>> = ts.iter().map(|row| row.iter().map(|&t| std(t)).collect()).collect();
    let cells = grids[0].values.len();
    let mean_z = (0..cells)
        .map(|p| std(ts.iter().map(|row| row[p]).sum::<f64>() / n_experiments as f64))
        .collect();
    let thresholds = match mode {
        PercentileMode::Pooled => {
            let mut all: Vec<f64> = z.iter().flatten().copied().collect();
            all.sort_by(f64::total_cmp);
            vec![percentile_sorted(&all, 0.95); cells]
        }
        PercentileMode::PerPixel => (0..cells)
            .map(|p| percentile(&z.iter().map(|row| row[p]).collect::<Vec<_>>(), 0.95))
            .collect(),
    };
    Ok(NullDistribution {
        m: grids[0].m,
        n: grids[0].n,
        spec: grids[0].spec.clone(),
        mu,
        sigma,
        z,
        mean_z,
        mode,
        thresholds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelTestReport {
    pub m: usize,
    pub n: usize,
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub mask: Vec<bool>,
    pub power: f64,
}

impl PixelTestReport {
    pub fn significant(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// `i,j,t,z,threshold,significant` per pixel.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,t,z,threshold,significant\n");
        for k in 0..self.mask.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                k / self.n,
                k % self.n,
                self.t[k],
                self.z[k],
                self.thresholds[k],
                self.mask[k] as u8
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "significant pixels: {} of {}\npower: {}\n",
            self.significant(),
            self.mask.len(),
            self.power
        )
    }
}

/// Pixelwise test of `observed` against `reference`: Welch t of
/// `mean(observed) - mean(reference)`, standardized like the null, and
/// significant where it exceeds the null's rejection level.
pub fn large_scale_test(
    observed: &[ValueGrid],
    reference: &[ValueGrid],
    null: &NullDistribution,
) -> Result<PixelTestReport> {
    let t = pixelwise_tests(reference, observed)?;
    if t.m != null.m || t.n != null.n || matches!((&t.spec, &null.spec), (Some(a), Some(b)) if a != b) {
        return Err(Error::IncompatibleGrids("null distribution was built on a different grid".into()));
    }
    let z: Vec<f64> = t.values.iter().map(|&v| null.standardize(v)).collect();
    let mask: Vec<bool> = z.iter().zip(&null.thresholds).map(|(z, th)| z > th).collect();
    let power = mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64;
    Ok(PixelTestReport {
        m: t.m,
        n: t.n,
        t: t.values,
        z,
        thresholds: null.thresholds.clone(),
        mask,
        power,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDistribution {
    pub estimators: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the estimators.
    pub sd: f64,
    pub p95: f64,
}

impl BootstrapDistribution {
    pub fn percentile(&self, q: f64) -> f64 {
        percentile(&self.estimators, q)
    }
}

/// `b` means of resamples (with replacement, same size) of `values`. The
/// values are sorted first and estimator `k` draws from its own derived
/// seed, so the result depends only on the multiset of values and `seed`.
pub fn bootstrap_mean_null(values: &[f64], b: usize, seed: u64) -> Result<BootstrapDistribution> {
    if values.is_empty() || b == 0 {
        return input("bootstrap needs a nonempty sample and at least one resample");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let estimators: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded(derive_indexed(seed, "bootstrap", k as u64));
            (0..n).map(|_| sorted[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    let (mean, var) = mean_var(&estimators);
    let p95 = percentile(&estimators, 0.95);
    Ok(BootstrapDistribution {
        estimators,
        mean,
        sd: var.sqrt(),
        p95,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingTestReport {
    pub null: BootstrapDistribution,
    pub exceeds: Vec<bool>,
    pub fraction: f64,
}

/// Bootstrap null of the mean within-group distance; each observed
/// between-group distance is flagged if it exceeds the null's 95th
/// percentile.
pub fn matching_distance_test(
    within: &[f64],
    observed: &[f64],
    b: usize,
    seed: u64,
) -> Result<MatchingTestReport> {
    let null = bootstrap_mean_null(within, b, derive_seed(seed, "matching_test"))?;
    let exceeds: Vec<bool> = observed.iter().map(|&x| x > null.p95).collect();
    let fraction = if observed.is_empty() {
        0.0
    } else {
        exceeds.iter().filter(|&&e| e).count() as f64 / observed.len() as f64
    };
    Ok(MatchingTestReport {
        null,
        exceeds,
        fraction,
    })
}

/// Side of the null the observed estimators fall on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarLengthReport {
    pub null: BootstrapDistribution,
    pub observed: BootstrapDistribution,
    pub observed_mean: f64,
    /// 2.5th and 97.5th percentiles of the null estimators.
    pub interval: (f64, f64),
    pub reject: bool,
    /// Distance of the observed mean from the null mean in null sds.
    pub z: f64,
    pub tail: Tail,
    /// Fraction of observed estimators beyond the null's 95th (upper tail)
    /// or 5th (lower tail) percentile.
    pub power: f64,
    /// Null-side bars longer than every observed bar.
    pub longer_than_all: usize,
}

impl BarLengthReport {
    pub fn summary(&self) -> String {
        format!(
            "null mean {} sd {}\nobserved mean {} sd {}\ninterval [{}, {}]\nreject {}\nz {}\npower {}\nnull bars longer than all observed {}\n",
            self.null.mean,
            self.null.sd,
            self.observed.mean,
            self.observed.sd,
            self.interval.0,
            self.interval.1,
            self.reject,
            self.z,
            self.power,
            self.longer_than_all
        )
    }
}

/// Two-sided bootstrap test of mean bar length.
pub fn bar_length_test(null_lengths: &[f64], observed: &[f64], b: usize, seed: u64) -> Result<BarLengthReport> {
    let null = bootstrap_mean_null(null_lengths, b, derive_seed(seed, "bars/null"))?;
    let obs = bootstrap_mean_null(observed, b, derive_seed(seed, "bars/observed"))?;
    let observed_mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let interval = (null.percentile(0.025), null.percentile(0.975));
    let reject = observed_mean < interval.0 || observed_mean > interval.1;
    let diff = observed_mean - null.mean;
    let z = if null.sd > 0.0 {
        diff / null.sd
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    let tail = if obs.mean >= null.mean { Tail::Upper } else { Tail::Lower };
    let beyond = match tail {
        Tail::Upper => {
            let cut = null.p95;
            obs.estimators.iter().filter(|&&x| x > cut).count()
        }
        Tail::Lower => {
            let cut = null.percentile(0.05);
            obs.estimators.iter().filter(|&&x| x < cut).count()
        }
    };
    let longest = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BarLengthReport {
        power: beyond as f64 / obs.estimators.len() as f64,
        null,
        observed: obs,
        observed_mean,
        interval,
        reject,
        z,
        tail,
        longer_than_all: null_lengths.iter().filter(|&&x| x > longest).count(),
    })
}
