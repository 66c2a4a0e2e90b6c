//! Point clouds with a real-valued function, Euclidean distance matrices,
//! synthetic dataset generation and the parameter grid used for coarsening.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{input, parse_err, Error, Result};
use crate::rng;

/// Points in `R^d`, each carrying one function value (a popularity rank in
/// the experiments: lower rank enters the bifiltration first).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    func: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, func: Vec<f64>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.len(),
            None => return input("point cloud must contain at least one point"),
        };
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return input(format!(
                "point {i} has dimension {} but point 0 has dimension {dim}",
                p.len()
            ));
        }
        let coords = points.into_iter().flatten().collect();
        Self::from_flat(dim, coords, func)
    }

    /// Build from row-major coordinates (`coords.len() == dim * func.len()`).
    pub fn from_flat(dim: usize, coords: Vec<f64>, func: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return input("point dimension must be at least 1");
        }
        if func.is_empty() {
            return input("point cloud must contain at least one point");
        }
        if coords.len() != dim * func.len() {
            return input(format!(
                "{} coordinates do not describe {} points of dimension {dim}",
                coords.len(),
                func.len()
            ));
        }
        if coords.iter().chain(&func).any(|v| !v.is_finite()) {
            return input("coordinates and function values must be finite");
        }
        Ok(Self {
            dim,
            coords,
            func,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return input(format!(
                "{} labels given for {} points",
                labels.len(),
                self.len()
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.func.len()
    }

    pub fn is_empty(&self) -> bool {
        self.func.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn func(&self) -> &[f64] {
        &self.func
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// True when the function values are exactly the integers `1..=n`.
    pub fn ranks_are_permutation(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        for &v in &self.func {
            if v.fract() != 0.0 || v < 1.0 || v > n as f64 {
                return false;
            }
            let k = v as usize - 1;
            if seen[k] {
                return false;
            }
            seen[k] = true;
        }
        true
    }

    /// Smallest and largest function value.
    pub fn func_range(&self) -> (f64, f64) {
        self.func
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// CSV with header `rank,x0,...,x{d-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank");
        for k in 0..self.dim {
            let _ = write!(out, ",x{k}");
        }
        out.push('\n');
        for (i, p) in self.points().enumerate() {
            let _ = write!(out, "{}", self.func[i]);
            for v in p {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty point cloud file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "rank" {
            return Err(parse_err(1, "header must be `rank,x0,x1,...`"));
        }
        for (k, c) in cols[1..].iter().enumerate() {
            if *c != format!("x{k}") {
                return Err(parse_err(1, format!("expected column `x{k}`, found `{c}`")));
            }
        }
        let dim = cols.len() - 1;
        let mut func = Vec::new();
        let mut coords = Vec::new();
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(parse_err(
                    idx + 1,
                    format!("expected {} fields, found {}", dim + 1, fields.len()),
                ));
            }
            let mut vals = fields.iter().map(|f| {
                let f = f.trim();
                match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(parse_err(idx + 1, format!("`{f}` is not a finite number"))),
                }
            });
            func.push(vals.next().unwrap()?);
            for v in vals {
                coords.push(v?);
            }
        }
        if func.is_empty() {
            return Err(parse_err(1, "point cloud file has no rows"));
        }
        Self::from_flat(dim, coords, func)
    }
}

/// Symmetric `n x n` matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Wrap a row-major matrix after checking it is a valid distance table.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return input(format!("{} entries do not form a {n}x{n} matrix", data.len()));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return input(format!("diagonal entry {i} is nonzero"));
            }
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return input(format!("entry ({i},{j}) is not a finite nonnegative number"));
                }
                if v != data[j * n + i] {
                    return input(format!("entries ({i},{j}) and ({j},{i}) differ"));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Largest entry; at this scale every pair of points is connected.
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise Euclidean distances. Each unordered pair is computed once and
/// mirrored, so the result is exactly symmetric.
pub fn distance_matrix(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            (i + 1..n).map(|j| euclidean(p, cloud.point(j))).collect()
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, d) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

/// Largest distance between a point of `a` and a point of `b`, or within either.
pub fn joint_diameter(a: &PointCloud, b: &PointCloud) -> f64 {
    let within = distance_matrix(a).max().max(distance_matrix(b).max());
    let across = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let p = a.point(i);
            b.points().map(|q| euclidean(p, q)).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    within.max(across)
}

/// `n` points with i.i.d. `Normal(mean, sd)` coordinates drawn from
/// `ChaCha8Rng` seeded with `seed`. Function values are the identity ranks
/// `1..=n`; use [`assign_ranks`] to shuffle them.
pub fn sample_gaussian_cloud(n: usize, d: usize, mean: f64, sd: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 || d == 0 {
        return input("n and d must be at least 1");
    }
    if !(sd > 0.0 && sd.is_finite()) || !mean.is_finite() {
        return input("sd must be positive and mean finite");
    }
    let normal = Normal::new(mean, sd).map_err(|e| Error::Input(e.to_string()))?;
    let mut r = rng::seeded(seed);
    let coords: Vec<f64> = (0..n * d).map(|_| normal.sample(&mut r)).collect();
    PointCloud::from_flat(d, coords, identity_ranks(n))
}

/// Gaussian mixture with `clusters` planted centers. Centers are drawn from
/// `Normal(0, center_sd)` and points from `Normal(center, spread_sd)`, with
/// cluster membership assigned round-robin. With
/// `center_sd^2 + spread_sd^2 = sd^2` the coordinate marginals match
/// `sample_gaussian_cloud(.., 0, sd, ..)`.
pub fn sample_clustered_cloud(
    n: usize,
    d: usize,
    clusters: usize,
    center_sd: f64,
    spread_sd: f64,
    seed: u64,
) -> Result<PointCloud> {
    if n == 0 || d == 0 || clusters == 0 {
        return input("n, d and the cluster count must be at least 1");
    }
    if !(center_sd >= 0.0 && spread_sd > 0.0) {
        return input("cluster spreads must be nonnegative (center) and positive (points)");
    }
    let mut r = rng::seeded(seed);
    let std = rand_distr::StandardNormal;
    let centers: Vec<f64> = (0..clusters * d)
        .map(|_| center_sd * <_ as Distribution<f64>>::sample(&std, &mut r))
        .collect();
    let mut coords = Vec::with_capacity(n * d);
    for i in 0..n {
        let c = &centers[(i % clusters) * d..(i % clusters + 1) * d];
        for &ck in c {
            let z: f64 = std.sample(&mut r);
            coords.push(ck + spread_sd * z);
        }
    }
    PointCloud::from_flat(d, coords, identity_ranks(n))
}

fn identity_ranks(n: usize) -> Vec<f64> {
    (1..=n).map(|r| r as f64).collect()
}

/// How ranks are assigned to points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankOrder {
    /// `ranks[i]` is the rank of point `i`; must be a permutation of `1..=n`.
    Permutation(Vec<usize>),
    /// A uniformly random permutation drawn from this seed.
    Seed(u64),
}

/// Replace the function values by a permutation of `1..=n`.
pub fn assign_ranks(cloud: &PointCloud, order: &RankOrder) -> Result<PointCloud> {
    let n = cloud.len();
    let ranks = match order {
        RankOrder::Permutation(p) => {
            if p.len() != n {
                return input(format!("permutation has length {} but cloud has {n} points", p.len()));
            }
            let mut seen = vec![false; n];
            for &r in p {
                if r == 0 || r > n || std::mem::replace(&mut seen[r - 1], true) {
                    return input(format!("{p:?} is not a permutation of 1..={n}"));
                }
            }
            p.clone()
        }
        RankOrder::Seed(seed) => {
            let mut p: Vec<usize> = (1..=n).collect();
            p.shuffle(&mut rng::seeded(*seed));
            p
        }
    };
    let mut out = cloud.clone();
    out.func = ranks.into_iter().map(|r| r as f64).collect();
    Ok(out)
}

/// Replace `k` seed-chosen points of `base` by `k` seed-chosen points of
/// `pool`. A replacement keeps the function value (rank slot) of the point
/// it removes. For a fixed seed the replaced sets are nested in `k`.
pub fn replace_points(base: &PointCloud, pool: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    if base.dim() != pool.dim() {
        return input(format!(
            "base has dimension {} but pool has dimension {}",
            base.dim(),
            pool.dim()
        ));
    }
    if k > base.len() {
        return input(format!("cannot replace {k} of {} base points", base.len()));
    }
    if k > pool.len() {
        return input(format!("pool has only {} points, {k} needed", pool.len()));
    }
    let (targets, sources) = replacement_order(base.len(), pool.len(), seed);
    let mut out = base.clone();
    let d = base.dim();
    for (&t, &s) in targets.iter().zip(&sources).take(k) {
        out.coords[t * d..(t + 1) * d].copy_from_slice(pool.point(s));
        if let Some(labels) = out.labels.as_mut() {
            labels[t] = match pool.labels() {
                Some(pl) => pl[s].clone(),
                None => format!("pool:{s}"),
            };
        }
    }
    Ok(out)
}

/// Order in which base points are replaced and pool points consumed.
pub fn replacement_order(base_len: usize, pool_len: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut targets: Vec<usize> = (0..base_len).collect();
    targets.shuffle(&mut rng::seeded(rng::derive_seed(seed, "replace/base")));
    let mut sources: Vec<usize> = (0..pool_len).collect();
    sources.shuffle(&mut rng::seeded(rng::derive_seed(seed, "replace/pool")));
    (targets, sources)
}

/// An `m x n` grid on the (function, scale) plane. Grid values on each axis
/// are `m` (resp. `n`) evenly spaced points from the lower to the upper end
/// of the range, both ends included; a single-point axis sits at the upper
/// end so that snapping upward always has a target.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    m: usize,
    n: usize,
    func_range: (f64, f64),
    scale_range: (f64, f64),
}

impl GridSpec {
    pub fn new(m: usize, n: usize, func_range: (f64, f64), scale_range: (f64, f64)) -> Result<Self> {
        if m == 0 || n == 0 {
            return input("grid needs at least one bin on each axis");
        }
        let (a0, a1) = func_range;
        let (e0, e1) = scale_range;
        if !(a0.is_finite() && a1.is_finite() && a0 < a1) {
            return input(format!("function range [{a0}, {a1}] must satisfy min < max"));
        }
        if !(e0.is_finite() && e1.is_finite() && 0.0 <= e0 && e0 < e1) {
            return input(format!("scale range [{e0}, {e1}] must satisfy 0 <= min < max"));
        }
        Ok(Self {
            m,
            n,
            func_range,
            scale_range,
        })
    }

    /// Grid spanning the function values of `cloud` and scales `[0, max_scale]`.
    /// A degenerate axis is widened by one unit.
    pub fn for_cloud(cloud: &PointCloud, max_scale: f64, m: usize, n: usize) -> Result<Self> {
        let (lo, hi) = cloud.func_range();
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let top = if max_scale > 0.0 { max_scale } else { 1.0 };
        Self::new(m, n, (lo, hi), (0.0, top))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn func_range(&self) -> (f64, f64) {
        self.func_range
    }

    pub fn scale_range(&self) -> (f64, f64) {
        self.scale_range
    }

    pub fn alpha(&self, i: usize) -> f64 {
        axis_value(self.func_range, self.m, i)
    }

    pub fn eps(&self, j: usize) -> f64 {
        axis_value(self.scale_range, self.n, j)
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.alpha(i)).collect()
    }

    pub fn epsilons(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.eps(j)).collect()
    }

    /// Index of the least function grid value `>= x`, clamped to the top bin.
    pub fn snap_alpha(&self, x: f64) -> usize {
        snap_closed(self.func_range, self.m, x)
    }

    /// Index of the least scale grid value `>= x`, clamped to the top bin.
    pub fn snap_eps(&self, x: f64) -> usize {
        snap_closed(self.scale_range, self.n, x)
    }

    /// Index of the least scale grid value `> x`, clamped to the top bin.
    pub fn snap_eps_strict(&self, x: f64) -> usize {
        (0..self.n).find(|&j| self.eps(j) > x).unwrap_or(self.n - 1)
    }

    /// Spacing between consecutive scale grid values (the full range for n = 1).
    pub fn eps_step(&self) -> f64 {
        let (lo, hi) = self.scale_range;
        (hi - lo) / (self.n.max(2) - 1) as f64
    }

    pub fn alpha_step(&self) -> f64 {
        let (lo, hi) = self.func_range;
        (hi - lo) / (self.m.max(2) - 1) as f64
    }

    /// Same ranges, different bin counts.
    pub fn with_bins(&self, m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, self.func_range, self.scale_range)
    }
}

fn axis_value((lo, hi): (f64, f64), count: usize, i: usize) -> f64 {
    if i + 1 >= count {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (count - 1) as f64
    }
}

fn snap_closed(range: (f64, f64), count: usize, x: f64) -> usize {
    (0..count)
        .find(|&i| axis_value(range, count, i) >= x)
        .unwrap_or(count - 1)
}
