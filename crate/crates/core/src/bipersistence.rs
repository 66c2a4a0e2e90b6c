//! Hilbert functions and bigraded Betti numbers of function-Rips
//! bifiltrations on a finite grid, and one-parameter slices along lines of
//! positive slope.
//!
//! Betti numbers come from the Koszul complex of the discretized module at
//! each grid point `a`:
//!
//! ```text
//! 0 -> M(a - e1 - e2) --psi--> M(a - e1) + M(a - e2) --phi--> M(a) -> 0
//! ```
//!
//! `xi0` is the cokernel of `phi`, `xi1` the middle homology and `xi2` the
//! kernel of `psi`. Grid points outside the grid carry the zero module.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bifiltration::{coarsen, grid_indices, Bifiltration, Grade};
use crate::error::{input, parse_err, Result};
use crate::geometry::GridSpec;
use crate::persistence::{degree0_union_find, reduce_and_extract, Cell, FilteredComplex, PersistenceDiagram};

fn check_degree(degree: usize) -> Result<()> {
    if degree > 1 {
        return input(format!("homology degree must be 0 or 1, got {degree}"));
    }
    Ok(())
}

fn on_grid(bif: &Bifiltration, grid: &GridSpec) -> Bifiltration {
    if bif.grid() == Some(grid) {
        bif.clone()
    } else {
        coarsen(bif, grid)
    }
}

/// Filtered complex of the simplices of dimension `<= max_dim` for which
/// `value` returns a filtration value. The kept set must be closed under
/// faces and `value` monotone along face relations.
pub(crate) fn filtration_of(
    bif: &Bifiltration,
    max_dim: usize,
    value: impl Fn(usize) -> Option<f64>,
) -> FilteredComplex {
    let mut keep: Vec<(f64, usize, u32)> = bif
        .simplices()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.dim() <= max_dim)
        .filter_map(|(i, s)| value(i).map(|v| (v, s.dim(), i as u32)))
        .collect();
    keep.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pos = vec![u32::MAX; bif.len()];
    for (k, &(_, _, i)) in keep.iter().enumerate() {
        pos[i as usize] = k as u32;
    }
    let cells = keep
        .iter()
        .map(|&(v, dim, i)| {
            let f = bif.facets(i as usize);
            match dim {
                0 => Cell::vertex(v),
                1 => Cell::edge(v, pos[f[0] as usize], pos[f[1] as usize]),
                _ => Cell::triangle(v, pos[f[0] as usize], pos[f[1] as usize], pos[f[2] as usize]),
            }
        })
        .collect();
    FilteredComplex::from_trusted(cells)
}

fn diagram(fc: &FilteredComplex, degree: usize) -> Result<PersistenceDiagram> {
    if degree == 0 {
        Ok(degree0_union_find(fc))
    } else {
        reduce_and_extract(fc, degree)
    }
}

/// Homology dimensions at every point of a grid, stored row-major with the
/// function index `i` as the row.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertGrid {
    degree: usize,
    grid: GridSpec,
    values: Vec<u32>,
}

impl HilbertGrid {
    pub fn new(degree: usize, grid: GridSpec, values: Vec<u32>) -> Result<Self> {
        check_degree(degree)?;
        if values.len() != grid.m() * grid.n() {
            return input(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.m(),
                grid.n()
            ));
        }
        Ok(Self { degree, grid, values })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.values[i * self.grid.n() + j]
    }

    pub fn max_value(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// Two header lines `alpha_min,alpha_max,m` and `eps_min,eps_max,n`,
    /// then one row of `n` values per function bin.
    pub fn to_csv(&self) -> String {
        let mut out = grid_header(&self.grid);
        for row in self.values.chunks(self.grid.n()) {
            let cells: Vec<String> = row.iter().map(u32::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, degree: usize) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let grid = parse_grid_header(&mut lines)?;
        let mut values = Vec::with_capacity(grid.m() * grid.n());
        let mut rows = 0;
        for (idx, line) in lines {
            let row: Vec<u32> = line
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(idx + 1, "expected nonnegative integers"))?;
            if row.len() != grid.n() {
                return Err(parse_err(idx + 1, format!("expected {} columns, found {}", grid.n(), row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != grid.m() {
            return input(format!("expected {} rows, found {rows}", grid.m()));
        }
        Self::new(degree, grid, values)
    }
}

pub(crate) fn grid_header(grid: &GridSpec) -> String {
    let (a0, a1) = grid.func_range();
    let (e0, e1) = grid.scale_range();
    format!("{a0},{a1},{}\n{e0},{e1},{}\n", grid.m(), grid.n())
}

pub(crate) fn parse_grid_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<GridSpec> {
    let mut axis = |what: &str| -> Result<(f64, f64, usize)> {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| crate::Error::Input(format!("missing {what} header line")))?;
        let t: Vec<&str> = line.split(',').map(str::trim).collect();
        if t.len() != 3 {
            return Err(parse_err(idx + 1, format!("{what} header needs `min,max,count`")));
        }
        let lo = t[0].parse::<f64>().map_err(|_| parse_err(idx + 1, "bad minimum"))?;
        let hi = t[1].parse::<f64>().map_err(|_| parse_err(idx + 1, "bad maximum"))?;
        let count = t[2].parse::<usize>().map_err(|_| parse_err(idx + 1, "bad count"))?;
        Ok((lo, hi, count))
    };
    let (a0, a1, m) = axis("function")?;
    let (e0, e1, n) = axis("scale")?;
    GridSpec::new(m, n, (a0, a1), (e0, e1))
}

/// Hilbert function of `bif` in `degree` at every point of `grid`. The
/// bifiltration is coarsened onto the grid first unless it already lives
/// there. Each function bin is one ε-filtered reduction.
pub fn hilbert_function(bif: &Bifiltration, grid: &GridSpec, degree: usize) -> Result<HilbertGrid> {
    check_degree(degree)?;
    let coarse = on_grid(bif, grid);
    let idx = grid_indices(&coarse, grid);
    let columns: Vec<Vec<u32>> = (0..grid.m())
        .into_par_iter()
        .map(|i| {
            let fc = filtration_of(&coarse, degree + 1, |k| {
                (idx[k].0 <= i).then(|| grid.eps(idx[k].1))
            });
            let dgm = diagram(&fc, degree)?;
            Ok((0..grid.n()).map(|j| dgm.alive_at(grid.eps(j)) as u32).collect())
        })
        .collect::<Result<_>>()?;
    HilbertGrid::new(degree, grid.clone(), columns.concat())
}

/// Bigraded Betti numbers `xi0`, `xi1`, `xi2` on a grid, row-major like
/// [`HilbertGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct BettiGrid {
    degree: usize,
    grid: GridSpec,
    xi0: Vec<u32>,
    xi1: Vec<u32>,
    xi2: Vec<u32>,
}

impl BettiGrid {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn xi0(&self, i: usize, j: usize) -> u32 {
        self.xi0[i * self.grid.n() + j]
    }

    pub fn xi1(&self, i: usize, j: usize) -> u32 {
        self.xi1[i * self.grid.n() + j]
    }

    pub fn xi2(&self, i: usize, j: usize) -> u32 {
        self.xi2[i * self.grid.n() + j]
    }

    pub fn total_xi0(&self) -> u64 {
        self.xi0.iter().map(|&v| v as u64).sum()
    }

    pub fn total_xi1(&self) -> u64 {
        self.xi1.iter().map(|&v| v as u64).sum()
    }

    pub fn xi2_vanishes(&self) -> bool {
        self.xi2.iter().all(|&v| v == 0)
    }

    /// `sum over b <= a of (xi0 - xi1 + xi2)(b)` at every grid point. This
    /// equals the Hilbert function for any module on the grid; dropping the
    /// `xi2` term keeps it exact when `xi2` vanishes.
    pub fn inclusion_exclusion(&self, with_xi2: bool) -> Vec<i64> {
        let (m, n) = (self.grid.m(), self.grid.n());
        let mut acc = vec![0i64; m * n];
        for i in 0..m {
            for j in 0..n {
                let k = i * n + j;
                let mut v = self.xi0[k] as i64 - self.xi1[k] as i64;
                if with_xi2 {
                    v += self.xi2[k] as i64;
                }
                if i > 0 {
                    v += acc[k - n];
                }
                if j > 0 {
                    v += acc[k - 1];
                }
                if i > 0 && j > 0 {
                    v -= acc[k - n - 1];
                }
                acc[k] = v;
            }
        }
        acc
    }

    /// Grid header, then `i,j,xi0,xi1` for every point where either is nonzero.
    pub fn to_csv(&self) -> String {
        let mut out = grid_header(&self.grid);
        let n = self.grid.n();
        for (k, (&a, &b)) in self.xi0.iter().zip(&self.xi1).enumerate() {
            if a > 0 || b > 0 {
                let _ = writeln!(out, "{},{},{a},{b}", k / n, k % n);
            }
        }
        out
    }

    /// Parse the CSV form. `xi2` is not stored there and reads back as zero.
    pub fn from_csv(text: &str, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let grid = parse_grid_header(&mut lines)?;
        let (m, n) = (grid.m(), grid.n());
        let mut xi0 = vec![0; m * n];
        let mut xi1 = vec![0; m * n];
        for (idx, line) in lines {
            let t: Vec<u32> = line
                .split(',')
                .map(|t| t.trim().parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(idx + 1, "expected `i,j,xi0,xi1`"))?;
            if t.len() != 4 || t[0] as usize >= m || t[1] as usize >= n {
                return Err(parse_err(idx + 1, "expected `i,j,xi0,xi1` inside the grid"));
            }
            let k = t[0] as usize * n + t[1] as usize;
            xi0[k] = t[2];
            xi1[k] = t[3];
        }
        Ok(Self {
            degree,
            grid,
            xi0,
            xi1,
            xi2: vec![0; m * n],
        })
    }
}

/// Dense bit vector over the two-element field.
#[derive(Clone, Debug, PartialEq)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] ^= 1 << (i % 64);
    }

    fn xor(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn top(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(k, &w)| k * 64 + 63 - w.leading_zeros() as usize)
    }

    fn doubled(&self, len: usize, second: bool) -> Bits {
        let mut out = Bits::zeros(2 * len);
        for k in 0..len {
            if self.0[k / 64] >> (k % 64) & 1 == 1 {
                out.set(if second { len + k } else { k });
            }
        }
        out
    }

    fn diagonal(&self, len: usize) -> Bits {
        let mut out = self.doubled(len, false);
        out.xor(&self.doubled(len, true));
        out
    }
}

/// Row echelon basis keyed by the highest set bit.
#[derive(Clone, Default)]
struct Echelon {
    rows: Vec<Bits>,
    pivot: std::collections::HashMap<usize, usize>,
}

impl Echelon {
    fn reduce(&self, mut v: Bits) -> Bits {
        while let Some(t) = v.top() {
            match self.pivot.get(&t) {
                Some(&r) => v.xor(&self.rows[r]),
                None => break,
            }
        }
        v
    }

    /// Add `v`; returns whether it was independent.
    fn insert(&mut self, v: Bits) -> bool {
        let v = self.reduce(v);
        match v.top() {
            Some(t) => {
                self.pivot.insert(t, self.rows.len());
                self.rows.push(v);
                true
            }
            None => false,
        }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }
}

/// Cycle and boundary spaces of degree `d` at one grid point.
struct PointSpaces {
    cycles: Vec<Bits>,
    boundaries: Echelon,
}

impl PointSpaces {
    fn dim(&self) -> usize {
        self.cycles.len() - self.boundaries.rank()
    }
}

/// Bigraded Betti numbers of `bif` in `degree` on `grid`, from ranks of the
/// structure maps of the discretized module.
pub fn bigraded_betti(bif: &Bifiltration, grid: &GridSpec, degree: usize) -> Result<BettiGrid> {
    check_degree(degree)?;
    let coarse = on_grid(bif, grid);
    let idx = grid_indices(&coarse, grid);
    let simplices = coarse.simplices();
    // coordinates of the chain groups of degree d and d - 1
    let mut coord = vec![usize::MAX; simplices.len()];
    let mut counts = [0usize; 3];
    for (k, s) in simplices.iter().enumerate() {
        coord[k] = counts[s.dim()];
        counts[s.dim()] += 1;
    }
    let nd = counts[degree];
    let nlow = if degree == 0 { 0 } else { counts[degree - 1] };
    let boundary = |k: usize, len: usize| -> Bits {
        let mut b = Bits::zeros(len);
        for &f in coarse.facets(k) {
            b.set(coord[f as usize]);
        }
        b
    };
    let (m, n) = (grid.m(), grid.n());
    let spaces: Vec<PointSpaces> = (0..m * n)
        .into_par_iter()
        .map(|p| {
            let (pi, pj) = (p / n, p % n);
            let here = |k: usize| idx[k].0 <= pi && idx[k].1 <= pj;
            let mut cycles = Vec::new();
            let mut lower = Echelon::default();
            let mut track: Vec<Bits> = Vec::new();
            for k in (0..simplices.len()).filter(|&k| here(k) && simplices[k].dim() == degree) {
                let mut unit = Bits::zeros(nd);
                unit.set(coord[k]);
                if degree == 0 {
                    cycles.push(unit);
                    continue;
                }
                // reduce the boundary while tracking the chain that produced it
                let mut b = boundary(k, nlow);
                while let Some(t) = b.top() {
                    match lower.pivot.get(&t) {
                        Some(&r) => {
                            b.xor(&lower.rows[r]);
                            unit.xor(&track[r]);
                        }
                        None => break,
                    }
                }
                match b.top() {
                    Some(t) => {
                        lower.pivot.insert(t, lower.rows.len());
                        lower.rows.push(b);
                        track.push(unit);
                    }
                    None => cycles.push(unit),
                }
            }
            let mut boundaries = Echelon::default();
            for k in (0..simplices.len()).filter(|&k| here(k) && simplices[k].dim() == degree + 1) {
                boundaries.insert(boundary(k, nd));
            }
            PointSpaces { cycles, boundaries }
        })
        .collect();

    let at = |i: Option<usize>, j: Option<usize>| -> Option<&PointSpaces> {
        Some(&spaces[i? * n + j?])
    };
    let triples: Vec<(u32, u32, u32)> = (0..m * n)
        .into_par_iter()
        .map(|p| {
            let (i, j) = (p / n, p % n);
            let a = &spaces[p];
            let left = at(i.checked_sub(1), Some(j));
            let down = at(Some(i), j.checked_sub(1));
            let corner = at(i.checked_sub(1), j.checked_sub(1));
            let dim = |s: Option<&PointSpaces>| s.map_or(0, PointSpaces::dim);

            let mut span = a.boundaries.clone();
            for z in left.into_iter().chain(down).flat_map(|s| &s.cycles) {
                span.insert(z.clone());
            }
            let rank_phi = span.rank() - a.boundaries.rank();

            let rank_psi = match corner {
                None => 0,
                Some(c) => {
                    let (l, d) = (left.expect("corner implies left"), down.expect("corner implies down"));
                    let mut pair = Echelon::default();
                    for b in &l.boundaries.rows {
                        pair.insert(b.doubled(nd, false));
                    }
                    for b in &d.boundaries.rows {
                        pair.insert(b.doubled(nd, true));
                    }
                    let base = pair.rank();
                    for z in &c.cycles {
                        pair.insert(z.diagonal(nd));
                    }
                    pair.rank() - base
                }
            };
            let xi0 = a.dim() - rank_phi;
            let xi1 = dim(left) + dim(down) - rank_phi - rank_psi;
            let xi2 = dim(corner) - rank_psi;
            (xi0 as u32, xi1 as u32, xi2 as u32)
        })
        .collect();
    Ok(BettiGrid {
        degree,
        grid: grid.clone(),
        xi0: triples.iter().map(|t| t.0).collect(),
        xi1: triples.iter().map(|t| t.1).collect(),
        xi2: triples.iter().map(|t| t.2).collect(),
    })
}

/// Weight `1 / sqrt(1 + q^2)` with `q = max(m, 1/m)` of a line of slope `m`.
/// Horizontal and vertical lines get weight 0.
pub fn slope_weight(slope: f64) -> f64 {
    if !(slope > 0.0 && slope.is_finite()) {
        return 0.0;
    }
    let q = slope.max(1.0 / slope);
    if q == 1.0 {
        return FRAC_1_SQRT_2;
    }
    1.0 / (1.0 + q * q).sqrt()
}

/// A line of positive slope in the (function, scale) plane, parameterized
/// by arc length from the point where it meets the boundary of the
/// nonnegative quadrant.
///
/// The line is given by its angle `theta` with the function axis and its
/// signed offset `c = -sin(theta) * alpha + cos(theta) * eps`, the same for
/// every point on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceLine {
    angle_deg: f64,
    offset: f64,
    cos: f64,
    sin: f64,
    base: Grade,
}

impl SliceLine {
    /// `angle_deg` must lie strictly between 0 and 90.
    pub fn new(angle_deg: f64, offset: f64) -> Result<Self> {
        if !(angle_deg > 0.0 && angle_deg < 90.0) {
            return input(format!("line angle must lie in (0, 90) degrees, got {angle_deg}"));
        }
        if !offset.is_finite() {
            return input("line offset must be finite");
        }
        let (sin, cos) = if angle_deg == 45.0 {
            (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
        } else {
            angle_deg.to_radians().sin_cos()
        };
        let base = if offset >= 0.0 {
            Grade::new(0.0, offset / cos)
        } else {
            Grade::new(-offset / sin, 0.0)
        };
        Ok(Self {
            angle_deg,
            offset,
            cos,
            sin,
            base,
        })
    }

    /// Line through `point` at the given angle.
    pub fn through(point: Grade, angle_deg: f64) -> Result<Self> {
        let probe = Self::new(angle_deg, 0.0)?;
        Self::new(angle_deg, probe.offset_through(point))
    }

    /// Offset of the line parallel to this one through `g`.
    pub fn offset_through(&self, g: Grade) -> f64 {
        self.cos * g.eps - self.sin * g.alpha
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn slope(&self) -> f64 {
        self.sin / self.cos
    }

    /// `sin(theta)` up to 45 degrees and `cos(theta)` beyond, which is
    /// [`slope_weight`] of the slope.
    pub fn weight(&self) -> f64 {
        self.sin.min(self.cos)
    }

    pub fn basepoint(&self) -> Grade {
        self.base
    }

    pub fn point_at(&self, t: f64) -> Grade {
        Grade::new(self.base.alpha + t * self.cos, self.base.eps + t * self.sin)
    }

    /// Least `t` with `point_at(t) >= g` coordinatewise.
    pub fn push(&self, g: Grade) -> f64 {
        ((g.alpha - self.base.alpha) / self.cos).max((g.eps - self.base.eps) / self.sin)
    }

    /// Parameter interval over which the line runs inside the rectangle, if
    /// it meets it.
    pub fn clip(&self, func_range: (f64, f64), scale_range: (f64, f64)) -> Option<(f64, f64)> {
        let enter = self.push(Grade::new(func_range.0, scale_range.0));
        let leave_a = (func_range.1 - self.base.alpha) / self.cos;
        let leave_e = (scale_range.1 - self.base.eps) / self.sin;
        let leave = leave_a.min(leave_e);
        (enter <= leave).then_some((enter, leave))
    }
}

/// See [`SliceLine::push`].
pub fn push_to_line(grade: Grade, line: &SliceLine) -> f64 {
    line.push(grade)
}

/// Barcode of `bif` restricted to `line`: every simplex enters at the push
/// of its grade.
pub fn slice_barcode(bif: &Bifiltration, line: &SliceLine, degree: usize) -> Result<PersistenceDiagram> {
    check_degree(degree)?;
    diagram(&slice_filtration(bif, line, degree + 1), degree)
}

/// Filtration of `bif` along `line`. Simplices sharing a grade are
/// contiguous in canonical order and sorted by dimension, so only the
/// distinct grades need sorting by their push.
fn slice_filtration(bif: &Bifiltration, line: &SliceLine, max_dim: usize) -> FilteredComplex {
    let s = bif.simplices();
    // runs of equal grade: (push, start, end)
    let mut runs: Vec<(f64, usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=s.len() {
        if k == s.len() || s[k].grade() != s[start].grade() {
            runs.push((line.push(s[start].grade()), start, k));
            start = k;
        }
    }
    runs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut order: Vec<u32> = Vec::with_capacity(s.len());
    let mut r = 0;
    while r < runs.len() {
        let mut q = r;
        while q < runs.len() && runs[q].0 == runs[r].0 {
            q += 1;
        }
        for dim in 0..=max_dim {
            for &(_, a, b) in &runs[r..q] {
                order.extend((a..b).filter(|&k| s[k].dim() == dim).map(|k| k as u32));
            }
        }
        r = q;
    }
    let mut pos = vec![u32::MAX; s.len()];
    for (k, &i) in order.iter().enumerate() {
        pos[i as usize] = k as u32;
    }
    let cells = order
        .iter()
        .map(|&i| {
            let i = i as usize;
            let v = line.push(s[i].grade());
            let f = bif.facets(i);
            match s[i].dim() {
                0 => Cell::vertex(v),
                1 => Cell::edge(v, pos[f[0] as usize], pos[f[1] as usize]),
                _ => Cell::triangle(v, pos[f[0] as usize], pos[f[1] as usize], pos[f[2] as usize]),
            }
        })
        .collect();
    FilteredComplex::from_trusted(cells)
}
