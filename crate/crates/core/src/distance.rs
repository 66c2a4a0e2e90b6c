//! Bottleneck distance between persistence diagrams and the matching
//! distance between bifiltrations, approximated on a grid of slice lines.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bifiltration::{coarsen, Bifiltration, Grade};
use crate::bipersistence::{slice_barcode, SliceLine};
use crate::error::{input, Error, Result};
use crate::geometry::GridSpec;
use crate::persistence::PersistenceDiagram;

fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

fn half_life(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

/// Exact bottleneck distance. Essential classes are matched among
/// themselves by sorted birth; different numbers of essential classes give
/// `+inf`.
pub fn bottleneck_distance(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<f64> {
    if a.degree() != b.degree() {
        return input(format!(
            "cannot compare diagrams of degree {} and {}",
            a.degree(),
            b.degree()
        ));
    }
    let (ea, eb) = (a.essential_births(), b.essential_births());
    if ea.len() != eb.len() {
        return Ok(f64::INFINITY);
    }
    let essential = ea
        .iter()
        .zip(&eb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let p: Vec<(f64, f64)> = a.finite().filter(|q| q.0 < q.1).collect();
    let q: Vec<(f64, f64)> = b.finite().filter(|q| q.0 < q.1).collect();
    Ok(essential.max(finite_bottleneck(&p, &q)))
}

fn finite_bottleneck(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let upper = p.iter().chain(q).map(|&x| half_life(x)).fold(0.0, f64::max);
    if upper == 0.0 {
        return 0.0;
    }
    let mut cand: Vec<f64> = p.iter().chain(q).map(|&x| half_life(x)).collect();
    cand.push(0.0);
    for &x in p {
        cand.extend(q.iter().map(|&y| linf(x, y)).filter(|&c| c < upper));
    }
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    // the last candidate is `upper`, which is always feasible
    let (mut lo, mut hi) = (0, cand.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(p, q, cand[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cand[lo]
}

/// Is there a matching of cost `<= r`? Points too long to go to the
/// diagonal must be matched; by the Mendelsohn-Dulmage theorem it is enough
/// to saturate each side's long points separately.
fn feasible(p: &[(f64, f64)], q: &[(f64, f64)], r: f64) -> bool {
    saturates(p, q, r) && saturates(q, p, r)
}

fn saturates(from: &[(f64, f64)], to: &[(f64, f64)], r: f64) -> bool {
    let heavy: Vec<(f64, f64)> = from.iter().copied().filter(|&x| half_life(x) > r).collect();
    if heavy.len() > to.len() {
        return false;
    }
    let adj: Vec<Vec<usize>> = heavy
        .iter()
        .map(|&x| (0..to.len()).filter(|&k| linf(x, to[k]) <= r).collect())
        .collect();
    hopcroft_karp(&adj, to.len()) == heavy.len()
}

/// Size of a maximum matching; `adj[u]` lists the right vertices of left vertex `u`.
fn hopcroft_karp(adj: &[Vec<usize>], right: usize) -> usize {
    const NONE: usize = usize::MAX;
    let left = adj.len();
    let mut match_l = vec![NONE; left];
    let mut match_r = vec![NONE; right];
    let mut size = 0;
    // greedy start
    for u in 0..left {
        if let Some(&v) = adj[u].iter().find(|&&v| match_r[v] == NONE) {
            match_l[u] = v;
            match_r[v] = u;
            size += 1;
        }
    }
    let mut dist = vec![0usize; left];
    loop {
        let mut queue = VecDeque::new();
        for u in 0..left {
            if match_l[u] == NONE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = NONE;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NONE {
                    found = true;
                } else if dist[w] == NONE {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return size;
        }
        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            dist: &mut [usize],
            match_l: &mut [usize],
            match_r: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == usize::MAX || (dist[w] == dist[u] + 1 && augment(w, adj, dist, match_l, match_r)) {
                    match_l[u] = v;
                    match_r[v] = u;
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..left {
            if match_l[u] == NONE && augment(u, adj, &mut dist, &mut match_l, &mut match_r) {
                size += 1;
            }
        }
    }
}

/// How lines are sampled for the matching distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingParams {
    pub num_angles: usize,
    pub num_offsets: usize,
    /// Rescale the rectangle of grades to the unit square before slicing.
    pub normalize: bool,
}

impl Default for MatchingParams {
    fn default() -> Self {
        Self {
            num_angles: 20,
            num_offsets: 20,
            normalize: false,
        }
    }
}

/// Axis-aligned rectangle `(func_range, scale_range)` of the grade plane.
pub type Rect = ((f64, f64), (f64, f64));

/// A grid of lines meeting a rectangle: angles `90 k / (K + 1)` for
/// `k = 1..=K`, and for each angle `J` offsets evenly spaced strictly inside
/// the range of offsets of lines that meet the rectangle. Stored
/// angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGrid {
    rect: Rect,
    num_angles: usize,
    num_offsets: usize,
    lines: Vec<SliceLine>,
}

impl LineGrid {
    pub fn new(rect: Rect, num_angles: usize, num_offsets: usize) -> Result<Self> {
        if num_angles == 0 || num_offsets == 0 {
            return input("need at least one angle and one offset");
        }
        let ((a0, a1), (e0, e1)) = rect;
        if !(a0 < a1 && e0 < e1) {
            return input(format!("degenerate rectangle {rect:?}"));
        }
        let mut lines = Vec::with_capacity(num_angles * num_offsets);
        for k in 1..=num_angles {
            let angle = 90.0 * k as f64 / (num_angles + 1) as f64;
            let probe = SliceLine::new(angle, 0.0)?;
            let corners = [(a0, e0), (a0, e1), (a1, e0), (a1, e1)].map(|(a, e)| probe.offset_through(Grade::new(a, e)));
            let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for j in 1..=num_offsets {
                let off = lo + (hi - lo) * j as f64 / (num_offsets + 1) as f64;
                lines.push(SliceLine::new(angle, off)?);
            }
        }
        Ok(Self {
            rect,
            num_angles,
            num_offsets,
            lines,
        })
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn lines(&self) -> &[SliceLine] {
        &self.lines
    }

    pub fn num_angles(&self) -> usize {
        self.num_angles
    }

    pub fn num_offsets(&self) -> usize {
        self.num_offsets
    }
}

/// The bottleneck distance on one line, before and after weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineValue {
    pub line: SliceLine,
    pub bottleneck: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingDistanceResult {
    pub value: f64,
    /// Index into `table` of the first line attaining `value`.
    pub realizing: usize,
    pub table: Vec<LineValue>,
    /// Slice diagrams of the two inputs on the realizing line.
    pub diagrams: (PersistenceDiagram, PersistenceDiagram),
    /// Rectangle the lines were drawn in, in the coordinates of the slices.
    pub rect: Rect,
}

impl MatchingDistanceResult {
    pub fn realizing_line(&self) -> &SliceLine {
        &self.table[self.realizing].line
    }

    /// `angle_deg,offset,slope,weight,bottleneck,weighted`, one row per line.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("angle_deg,offset,slope,weight,bottleneck,weighted\n");
        for r in &self.table {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.line.angle_deg(),
                r.line.offset(),
                r.line.slope(),
                r.line.weight(),
                r.bottleneck,
                r.weighted
            );
        }
        out
    }
}

/// Rectangle shared by two bifiltrations: their common grid, the grid of
/// whichever has one, or the bounding box of all grades (a degenerate axis
/// widened by one unit).
pub fn common_rect(a: &Bifiltration, b: &Bifiltration) -> Result<Rect> {
    match (a.grid(), b.grid()) {
        (Some(g), Some(h)) if g != h => Err(Error::IncompatibleGrids(format!(
            "{}x{} grid vs {}x{} grid with different ranges or bins",
            g.m(),
            g.n(),
            h.m(),
            h.n()
        ))),
        (Some(g), _) | (_, Some(g)) => Ok((g.func_range(), g.scale_range())),
        (None, None) => {
            let bounds = [a.grade_bounds(), b.grade_bounds()];
            let mut it = bounds.iter().flatten();
            let first = *it
                .next()
                .ok_or_else(|| Error::Input("both bifiltrations are empty".into()))?;
            let ((a0, a1), (e0, e1)) = it.fold(first, |((a0, a1), (e0, e1)), &((b0, b1), (f0, f1))| {
                ((a0.min(b0), a1.max(b1)), (e0.min(f0), e1.max(f1)))
            });
            let widen = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
            Ok((widen(a0, a1), widen(e0, e1)))
        }
    }
}

/// Bring `bif` onto `grid` if the other input of a comparison lives there.
fn align(bif: &Bifiltration, grid: Option<&GridSpec>) -> Bifiltration {
    match (bif.grid(), grid) {
        (None, Some(g)) => coarsen(bif, g),
        _ => bif.clone(),
    }
}

/// Map grades affinely so that `rect` becomes the unit square.
pub fn normalize_grades(bif: &Bifiltration, rect: Rect) -> Bifiltration {
    let ((a0, a1), (e0, e1)) = rect;
    let grid = bif
        .grid()
        .map(|g| GridSpec::new(g.m(), g.n(), (0.0, 1.0), (0.0, 1.0)).expect("unit square is a valid range"));
    bif.map_grades(|g| Grade::new((g.alpha - a0) / (a1 - a0), (g.eps - e0) / (e1 - e0)), grid)
        .expect("an increasing affine map keeps grades monotone")
}

/// Slice diagrams of `bif` on every line of `lines`, in line order.
pub fn slice_diagrams(bif: &Bifiltration, lines: &LineGrid, degree: usize) -> Result<Vec<PersistenceDiagram>> {
    lines
        .lines()
        .par_iter()
        .map(|l| slice_barcode(bif, l, degree))
        .collect()
}

/// Matching distance from precomputed slice diagrams on the same lines.
pub fn matching_from_slices(
    lines: &LineGrid,
    da: &[PersistenceDiagram],
    db: &[PersistenceDiagram],
) -> Result<MatchingDistanceResult> {
    if da.len() != lines.lines().len() || db.len() != lines.lines().len() {
        return input("slice diagrams do not match the line grid");
    }
    let table: Vec<LineValue> = lines
        .lines()
        .par_iter()
        .zip(da.par_iter().zip(db))
        .map(|(l, (x, y))| {
            let bn = bottleneck_distance(x, y)?;
            let weighted = if bn == 0.0 { 0.0 } else { bn * l.weight() };
            Ok(LineValue {
                line: *l,
                bottleneck: bn,
                weighted,
            })
        })
        .collect::<Result<_>>()?;
    let mut realizing = 0;
    for (k, r) in table.iter().enumerate() {
        if r.weighted > table[realizing].weighted {
            realizing = k;
        }
    }
    Ok(MatchingDistanceResult {
        value: table[realizing].weighted,
        realizing,
        diagrams: (da[realizing].clone(), db[realizing].clone()),
        table,
        rect: lines.rect(),
    })
}

/// Approximate matching distance: the largest weighted bottleneck distance
/// between slice barcodes over a [`LineGrid`]. Ties go to the first line in
/// angle-major order.
pub fn matching_distance(
    a: &Bifiltration,
    b: &Bifiltration,
    degree: usize,
    params: &MatchingParams,
) -> Result<MatchingDistanceResult> {
    let rect = common_rect(a, b)?;
    let grid = a.grid().or(b.grid()).cloned();
    let (mut a, mut b) = (align(a, grid.as_ref()), align(b, grid.as_ref()));
    let rect = if params.normalize {
        a = normalize_grades(&a, rect);
        b = normalize_grades(&b, rect);
        ((0.0, 1.0), (0.0, 1.0))
    } else {
        rect
    };
    let lines = LineGrid::new(rect, params.num_angles, params.num_offsets)?;
    let da = slice_diagrams(&a, &lines, degree)?;
    let db = slice_diagrams(&b, &lines, degree)?;
    matching_from_slices(&lines, &da, &db)
}

/// Lengths of the bars of both realizing diagrams and their combined mean
/// (0 when there are none). Zero-length bars are skipped; an essential bar
/// is cut where the realizing line leaves the rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct BarLengths {
    pub mean: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

pub fn realizing_bar_lengths(result: &MatchingDistanceResult) -> BarLengths {
    let line = result.realizing_line();
    let exit = line.clip(result.rect.0, result.rect.1).map(|(_, t)| t);
    let lengths = |d: &PersistenceDiagram| -> Vec<f64> {
        d.pairs()
            .iter()
            .filter_map(|&(b, e)| {
                let end = if e.is_finite() { e } else { exit? };
                (end > b).then_some(end - b)
            })
            .collect()
    };
    let first = lengths(&result.diagrams.0);
    let second = lengths(&result.diagrams.1);
    let total = first.len() + second.len();
    let mean = if total == 0 {
        0.0
    } else {
        (first.iter().sum::<f64>() + second.iter().sum::<f64>()) / total as f64
    };
    BarLengths { mean, first, second }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifiltration::Simplex;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn dg(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(0, pairs.to_vec()).unwrap()
    }

    #[test]
    fn bottleneck_examples() {
        let a = dg(&[(0.0, 2.0), (1.0, 3.5), (0.0, f64::INFINITY)]);
        assert_eq!(bottleneck_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(bottleneck_distance(&dg(&[(0.0, 2.0)]), &dg(&[])).unwrap(), 1.0);
        assert_eq!(bottleneck_distance(&dg(&[(0.0, 4.0)]), &dg(&[(1.0, 4.0)])).unwrap(), 1.0);
        assert_eq!(
            bottleneck_distance(&dg(&[(0.0, f64::INFINITY)]), &dg(&[])).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            bottleneck_distance(&dg(&[(0.0, f64::INFINITY)]), &dg(&[(0.5, f64::INFINITY)])).unwrap(),
            0.5
        );
        let h1 = PersistenceDiagram::new(1, vec![]).unwrap();
        assert!(bottleneck_distance(&a, &h1).is_err());
    }

    #[test]
    fn line_grid_shape() {
        let g = LineGrid::new(((0.0, 1.0), (0.0, 1.0)), 20, 20).unwrap();
        assert_eq!(g.lines().len(), 400);
        for l in g.lines() {
            assert!(l.clip((0.0, 1.0), (0.0, 1.0)).is_some());
        }
        // a coarse grid is a subset of a finer one with 2K+1 angles and 2J+1 offsets
        let coarse = LineGrid::new(((0.0, 2.0), (0.0, 1.0)), 3, 3).unwrap();
        let fine = LineGrid::new(((0.0, 2.0), (0.0, 1.0)), 7, 7).unwrap();
        for l in coarse.lines() {
            assert!(fine
                .lines()
                .iter()
                .any(|f| (f.angle_deg() - l.angle_deg()).abs() < 1e-12 && (f.offset() - l.offset()).abs() < 1e-12));
        }
        assert!(LineGrid::new(((0.0, 0.0), (0.0, 1.0)), 2, 2).is_err());
    }

    fn bif(list: &[(&[u32], f64, f64)], n: usize) -> Bifiltration {
        let s = list
            .iter()
            .map(|(v, a, e)| Simplex::new(v, Grade::new(*a, *e)).unwrap())
            .collect();
        Bifiltration::from_simplices(s, n, None).unwrap()
    }

    #[test]
    fn one_extra_generator() {
        let c = 1.5;
        let a = bif(&[(&[0], 0.0, 0.0)], 1);
        let b = bif(&[(&[0], 0.0, 0.0), (&[1], 0.0, 0.0), (&[0, 1], c, c)], 2);
        let diag = SliceLine::new(45.0, 0.0).unwrap();
        let da = slice_barcode(&a, &diag, 0).unwrap();
        let db = slice_barcode(&b, &diag, 0).unwrap();
        // bar (0, c sqrt 2) against the diagonal
        let on_diag = bottleneck_distance(&da, &db).unwrap() * diag.weight();
        assert!((on_diag - FRAC_1_SQRT_2 * c * SQRT_2 / 2.0).abs() < 1e-12);
        let r = matching_distance(&a, &b, 0, &MatchingParams { num_angles: 9, num_offsets: 9, normalize: false }).unwrap();
        assert!((r.value - c / 2.0).abs() < 1e-12);
        let r2 = matching_distance(&b, &a, 0, &MatchingParams { num_angles: 9, num_offsets: 9, normalize: false }).unwrap();
        assert_eq!(r.value, r2.value);
        let same = matching_distance(&a, &a, 0, &MatchingParams::default()).unwrap();
        assert_eq!(same.value, 0.0);
        assert_eq!(same.table.len(), 400);
        assert_eq!(same.realizing, 0);
    }

    #[test]
    fn bar_lengths() {
        let grid = LineGrid::new(((0.0, 1.0), (0.0, 1.0)), 1, 1).unwrap();
        let mk = |a: &[(f64, f64)], b: &[(f64, f64)]| MatchingDistanceResult {
            value: 0.0,
            realizing: 0,
            table: vec![LineValue {
                line: grid.lines()[0],
                bottleneck: 0.0,
                weighted: 0.0,
            }],
            diagrams: (dg(a), dg(b)),
            rect: grid.rect(),
        };
        assert_eq!(realizing_bar_lengths(&mk(&[], &[])).mean, 0.0);
        assert_eq!(realizing_bar_lengths(&mk(&[(0.0, 2.0)], &[])).mean, 2.0);
        let r = realizing_bar_lengths(&mk(&[(0.0, 1.0), (0.0, 3.0)], &[(1.0, 2.0)]));
        assert!((r.mean - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.first, vec![1.0, 3.0]);
        // the 45 degree line through the middle of the unit square leaves it at t = sqrt 2
        let inf = realizing_bar_lengths(&mk(&[(0.0, f64::INFINITY)], &[]));
        assert!((inf.mean - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn incompatible_grids() {
        let a = coarsen(&bif(&[(&[0], 0.0, 0.0)], 1), &GridSpec::new(3, 3, (0.0, 1.0), (0.0, 1.0)).unwrap());
        let b = coarsen(&bif(&[(&[0], 0.0, 0.0)], 1), &GridSpec::new(4, 3, (0.0, 1.0), (0.0, 1.0)).unwrap());
        assert!(matches!(
            matching_distance(&a, &b, 0, &MatchingParams::default()),
            Err(Error::IncompatibleGrids(_))
        ));
        let e = Bifiltration::empty(0);
        assert!(matching_distance(&e, &e, 0, &MatchingParams::default()).is_err());
    }
}
