//! One-parameter persistent homology over the two-element field.
//!
//! Boundary columns are sorted lists of row positions; adding two columns
//! is a symmetric difference. Reduction is the standard left-to-right
//! algorithm with a pivot table, without clearing.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{input, parse_err, Result};

/// A cell of a filtered complex: its dimension, filtration value and the
/// positions of its codimension-1 faces (all earlier in the order).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    dim: u8,
    value: f64,
    facets: [u32; 3],
}

impl Cell {
    pub fn vertex(value: f64) -> Self {
        Self {
            dim: 0,
            value,
            facets: [0; 3],
        }
    }

    pub fn edge(value: f64, a: u32, b: u32) -> Self {
        Self {
            dim: 1,
            value,
            facets: [a, b, 0],
        }
    }

    pub fn triangle(value: f64, e0: u32, e1: u32, e2: u32) -> Self {
        Self {
            dim: 2,
            value,
            facets: [e0, e1, e2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn facets(&self) -> &[u32] {
        match self.dim {
            0 => &[],
            1 => &self.facets[..2],
            _ => &self.facets[..3],
        }
    }
}

/// Cells in a total order in which faces precede cofaces and values never decrease.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    cells: Vec<Cell>,
}

impl FilteredComplex {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        for (i, c) in cells.iter().enumerate() {
            if c.dim > 2 {
                return input(format!("cell {i} has unsupported dimension {}", c.dim));
            }
            if !(c.value.is_finite()) {
                return input(format!("cell {i} has non-finite value"));
            }
            if i > 0 && cells[i - 1].value > c.value {
                return input(format!("filtration value decreases at cell {i}"));
            }
            for &f in c.facets() {
                let f = f as usize;
                if f >= i {
                    return input(format!("cell {i} appears before its face {f}"));
                }
                if cells[f].dim + 1 != c.dim {
                    return input(format!("cell {i} lists cell {f} of wrong dimension as a face"));
                }
            }
            if c.dim == 1 && c.facets[0] == c.facets[1] {
                return input(format!("edge {i} has coincident endpoints"));
            }
        }
        Ok(Self { cells })
    }

    /// Wrap cells already known to satisfy the ordering invariants.
    pub(crate) fn from_trusted(cells: Vec<Cell>) -> Self {
        debug_assert!(Self::new(cells.clone()).is_ok());
        Self { cells }
    }

    /// Build from simplices given as vertex lists, in the given order.
    /// Fails if a face is missing or comes later than a coface.
    pub fn from_ordered_simplices(simplices: &[(Vec<u32>, f64)]) -> Result<Self> {
        let mut pos: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut cells = Vec::with_capacity(simplices.len());
        for (i, (vs, value)) in simplices.iter().enumerate() {
            let mut vs = vs.clone();
            vs.sort_unstable();
            if vs.is_empty() || vs.len() > 3 || vs.windows(2).any(|w| w[0] == w[1]) {
                return input(format!("simplex {i} has invalid vertex list {vs:?}"));
            }
            let lookup = |face: Vec<u32>| -> Result<u32> {
                pos.get(&face)
                    .copied()
                    .ok_or_else(|| crate::Error::Input(format!("face {face:?} of simplex {i} does not precede it")))
            };
            let cell = match vs.len() {
                1 => Cell::vertex(*value),
                2 => Cell::edge(*value, lookup(vec![vs[0]])?, lookup(vec![vs[1]])?),
                _ => Cell::triangle(
                    *value,
                    lookup(vec![vs[1], vs[2]])?,
                    lookup(vec![vs[0], vs[2]])?,
                    lookup(vec![vs[0], vs[1]])?,
                ),
            };
            if pos.insert(vs, i as u32).is_some() {
                return input(format!("simplex {i} is listed twice"));
            }
            cells.push(cell);
        }
        Self::new(cells)
    }

    /// Sort simplices by `(value, dimension, vertices)` and build.
    pub fn from_simplices(simplices: &[(Vec<u32>, f64)]) -> Result<Self> {
        let mut sorted: Vec<(Vec<u32>, f64)> = simplices
            .iter()
            .map(|(v, x)| {
                let mut v = v.clone();
                v.sort_unstable();
                (v, *x)
            })
            .collect();
        sorted.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.0.len().cmp(&b.0.len()))
                .then_with(|| a.0.cmp(&b.0))
        });
        Self::from_ordered_simplices(&sorted)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Number of cells with value `<= t` (they form a prefix).
    pub fn prefix_len(&self, t: f64) -> usize {
        self.cells.partition_point(|c| c.value <= t)
    }
}

/// Boundary matrices of a filtered complex over the two-element field.
#[derive(Debug, Clone)]
pub struct ChainComplexF2 {
    /// `columns[k]` lists the faces of cell `k`.
    columns: Vec<Vec<u32>>,
    dims: Vec<u8>,
}

impl ChainComplexF2 {
    pub fn from_complex(fc: &FilteredComplex) -> Self {
        let mut columns = Vec::with_capacity(fc.len());
        let mut dims = Vec::with_capacity(fc.len());
        for c in fc.cells() {
            let mut col = c.facets().to_vec();
            col.sort_unstable();
            columns.push(col);
            dims.push(c.dim);
        }
        Self { columns, dims }
    }

    /// Boundary of cell `k` as sorted positions.
    pub fn boundary(&self, k: usize) -> &[u32] {
        &self.columns[k]
    }

    /// Whether the boundary of every boundary vanishes.
    pub fn composition_vanishes(&self) -> bool {
        self.columns.iter().zip(&self.dims).all(|(col, &d)| {
            if d < 2 {
                return true;
            }
            let mut acc: Vec<u32> = Vec::new();
            for &f in col {
                acc = xor_sorted(&acc, &self.columns[f as usize]);
            }
            acc.is_empty()
        })
    }
}

fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Result of reducing the columns of one dimension.
struct Reduction {
    /// `(low row, column)` for every column that did not vanish.
    pairs: Vec<(u32, u32)>,
    /// Columns that reduced to zero.
    zero: Vec<u32>,
}

/// Standard column reduction of the columns of dimension `dim` among the
/// first `upto` cells.
fn reduce_dim(fc: &FilteredComplex, dim: usize, upto: usize) -> Reduction {
    let mut pivot_owner: HashMap<u32, usize> = HashMap::new();
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut pairs = Vec::new();
    let mut zero = Vec::new();
    for (j, cell) in fc.cells[..upto].iter().enumerate() {
        if cell.dim() != dim {
            continue;
        }
        let mut col = cell.facets().to_vec();
        col.sort_unstable();
        while let Some(&low) = col.last() {
            match pivot_owner.get(&low) {
                Some(&k) => col = xor_sorted(&col, &reduced[k]),
                None => break,
            }
        }
        match col.last() {
            Some(&low) => {
                pivot_owner.insert(low, reduced.len());
                reduced.push(col);
                pairs.push((low, j as u32));
            }
            None => zero.push(j as u32),
        }
    }
    Reduction { pairs, zero }
}

/// A multiset of `(birth, death)` pairs in one homology degree, sorted by
/// `(birth, death)`. Infinite death marks an essential class.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    degree: usize,
    pairs: Vec<(f64, f64)>,
}

impl PersistenceDiagram {
    pub fn new(degree: usize, mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(b, d)) = pairs
            .iter()
            .find(|(b, d)| !b.is_finite() || d.is_nan() || d < b || *d == f64::NEG_INFINITY)
        {
            return input(format!("invalid diagram point ({b}, {d})"));
        }
        sort_pairs(&mut pairs);
        Ok(Self { degree, pairs })
    }

    pub fn empty(degree: usize) -> Self {
        Self {
            degree,
            pairs: Vec::new(),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn finite(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pairs.iter().copied().filter(|p| p.1.is_finite())
    }

    /// Births of the essential (infinite) classes, ascending.
    pub fn essential_births(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .filter(|p| p.1 == f64::INFINITY)
            .map(|p| p.0)
            .collect()
    }

    /// Drop pairs with `birth == death`.
    pub fn without_zero_length(&self) -> Self {
        Self {
            degree: self.degree,
            pairs: self.pairs.iter().copied().filter(|(b, d)| b < d).collect(),
        }
    }

    /// Number of pairs with `birth <= t < death`.
    pub fn alive_at(&self, t: f64) -> usize {
        self.pairs.iter().filter(|(b, d)| *b <= t && t < *d).count()
    }

    /// Lines `degree birth death`, with `inf` for an infinite death.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (b, d) in &self.pairs {
            if d.is_infinite() {
                let _ = writeln!(out, "{} {b} inf", self.degree);
            } else {
                let _ = writeln!(out, "{} {b} {d}", self.degree);
            }
        }
        out
    }

    /// Parse the diagram of `degree` from a text file that may hold several degrees.
    pub fn from_text(text: &str, degree: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let w: Vec<&str> = line.split_whitespace().collect();
            if w.len() != 3 {
                return Err(parse_err(idx + 1, "expected `degree birth death`"));
            }
            let deg: usize = w[0]
                .parse()
                .map_err(|_| parse_err(idx + 1, "degree must be 0 or 1"))?;
            let num = |s: &str| -> Result<f64> {
                if s == "inf" {
                    return Ok(f64::INFINITY);
                }
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(idx + 1, format!("`{s}` is not a number")))
            };
            let (b, d) = (num(w[1])?, num(w[2])?);
            if b.is_infinite() || d < b {
                return Err(parse_err(idx + 1, "need finite birth <= death"));
            }
            if deg == degree {
                pairs.push((b, d));
            }
        }
        Self::new(degree, pairs)
    }
}

fn sort_pairs(pairs: &mut [(f64, f64)]) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > 1 {
        return input(format!("homology degree must be 0 or 1, got {degree}"));
    }
    Ok(())
}

/// Barcode of degree `degree` by column reduction. Components follow the
/// elder rule; when two components born at the same value merge, the one
/// whose oldest vertex comes later in the order dies. Zero-length pairs are
/// kept.
pub fn reduce_and_extract(fc: &FilteredComplex, degree: usize) -> Result<PersistenceDiagram> {
    check_degree(degree)?;
    let n = fc.len();
    let upper = reduce_dim(fc, degree + 1, n);
    let mut killed = vec![false; n];
    let mut pairs = Vec::with_capacity(upper.pairs.len());
    for &(low, col) in &upper.pairs {
        killed[low as usize] = true;
        pairs.push((fc.cells[low as usize].value, fc.cells[col as usize].value));
    }
    let creators: Vec<u32> = if degree == 0 {
        (0..n as u32).filter(|&k| fc.cells[k as usize].dim == 0).collect()
    } else {
        reduce_dim(fc, degree, n).zero
    };
    for k in creators {
        if !killed[k as usize] {
            pairs.push((fc.cells[k as usize].value, f64::INFINITY));
        }
    }
    PersistenceDiagram::new(degree, pairs)
}

/// Degree-0 barcode by union-find, same pairing as [`reduce_and_extract`].
pub fn degree0_union_find(fc: &FilteredComplex) -> PersistenceDiagram {
    let n = fc.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let up = parent[parent[x as usize] as usize];
            parent[x as usize] = up;
            x = up;
        }
        x
    }
    let mut pairs = Vec::new();
    let mut roots = Vec::new();
    for (k, c) in fc.cells.iter().enumerate() {
        match c.dim {
            0 => roots.push(k as u32),
            1 => {
                let ra = find(&mut parent, c.facets[0]);
                let rb = find(&mut parent, c.facets[1]);
                if ra != rb {
                    // roots are the oldest vertex of their component
                    let (elder, younger) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    parent[younger as usize] = elder;
                    pairs.push((fc.cells[younger as usize].value, c.value));
                }
            }
            _ => {}
        }
    }
    for r in roots {
        if find(&mut parent, r) == r {
            pairs.push((fc.cells[r as usize].value, f64::INFINITY));
        }
    }
    sort_pairs(&mut pairs);
    PersistenceDiagram { degree: 0, pairs }
}

/// Dimension of degree-`degree` homology of the subcomplex of cells with
/// value `<= t`, from boundary ranks: `#cells - rank d_k - rank d_{k+1}`.
pub fn betti_at(fc: &FilteredComplex, t: f64, degree: usize) -> Result<usize> {
    check_degree(degree)?;
    let upto = fc.prefix_len(t);
    let cells = fc.cells[..upto].iter().filter(|c| c.dim() == degree).count();
    let rank_here = if degree == 0 {
        0
    } else {
        reduce_dim(fc, degree, upto).pairs.len()
    };
    let rank_above = reduce_dim(fc, degree + 1, upto).pairs.len();
    Ok(cells - rank_here - rank_above)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(list: &[(&[u32], f64)]) -> FilteredComplex {
        let v: Vec<(Vec<u32>, f64)> = list.iter().map(|(s, x)| (s.to_vec(), *x)).collect();
        FilteredComplex::from_ordered_simplices(&v).unwrap()
    }

    #[test]
    fn two_points_elder_rule() {
        let c = fc(&[(&[0], 0.0), (&[1], 0.0), (&[0, 1], 1.0)]);
        let d = reduce_and_extract(&c, 0).unwrap();
        assert_eq!(d.pairs(), &[(0.0, 1.0), (0.0, f64::INFINITY)]);
        assert_eq!(degree0_union_find(&c), d);
    }

    #[test]
    fn four_cycle() {
        let c = fc(&[
            (&[0], 0.0),
            (&[1], 0.0),
            (&[2], 0.0),
            (&[3], 0.0),
            (&[0, 1], 1.0),
            (&[1, 2], 1.0),
            (&[2, 3], 1.0),
            (&[0, 3], 1.0),
        ]);
        let h1 = reduce_and_extract(&c, 1).unwrap();
        assert_eq!(h1.pairs(), &[(1.0, f64::INFINITY)]);
        assert_eq!(betti_at(&c, 1.0, 1).unwrap(), 1);
        assert_eq!(betti_at(&c, 1.0, 0).unwrap(), 1);
    }

    /// Five-point Rips filtration with stages 1..6: isolated points, two
    /// edges, a filled triangle, a loop closing at stage 4 that is filled
    /// at stage 5, then more triangles.
    fn five_point_filtration() -> FilteredComplex {
        fc(&[
            (&[0], 1.0),
            (&[1], 1.0),
            (&[2], 1.0),
            (&[3], 1.0),
            (&[4], 1.0),
            (&[0, 1], 2.0),
            (&[0, 2], 2.0),
            (&[1, 2], 3.0),
            (&[0, 1, 2], 3.0),
            (&[1, 3], 4.0),
            (&[2, 4], 4.0),
            (&[3, 4], 4.0),
            (&[2, 3], 5.0),
            (&[1, 2, 3], 5.0),
            (&[2, 3, 4], 5.0),
            (&[1, 4], 6.0),
            (&[1, 2, 4], 6.0),
            (&[1, 3, 4], 6.0),
        ])
    }

    #[test]
    fn five_point_barcode_shape() {
        let c = five_point_filtration();
        let h0 = reduce_and_extract(&c, 0).unwrap();
        assert_eq!(h0.len(), 5);
        assert!(h0.pairs().iter().all(|p| p.0 == 1.0));
        assert_eq!(h0.essential_births(), vec![1.0]);
        let h1 = reduce_and_extract(&c, 1).unwrap().without_zero_length();
        // loop 1-3-4-2 closes at stage 4, filled at stage 5
        assert_eq!(h1.len(), 1);
        assert_eq!(h1.pairs()[0], (4.0, 5.0));
    }

    #[test]
    fn two_components_one_hole() {
        // a triangle boundary plus a separate filled triangle and a free vertex path
        let c = fc(&[
            (&[0], 0.0),
            (&[1], 0.0),
            (&[2], 0.0),
            (&[3], 0.0),
            (&[4], 0.0),
            (&[5], 0.0),
            (&[6], 0.0),
            (&[0, 1], 0.0),
            (&[1, 2], 0.0),
            (&[0, 2], 0.0),
            (&[2, 3], 0.0),
            (&[4, 5], 0.0),
            (&[5, 6], 0.0),
            (&[4, 6], 0.0),
            (&[4, 5, 6], 0.0),
        ]);
        assert_eq!(betti_at(&c, 0.0, 0).unwrap(), 2);
        assert_eq!(betti_at(&c, 0.0, 1).unwrap(), 1);
        assert_eq!(betti_at(&c, -1.0, 0).unwrap(), 0);
    }

    #[test]
    fn order_violations_rejected() {
        let v = vec![(vec![0, 1], 0.0), (vec![0], 0.0), (vec![1], 0.0)];
        assert!(FilteredComplex::from_ordered_simplices(&v).is_err());
        let v = vec![(vec![0], 1.0), (vec![1], 0.0)];
        assert!(FilteredComplex::from_ordered_simplices(&v).is_err());
        assert!(FilteredComplex::from_simplices(&[(vec![1], 0.0), (vec![0], 0.0), (vec![0, 1], 0.5)]).is_ok());
        assert!(reduce_and_extract(&five_point_filtration(), 2).is_err());
    }

    #[test]
    fn boundary_composition() {
        let c = five_point_filtration();
        assert!(ChainComplexF2::from_complex(&c).composition_vanishes());
    }

    #[test]
    fn diagram_text_roundtrip() {
        let d = PersistenceDiagram::new(1, vec![(0.5, f64::INFINITY), (0.25, 1.0)]).unwrap();
        let text = d.to_text();
        assert_eq!(text, "1 0.25 1\n1 0.5 inf\n");
        assert_eq!(PersistenceDiagram::from_text(&text, 1).unwrap(), d);
        assert!(PersistenceDiagram::from_text(&text, 0).unwrap().is_empty());
        assert!(PersistenceDiagram::from_text("0 2 1\n", 0).is_err());
        assert!(PersistenceDiagram::new(0, vec![(1.0, 0.0)]).is_err());
    }
}
