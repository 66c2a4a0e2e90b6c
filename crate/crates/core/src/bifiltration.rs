//! Function-Rips bifiltrations up to dimension 2.
//!
//! A simplex on points `P` appears at grade `(alpha, eps)` where `alpha` is
//! the largest function value of its vertices and `eps` its diameter. In an
//! uncoarsened bifiltration an edge or triangle of diameter `d` is present at
//! scale `eps` only when `d < eps`; vertices are present at every scale.
//! Coarsening snaps every grade up to the grid, after which presence at grid
//! points is the closed test `grade <= point` in both coordinates.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{input, parse_err, Result};
use crate::geometry::{DistanceMatrix, GridSpec, PointCloud};

/// A point of the (function, scale) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grade {
    pub alpha: f64,
    pub eps: f64,
}

impl Grade {
    pub const fn new(alpha: f64, eps: f64) -> Self {
        Self { alpha, eps }
    }

    /// Coordinatewise `<=`.
    pub fn le(&self, other: &Grade) -> bool {
        self.alpha <= other.alpha && self.eps <= other.eps
    }
}

/// A vertex, edge or triangle with its grade of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    verts: [u32; 3],
    dim: u8,
    grade: Grade,
}

impl Simplex {
    /// `vertices` must be strictly increasing and hold 1 to 3 entries.
    pub fn new(vertices: &[u32], grade: Grade) -> Result<Self> {
        if vertices.is_empty() || vertices.len() > 3 {
            return input(format!("simplex with {} vertices is not supported", vertices.len()));
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return input(format!("simplex vertices {vertices:?} are not strictly increasing"));
        }
        if !(grade.alpha.is_finite() && grade.eps.is_finite() && grade.eps >= 0.0) {
            return input(format!("simplex {vertices:?} has invalid grade {grade:?}"));
        }
        let mut verts = [0; 3];
        verts[..vertices.len()].copy_from_slice(vertices);
        Ok(Self {
            verts,
            dim: (vertices.len() - 1) as u8,
            grade,
        })
    }

    pub fn vertices(&self) -> &[u32] {
        &self.verts[..=self.dim as usize]
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn grade(&self) -> Grade {
        self.grade
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.grade
            .alpha
            .total_cmp(&other.grade.alpha)
            .then(self.grade.eps.total_cmp(&other.grade.eps))
            .then(self.dim.cmp(&other.dim))
            .then_with(|| self.vertices().cmp(other.vertices()))
    }
}

/// Bigraded simplicial complex, stored in canonical order
/// `(alpha, eps, dimension, vertices)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bifiltration {
    simplices: Vec<Simplex>,
    /// Positions of the codimension-1 faces of each simplex.
    facets: Vec<[u32; 3]>,
    grid: Option<GridSpec>,
    source_size: usize,
}

impl Bifiltration {
    /// Validate and index a set of simplices: vertices lie below
    /// `source_size`, the set is closed under faces and grades are monotone
    /// along face relations.
    pub fn from_simplices(
        mut simplices: Vec<Simplex>,
        source_size: usize,
        grid: Option<GridSpec>,
    ) -> Result<Self> {
        if let Some(s) = simplices
            .iter()
            .find(|s| s.vertices().iter().any(|&v| v as usize >= source_size))
        {
            return input(format!("simplex {:?} refers to a vertex >= {source_size}", s.vertices()));
        }
        simplices.par_sort_unstable_by(Simplex::canonical_cmp);
        if let Some(w) = simplices
            .windows(2)
            .find(|w| w[0].vertices() == w[1].vertices())
        {
            return input(format!("simplex {:?} listed twice", w[0].vertices()));
        }
        let facets = index_facets(&simplices)?;
        for (s, f) in simplices.iter().zip(&facets) {
            for &fi in &f[..facet_count(s.dim())] {
                if !simplices[fi as usize].grade.le(&s.grade) {
                    return input(format!(
                        "simplex {:?} has grade {:?} below its face {:?}",
                        s.vertices(),
                        s.grade,
                        simplices[fi as usize].vertices()
                    ));
                }
            }
        }
        Ok(Self {
            simplices,
            facets,
            grid,
            source_size,
        })
    }

    pub fn empty(source_size: usize) -> Self {
        Self {
            simplices: Vec::new(),
            facets: Vec::new(),
            grid: None,
            source_size,
        }
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Positions of the codimension-1 faces of simplex `i` (empty for vertices).
    pub fn facets(&self, i: usize) -> &[u32] {
        &self.facets[i][..facet_count(self.simplices[i].dim())]
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn max_dim(&self) -> usize {
        self.simplices.iter().map(Simplex::dim).max().unwrap_or(0)
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.dim() == dim).count()
    }

    /// Is simplex `i` present in the complex at `(alpha, eps)`?
    pub fn is_present(&self, i: usize, alpha: f64, eps: f64) -> bool {
        let s = &self.simplices[i];
        let g = s.grade;
        if g.alpha > alpha {
            return false;
        }
        if self.grid.is_some() || s.dim() == 0 {
            g.eps <= eps
        } else {
            g.eps < eps
        }
    }

    /// Positions of all simplices present at `(alpha, eps)`.
    pub fn present_at(&self, alpha: f64, eps: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.is_present(i, alpha, eps))
            .collect()
    }

    /// Apply `f` to every grade and attach `grid`. `f` must be
    /// nondecreasing in each coordinate.
    pub fn map_grades(&self, f: impl Fn(Grade) -> Grade, grid: Option<GridSpec>) -> Result<Self> {
        let simplices = self
            .simplices
            .iter()
            .map(|s| Simplex {
                grade: f(s.grade),
                ..s.clone()
            })
            .collect();
        Self::from_simplices(simplices, self.source_size, grid)
    }

    /// Bounding box of all grades, `None` when empty.
    pub fn grade_bounds(&self) -> Option<((f64, f64), (f64, f64))> {
        let first = self.simplices.first()?.grade;
        let init = ((first.alpha, first.alpha), (first.eps, first.eps));
        Some(self.simplices.iter().fold(init, |((a0, a1), (e0, e1)), s| {
            (
                (a0.min(s.grade.alpha), a1.max(s.grade.alpha)),
                (e0.min(s.grade.eps), e1.max(s.grade.eps)),
            )
        }))
    }

    /// One simplex per line: `v0 [v1 [v2]] ; alpha eps`. Lines starting
    /// with `#` carry the point count and the grid of a coarsened object.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# points {}", self.source_size);
        if let Some(g) = &self.grid {
            let (a0, a1) = g.func_range();
            let (e0, e1) = g.scale_range();
            let _ = writeln!(out, "# grid {} {} {a0} {a1} {e0} {e1}", g.m(), g.n());
        }
        for s in &self.simplices {
            let vs: Vec<String> = s.vertices().iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{} ; {} {}", vs.join(" "), s.grade.alpha, s.grade.eps);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut simplices = Vec::new();
        let mut source_size = None;
        let mut grid = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let words: Vec<&str> = meta.split_whitespace().collect();
                match words.first() {
                    Some(&"points") if words.len() == 2 => {
                        source_size = Some(
                            words[1]
                                .parse::<usize>()
                                .map_err(|_| parse_err(line_no, "bad point count"))?,
                        );
                    }
                    Some(&"grid") if words.len() == 7 => {
                        let m = words[1].parse().map_err(|_| parse_err(line_no, "bad grid m"))?;
                        let n = words[2].parse().map_err(|_| parse_err(line_no, "bad grid n"))?;
                        let f: Vec<f64> = words[3..]
                            .iter()
                            .map(|w| w.parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| parse_err(line_no, "bad grid range"))?;
                        grid = Some(
                            GridSpec::new(m, n, (f[0], f[1]), (f[2], f[3]))
                                .map_err(|e| parse_err(line_no, e.to_string()))?,
                        );
                    }
                    _ => {}
                }
                continue;
            }
            let (vs, gs) = line
                .split_once(';')
                .ok_or_else(|| parse_err(line_no, "expected `vertices ; alpha eps`"))?;
            let verts: Vec<u32> = vs
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(line_no, "vertex ids must be nonnegative integers"))?;
            let g: Vec<f64> = gs
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(line_no, "grade must be two numbers"))?;
            if g.len() != 2 {
                return Err(parse_err(line_no, "grade must be two numbers"));
            }
            let s = Simplex::new(&verts, Grade::new(g[0], g[1]))
                .map_err(|e| parse_err(line_no, e.to_string()))?;
            simplices.push(s);
        }
        let inferred = simplices
            .iter()
            .flat_map(|s| s.vertices().iter().map(|&v| v as usize + 1))
            .max()
            .unwrap_or(0);
        let n = source_size.unwrap_or(inferred);
        Self::from_simplices(simplices, n, grid)
    }
}

fn facet_count(dim: usize) -> usize {
    match dim {
        0 => 0,
        1 => 2,
        _ => 3,
    }
}

fn index_facets(simplices: &[Simplex]) -> Result<Vec<[u32; 3]>> {
    let mut vertex_pos: HashMap<u32, u32> = HashMap::new();
    let mut edge_pos: HashMap<(u32, u32), u32> = HashMap::new();
    for (i, s) in simplices.iter().enumerate() {
        match s.dim() {
            0 => {
                vertex_pos.insert(s.verts[0], i as u32);
            }
            1 => {
                edge_pos.insert((s.verts[0], s.verts[1]), i as u32);
            }
            _ => {}
        }
    }
    let missing = |s: &Simplex| {
        input::<[u32; 3]>(format!("simplex {:?} is missing a face", s.vertices()))
    };
    simplices
        .par_iter()
        .map(|s| {
            let [a, b, c] = s.verts;
            match s.dim() {
                0 => Ok([0; 3]),
                1 => match (vertex_pos.get(&a), vertex_pos.get(&b)) {
                    (Some(&x), Some(&y)) => Ok([x, y, 0]),
                    _ => missing(s),
                },
                _ => match (
                    edge_pos.get(&(b, c)),
                    edge_pos.get(&(a, c)),
                    edge_pos.get(&(a, b)),
                ) {
                    (Some(&x), Some(&y), Some(&z)) => Ok([x, y, z]),
                    _ => missing(s),
                },
            }
        })
        .collect()
}

/// Function-Rips bifiltration of `cloud` with simplices up to `max_dim`
/// (1 or 2). Edges of length `>= max_scale` are left out, as are triangles
/// with such an edge. `max_scale = None` keeps every edge (the cutoff is
/// one ulp above the largest distance).
pub fn build_function_rips(
    cloud: &PointCloud,
    dist: &DistanceMatrix,
    max_dim: usize,
    max_scale: Option<f64>,
) -> Result<Bifiltration> {
    if !(1..=2).contains(&max_dim) {
        return input(format!("max_dim must be 1 or 2, got {max_dim}"));
    }
    let n = cloud.len();
    if dist.len() != n {
        return input(format!("distance matrix has size {} for {n} points", dist.len()));
    }
    let cutoff = max_scale.unwrap_or_else(|| dist.max().next_up());
    if !(cutoff > 0.0) {
        return input("max_scale must be positive");
    }
    let f = cloud.func();
    let mut simplices: Vec<Simplex> = (0..n)
        .map(|i| Simplex {
            verts: [i as u32, 0, 0],
            dim: 0,
            grade: Grade::new(f[i], 0.0),
        })
        .collect();
    let edges: Vec<Simplex> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..n).filter_map(move |j| {
                let d = dist.get(i, j);
                (d < cutoff).then(|| Simplex {
                    verts: [i as u32, j as u32, 0],
                    dim: 1,
                    grade: Grade::new(f[i].max(f[j]), d),
                })
            })
        })
        .collect();
    simplices.extend(edges);
    if max_dim == 2 {
        let triangles: Vec<Simplex> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (i + 1..n).flat_map(move |j| {
                    let dij = dist.get(i, j);
                    (j + 1..n).filter_map(move |k| {
                        let d = dij.max(dist.get(i, k)).max(dist.get(j, k));
                        (d < cutoff).then(|| Simplex {
                            verts: [i as u32, j as u32, k as u32],
                            dim: 2,
                            grade: Grade::new(f[i].max(f[j]).max(f[k]), d),
                        })
                    })
                })
            })
            .collect();
        simplices.extend(triangles);
    }
    Bifiltration::from_simplices(simplices, n, None)
}

/// Snap every grade up onto `grid`. Grades beyond the grid are clamped to
/// the top bin. For an uncoarsened input, the scale of an edge or triangle
/// snaps to the least grid value strictly above its diameter so that
/// presence at grid points is unchanged.
pub fn coarsen(bif: &Bifiltration, grid: &GridSpec) -> Bifiltration {
    let strict = bif.grid.is_none();
    let simplices: Vec<Simplex> = bif
        .simplices
        .iter()
        .map(|s| {
            let ai = grid.snap_alpha(s.grade.alpha);
            let ej = if strict && s.dim() > 0 {
                grid.snap_eps_strict(s.grade.eps)
            } else {
                grid.snap_eps(s.grade.eps)
            };
            Simplex {
                grade: Grade::new(grid.alpha(ai), grid.eps(ej)),
                ..s.clone()
            }
        })
        .collect();
    Bifiltration::from_simplices(simplices, bif.source_size, Some(grid.clone()))
        .expect("snapping preserves closure and monotone grades")
}

/// Grid indices `(i, j)` of each simplex of a bifiltration coarsened onto `grid`.
pub fn grid_indices(bif: &Bifiltration, grid: &GridSpec) -> Vec<(usize, usize)> {
    bif.simplices
        .iter()
        .map(|s| (grid.snap_alpha(s.grade.alpha), grid.snap_eps(s.grade.eps)))
        .collect()
}
