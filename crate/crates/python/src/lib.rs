use biperstat::bifiltration::{self as bf};
use biperstat::bipersistence::{self as bp, SliceLine};
use biperstat::distance::{self as dist, MatchingParams};
use biperstat::geometry::{self as geo, RankOrder};
use biperstat::persistence::PersistenceDiagram;
use biperstat::stats::{self, PercentileMode, ValueGrid};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: biperstat::Error) -> PyErr {
    match e {
        biperstat::Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

type Pairs = Vec<(f64, f64)>;

fn diagram(degree: usize, pairs: Pairs) -> PyResult<PersistenceDiagram> {
    PersistenceDiagram::new(degree, pairs).map_err(py_err)
}

fn rows<T: Copy>(values: &[T], m: usize, n: usize) -> Vec<Vec<T>> {
    (0..m).map(|i| values[i * n..(i + 1) * n].to_vec()).collect()
}

/// Points with one function value (rank) each.
#[pyclass(name = "PointCloud", module = "biperstat", frozen)]
struct PyPointCloud(geo::PointCloud);

#[pymethods]
impl PyPointCloud {
    #[new]
    fn new(points: Vec<Vec<f64>>, func: Vec<f64>) -> PyResult<Self> {
        geo::PointCloud::new(points, func).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, dim, seed, mean = 0.0, sd = 1.0))]
    fn gaussian(n: usize, dim: usize, seed: u64, mean: f64, sd: f64) -> PyResult<Self> {
        geo::sample_gaussian_cloud(n, dim, mean, sd, seed).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, dim, seed, clusters = 4, center_sd = 0.8, spread_sd = 0.6))]
    fn clustered(n: usize, dim: usize, seed: u64, clusters: usize, center_sd: f64, spread_sd: f64) -> PyResult<Self> {
        geo::sample_clustered_cloud(n, dim, clusters, center_sd, spread_sd, seed)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        geo::PointCloud::from_csv(text).map(Self).map_err(py_err)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    /// Copy with a seeded random permutation of `1..=n` as function values.
    fn with_random_ranks(&self, seed: u64) -> PyResult<Self> {
        geo::assign_ranks(&self.0, &RankOrder::Seed(seed)).map(Self).map_err(py_err)
    }

    /// Copy with `k` points swapped for points of `pool`; nested in `k`.
    fn replace(&self, pool: &PyPointCloud, k: usize, seed: u64) -> PyResult<Self> {
        geo::replace_points(&self.0, &pool.0, k, seed).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn func(&self) -> Vec<f64> {
        self.0.func().to_vec()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.0.points().map(<[f64]>::to_vec).collect()
    }

    fn diameter(&self) -> f64 {
        geo::distance_matrix(&self.0).max()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(n={}, dim={})", self.0.len(), self.0.dim())
    }
}

/// An `m x n` grid on the (function, scale) plane.
#[pyclass(name = "Grid", module = "biperstat", frozen)]
struct PyGrid(geo::GridSpec);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(m: usize, n: usize, func_range: (f64, f64), scale_range: (f64, f64)) -> PyResult<Self> {
        geo::GridSpec::new(m, n, func_range, scale_range).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn for_cloud(cloud: &PyPointCloud, max_scale: f64, m: usize, n: usize) -> PyResult<Self> {
        geo::GridSpec::for_cloud(&cloud.0, max_scale, m, n).map(Self).map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.m(), self.0.n())
    }

    fn alphas(&self) -> Vec<f64> {
        self.0.alphas()
    }

    fn epsilons(&self) -> Vec<f64> {
        self.0.epsilons()
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid({}x{}, func={:?}, scale={:?})",
            self.0.m(),
            self.0.n(),
            self.0.func_range(),
            self.0.scale_range()
        )
    }
}

#[pyclass(name = "Bifiltration", module = "biperstat", frozen)]
struct PyBifiltration(bf::Bifiltration);

#[pymethods]
impl PyBifiltration {
    /// Function-Rips bifiltration with simplices up to `max_dim` (1 or 2).
    #[staticmethod]
    #[pyo3(signature = (cloud, max_dim = 2, max_scale = None))]
    fn function_rips(cloud: &PyPointCloud, max_dim: usize, max_scale: Option<f64>) -> PyResult<Self> {
        bf::build_function_rips(&cloud.0, &geo::distance_matrix(&cloud.0), max_dim, max_scale)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        bf::Bifiltration::from_text(text).map(Self).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn coarsen(&self, grid: &PyGrid) -> Self {
        Self(bf::coarsen(&self.0, &grid.0))
    }

    /// `(vertices, (alpha, eps))` per simplex in canonical order.
    fn simplices(&self) -> Vec<(Vec<u32>, (f64, f64))> {
        self.0
            .simplices()
            .iter()
            .map(|s| (s.vertices().to_vec(), (s.grade().alpha, s.grade().eps)))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Hilbert function on `grid` as `m` rows (function index) of `n` values.
#[pyfunction]
#[pyo3(signature = (bif, grid, degree = 0))]
fn hilbert(bif: &PyBifiltration, grid: &PyGrid, degree: usize) -> PyResult<Vec<Vec<u32>>> {
    let h = bp::hilbert_function(&bif.0, &grid.0, degree).map_err(py_err)?;
    Ok(rows(h.values(), grid.0.m(), grid.0.n()))
}

/// Bigraded Betti numbers as three `m x n` tables `(xi0, xi1, xi2)`.
#[pyfunction]
#[pyo3(signature = (bif, grid, degree = 0))]
#[allow(clippy::type_complexity)]
fn betti(bif: &PyBifiltration, grid: &PyGrid, degree: usize) -> PyResult<(Vec<Vec<u32>>, Vec<Vec<u32>>, Vec<Vec<u32>>)> {
    let b = bp::bigraded_betti(&bif.0, &grid.0, degree).map_err(py_err)?;
    let (m, n) = (grid.0.m(), grid.0.n());
    let table = |f: &dyn Fn(usize, usize) -> u32| (0..m).map(|i| (0..n).map(|j| f(i, j)).collect()).collect();
    Ok((
        table(&|i, j| b.xi0(i, j)),
        table(&|i, j| b.xi1(i, j)),
        table(&|i, j| b.xi2(i, j)),
    ))
}

/// Barcode of the restriction to the line with the given angle (degrees,
/// strictly between 0 and 90) and offset.
#[pyfunction]
#[pyo3(signature = (bif, angle_deg, offset, degree = 0))]
fn slice_barcode(bif: &PyBifiltration, angle_deg: f64, offset: f64, degree: usize) -> PyResult<Pairs> {
    let line = SliceLine::new(angle_deg, offset).map_err(py_err)?;
    let d = bp::slice_barcode(&bif.0, &line, degree).map_err(py_err)?;
    Ok(d.pairs().to_vec())
}

/// Bottleneck distance between two lists of `(birth, death)` pairs;
/// `float('inf')` marks an essential class.
#[pyfunction]
fn bottleneck(a: Pairs, b: Pairs) -> PyResult<f64> {
    dist::bottleneck_distance(&diagram(0, a)?, &diagram(0, b)?).map_err(py_err)
}

/// Approximate matching distance; returns `(value, angle_deg, offset)` of
/// the realizing line.
#[pyfunction]
#[pyo3(signature = (a, b, degree = 0, angles = 20, offsets = 20, normalize = false))]
fn matching_distance(
    a: &PyBifiltration,
    b: &PyBifiltration,
    degree: usize,
    angles: usize,
    offsets: usize,
    normalize: bool,
) -> PyResult<(f64, f64, f64)> {
    let params = MatchingParams {
        num_angles: angles,
        num_offsets: offsets,
        normalize,
    };
    let r = dist::matching_distance(&a.0, &b.0, degree, &params).map_err(py_err)?;
    let l = r.realizing_line();
    Ok((r.value, l.angle_deg(), l.offset()))
}

/// Welch t of `mean(b) - mean(a)` and its degrees of freedom.
#[pyfunction]
fn welch_t(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    stats::welch_t(&a, &b).map_err(py_err)
}

fn value_grids(grids: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<ValueGrid>> {
    grids
        .into_iter()
        .map(|g| {
            let m = g.len();
            let n = g.first().map_or(0, Vec::len);
            if g.iter().any(|r| r.len() != n) {
                return Err(PyValueError::new_err("ragged grid"));
            }
            ValueGrid::new(m, n, g.concat()).map_err(py_err)
        })
        .collect()
}

/// Pixelwise test of `observed` against `reference` grids (each a list of
/// rows) with a null from random splits of `reference`. Returns a dict with
/// `t`, `z`, `significant` (flat, row-major), `power`, `mu` and `sigma`.
#[pyfunction]
#[pyo3(signature = (observed, reference, experiments = 500, seed = 0, per_pixel = false))]
fn large_scale_test<'py>(
    py: Python<'py>,
    observed: Vec<Vec<Vec<f64>>>,
    reference: Vec<Vec<Vec<f64>>>,
    experiments: usize,
    seed: u64,
    per_pixel: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let obs = value_grids(observed)?;
    let refs = value_grids(reference)?;
    let mode = if per_pixel {
        PercentileMode::PerPixel
    } else {
        PercentileMode::Pooled
    };
    let half = refs.len() / 2;
    let null = stats::cv_null(&refs, experiments, (half, refs.len() - half), mode, seed).map_err(py_err)?;
    let r = stats::large_scale_test(&obs, &refs, &null).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("t", r.t)?;
    out.set_item("z", r.z)?;
    out.set_item("significant", r.mask)?;
    out.set_item("power", r.power)?;
    out.set_item("mu", null.mu)?;
    out.set_item("sigma", null.sigma)?;
    Ok(out)
}

/// Fraction of `observed` distances above the 95th percentile of the
/// bootstrap null of the mean within-group distance.
#[pyfunction]
#[pyo3(signature = (within, observed, bootstrap = 1000, seed = 0))]
fn matching_distance_test(within: Vec<f64>, observed: Vec<f64>, bootstrap: usize, seed: u64) -> PyResult<f64> {
    stats::matching_distance_test(&within, &observed, bootstrap, seed)
        .map(|r| r.fraction)
        .map_err(py_err)
}

/// Two-sided bootstrap test of mean bar length; returns
/// `(reject, z, power)`.
#[pyfunction]
#[pyo3(signature = (null, observed, bootstrap = 1000, seed = 0))]
fn bar_length_test(null: Vec<f64>, observed: Vec<f64>, bootstrap: usize, seed: u64) -> PyResult<(bool, f64, f64)> {
    stats::bar_length_test(&null, &observed, bootstrap, seed)
        .map(|r| (r.reject, r.z, r.power))
        .map_err(py_err)
}

#[pymodule(name = "biperstat")]
fn biperstat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyBifiltration>()?;
    m.add_function(wrap_pyfunction!(hilbert, m)?)?;
    m.add_function(wrap_pyfunction!(betti, m)?)?;
    m.add_function(wrap_pyfunction!(slice_barcode, m)?)?;
    m.add_function(wrap_pyfunction!(bottleneck, m)?)?;
    m.add_function(wrap_pyfunction!(matching_distance, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t, m)?)?;
    m.add_function(wrap_pyfunction!(large_scale_test, m)?)?;
    m.add_function(wrap_pyfunction!(matching_distance_test, m)?)?;
    m.add_function(wrap_pyfunction!(bar_length_test, m)?)?;
    Ok(())
}
