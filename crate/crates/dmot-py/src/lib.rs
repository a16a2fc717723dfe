//! Python bindings: a [`Structure`] class wrapping the persisted hierarchy
//! with its query operations, and a [`DynamicMst`] class for maintained
//! approximate spanning trees. Module name `dmot._native`; the `dmot`
//! package re-exports everything.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use dmot_core::applications::{
    self, facility_location_restricted, fl_preprocess_unrestricted, fl_query_unrestricted,
};
use dmot_core::dynamic_mst::{b_constant, LayeredMstState};
use dmot_core::extraction::extract_subtree;
use dmot_core::hierarchy::compress;
use dmot_core::metric::MetricSpace;
use dmot_core::partition::{build_partition_tree, PartitionConfig};
use dmot_core::path_nav::build_path_decomposition;
use dmot_core::persistence;
use dmot_core::spanner::{build_pseudospanner, stretch_constant, Pseudospanner};
use dmot_core::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn sorted_ids(s: &[u32]) -> Vec<u32> {
    let mut s = s.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// The preprocessed hierarchy plus navigation structures; everything the
/// query phase needs, independent of the original distances.
#[pyclass(module = "dmot")]
struct Structure {
    inner: persistence::Structure,
}

impl Structure {
    fn from_metric(
        ms: &MetricSpace,
        tau: f64,
        eta: u32,
        epsilon: Option<f64>,
        fl_costs: Option<Vec<f64>>,
        eps0: f64,
    ) -> PyResult<Self> {
        let r0 = ms.min_dist / 2.0;
        let cfg = match epsilon {
            Some(eps) => PartitionConfig::from_epsilon(eps, r0),
            None => PartitionConfig::new(tau, eta, r0),
        }
        .map_err(err)?;
        let tree = compress(&build_partition_tree(ms, cfg).map_err(err)?);
        let pd = build_path_decomposition(&tree);
        let fl = match fl_costs {
            Some(costs) => {
                if costs.len() != ms.n {
                    return Err(PyValueError::new_err(format!(
                        "{} opening costs for {} points",
                        costs.len(),
                        ms.n
                    )));
                }
                Some(fl_preprocess_unrestricted(&tree, &costs, eps0))
            }
            None => None,
        };
        Ok(Structure {
            inner: persistence::Structure { tree, pd, fl },
        })
    }

    fn spanner_of(&self, s: &[u32]) -> PyResult<Pseudospanner> {
        let s = sorted_ids(s);
        if s.is_empty() {
            return Err(err(Error::EmptyQuery));
        }
        let et = extract_subtree(&self.inner.tree, &self.inner.pd, &s).map_err(err)?;
        Ok(build_pseudospanner(&et, &self.inner.tree.config))
    }
}

#[pymethods]
impl Structure {
    /// Preprocess a point set (one coordinate list per point).
    #[staticmethod]
    #[pyo3(signature = (points, tau = 2.0, eta = 2, epsilon = None, fl_costs = None, eps0 = 0.5))]
    fn from_points(
        points: Vec<Vec<f64>>,
        tau: f64,
        eta: u32,
        epsilon: Option<f64>,
        fl_costs: Option<Vec<f64>>,
        eps0: f64,
    ) -> PyResult<Self> {
        let ms = MetricSpace::from_points(&points).map_err(err)?;
        Structure::from_metric(&ms, tau, eta, epsilon, fl_costs, eps0)
    }

    /// Preprocess a full symmetric distance matrix.
    #[staticmethod]
    #[pyo3(signature = (matrix, tau = 2.0, eta = 2, epsilon = None, fl_costs = None, eps0 = 0.5))]
    fn from_matrix(
        matrix: Vec<Vec<f64>>,
        tau: f64,
        eta: u32,
        epsilon: Option<f64>,
        fl_costs: Option<Vec<f64>>,
        eps0: f64,
    ) -> PyResult<Self> {
        let n = matrix.len();
        let entries: Vec<f64> = matrix.into_iter().flatten().collect();
        let ms = MetricSpace::from_matrix(n, entries).map_err(err)?;
        Structure::from_metric(&ms, tau, eta, epsilon, fl_costs, eps0)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Structure {
            inner: persistence::load(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(bytes: Vec<u8>) -> PyResult<Self> {
        Ok(Structure {
            inner: persistence::from_bytes(&bytes).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        persistence::save(&self.inner, path).map_err(err)
    }

    fn to_bytes(&self) -> Vec<u8> {
        persistence::to_bytes(&self.inner)
    }

    /// Number of preprocessed points.
    #[getter]
    fn n(&self) -> usize {
        self.inner.tree.n
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tree.config.tau
    }

    #[getter]
    fn eta(&self) -> u32 {
        self.inner.tree.config.eta
    }

    /// Whether facility-location shortlists were preprocessed.
    #[getter]
    fn has_fl_index(&self) -> bool {
        self.inner.fl.is_some()
    }

    /// First level at which the sets of u and v know each other.
    fn meet(&self, u: u32, v: u32) -> PyResult<i64> {
        self.inner.pd.meet(&self.inner.tree, u, v).map_err(err)
    }

    /// Radius r_j of a level.
    fn radius(&self, level: i64) -> f64 {
        self.inner.tree.radius(level)
    }

    /// Distance estimate from the hierarchy alone: r_{L-1} for the
    /// first-knowing level L (within the configured stretch of the truth).
    fn distance_estimate(&self, u: u32, v: u32) -> PyResult<f64> {
        if u == v {
            return Ok(0.0);
        }
        let l = self.inner.pd.meet(&self.inner.tree, u, v).map_err(err)?;
        Ok(self.inner.tree.radius(l - 1))
    }

    /// Low-stretch graph over the query set: (u, v, weight) triples in
    /// point ids.
    fn spanner(&self, s: Vec<u32>) -> PyResult<Vec<(u32, u32, f64)>> {
        let sp = self.spanner_of(&s)?;
        Ok(sp
            .edges
            .iter()
            .map(|&(a, b, w)| (sp.points[a as usize], sp.points[b as usize], w))
            .collect())
    }

    /// Approximate Steiner/spanning tree of the query set:
    /// (weight, edges as point-id pairs).
    fn steiner_tree(&self, s: Vec<u32>) -> PyResult<(f64, Vec<(u32, u32)>)> {
        Ok(applications::steiner_tree(&self.spanner_of(&s)?))
    }

    /// Approximate Steiner forest connecting each requested pair:
    /// (weight, edges as point-id pairs).
    fn steiner_forest(&self, pairs: Vec<(u32, u32)>) -> PyResult<(f64, Vec<(u32, u32)>)> {
        let s: Vec<u32> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let sp = self.spanner_of(&s)?;
        applications::steiner_forest(&sp, &pairs).map_err(err)
    }

    /// Approximate travelling-salesman tour: (length, visiting order).
    fn tsp(&self, s: Vec<u32>) -> PyResult<(f64, Vec<u32>)> {
        Ok(applications::tsp_tour(&self.spanner_of(&s)?))
    }

    /// Approximate r-center: (radius, centers, assignment per query point).
    fn k_center(&self, s: Vec<u32>, r: usize) -> PyResult<(f64, Vec<u32>, Vec<u32>)> {
        applications::k_center(&self.spanner_of(&s)?, r).map_err(err)
    }

    /// Facility location over an explicit facility list with per-facility
    /// opening costs: (open facilities, (city, facility) assignment,
    /// opening cost, connection cost).
    fn facility_location(
        &self,
        cities: Vec<u32>,
        facilities: Vec<u32>,
        costs: Vec<f64>,
    ) -> PyResult<(Vec<u32>, Vec<(u32, u32)>, f64, f64)> {
        if facilities.len() != costs.len() {
            return Err(PyValueError::new_err("one cost per facility required"));
        }
        let mut s = cities.clone();
        s.extend_from_slice(&facilities);
        let sp = self.spanner_of(&s)?;
        let sol = facility_location_restricted(&sp, &cities, &facilities, &costs).map_err(err)?;
        Ok((sol.open, sol.assignment, sol.opening_cost, sol.connection_cost))
    }

    /// Facility location with facilities chosen from the whole ground set
    /// via the preprocessed shortlists (requires `fl_costs` at build time).
    fn facility_location_auto(
        &self,
        cities: Vec<u32>,
    ) -> PyResult<(Vec<u32>, Vec<(u32, u32)>, f64, f64)> {
        let idx = self
            .inner
            .fl
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("structure built without fl_costs"))?;
        let sol =
            fl_query_unrestricted(&self.inner.tree, &self.inner.pd, idx, &cities).map_err(err)?;
        Ok((sol.open, sol.assignment, sol.opening_cost, sol.connection_cost))
    }
}

/// A maintained constant-factor approximate spanning tree over a changing
/// subset of the preprocessed points.
#[pyclass(module = "dmot")]
struct DynamicMst {
    structure: Py<Structure>,
    state: LayeredMstState,
}

#[pymethods]
impl DynamicMst {
    #[new]
    #[pyo3(signature = (structure, seed = 1))]
    fn new(structure: Py<Structure>, seed: u64) -> Self {
        DynamicMst {
            structure,
            state: LayeredMstState::new(seed),
        }
    }

    fn insert(&mut self, py: Python<'_>, x: u32) -> PyResult<()> {
        let s = self.structure.borrow(py);
        self.state.insert(&s.inner.tree, &s.inner.pd, x).map_err(err)
    }

    fn delete(&mut self, py: Python<'_>, x: u32) -> PyResult<()> {
        let s = self.structure.borrow(py);
        self.state.delete(&s.inner.tree, &s.inner.pd, x).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.state.len()
    }

    fn __contains__(&self, x: u32) -> bool {
        self.state.contains(x)
    }

    fn members(&self) -> Vec<u32> {
        self.state.members().collect()
    }

    /// Tree edges as (u, v, weight) triples in point ids.
    fn edges(&self, py: Python<'_>) -> Vec<(u32, u32, f64)> {
        let s = self.structure.borrow(py);
        self.state.edges(&s.inner.tree.config)
    }

    fn weight(&self, py: Python<'_>) -> f64 {
        let s = self.structure.borrow(py);
        self.state.weight(&s.inner.tree.config)
    }

    fn is_spanning_tree(&self, py: Python<'_>) -> bool {
        let s = self.structure.borrow(py);
        self.state.is_spanning_tree(&s.inner.tree.config)
    }

    #[getter]
    fn rebuilds(&self) -> u32 {
        self.state.rebuilds
    }
}

/// Worst-case ratio between spanner shortest paths and true distances.
#[pyfunction]
#[pyo3(name = "stretch_constant")]
fn py_stretch_constant(eta: u32, tau: f64) -> f64 {
    stretch_constant(eta, tau)
}

/// Worst-case approximation ratio of the maintained spanning tree.
#[pyfunction]
#[pyo3(name = "mst_bound_constant")]
fn py_mst_bound_constant(eta: u32, tau: f64) -> f64 {
    b_constant(eta, tau)
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Structure>()?;
    m.add_class::<DynamicMst>()?;
    m.add_function(wrap_pyfunction!(py_stretch_constant, m)?)?;
    m.add_function(wrap_pyfunction!(py_mst_bound_constant, m)?)?;
    Ok(())
}
