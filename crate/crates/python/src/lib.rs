//! Python bindings for `rsot`.
//!
//! Point sets cross the boundary as lists of rows; the row length is the
//! dimension (1 to 3). Heavy calls release the GIL.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rsot::applications::{
    barycenter_general, barycenter_lloyd, blue_noise_sphere, register as register_maps, sample_support,
    sphere_atoms, BarycenterConfig, BarycenterSource, BlueNoiseConfig, SphereDensity,
};
use rsot::geometry::{atomize, Cost, DensityField, QuadratureSpec, SimplicialMesh};
use rsot::maps::PlanView;
use rsot::measures::{
    build_source_hierarchy, build_target_hierarchy, SourceAtoms, SourceHierarchy, TargetHierarchy,
    TargetMeasure,
};
use rsot::solver::{self, MultilevelOptions, Strategy, Truncation};
use rsot::Point;

create_exception!(pyrsot, RsotError, PyException);

fn err(e: rsot::Error) -> PyErr {
    RsotError::new_err(e.to_string())
}

fn to_points(rows: &[Vec<f64>]) -> PyResult<(usize, Vec<Point>)> {
    let dim = rows.first().map_or(0, Vec::len);
    if !(1..=3).contains(&dim) {
        return Err(RsotError::new_err(format!("points must have 1 to 3 coordinates, got {dim}")));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(RsotError::new_err(format!("row {i} has {} coordinates, expected {dim}", r.len())));
        }
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(r);
        out.push(p);
    }
    Ok((dim, out))
}

fn from_points(dim: usize, pts: &[Point]) -> Vec<Vec<f64>> {
    pts.iter().map(|p| p[..dim].to_vec()).collect()
}

/// Discrete target measure `Σ ν_j δ_{y_j}`.
#[pyclass(name = "Target", module = "pyrsot")]
pub struct PyTarget {
    inner: TargetMeasure,
}

#[pymethods]
impl PyTarget {
    /// Uniform weights when `weights` is omitted; given weights are
    /// rescaled to sum to one when `normalize` is set.
    #[new]
    #[pyo3(signature = (points, weights=None, normalize=true))]
    fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>, normalize: bool) -> PyResult<Self> {
        let (dim, pts) = to_points(&points)?;
        let inner = match weights {
            None => TargetMeasure::uniform(dim, pts),
            Some(w) if normalize => TargetMeasure::normalized(dim, pts, w),
            Some(w) => TargetMeasure::new(dim, pts, w),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        from_points(self.inner.dim(), self.inner.points())
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Target(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

/// Atomized source measure.
#[pyclass(name = "Source", module = "pyrsot")]
pub struct PySource {
    inner: SourceAtoms,
}

#[pymethods]
impl PySource {
    /// Atoms at `points` with the given masses (uniform when omitted),
    /// normalized to total mass one.
    #[new]
    #[pyo3(signature = (points, masses=None))]
    fn new(points: Vec<Vec<f64>>, masses: Option<Vec<f64>>) -> PyResult<Self> {
        let (dim, pts) = to_points(&points)?;
        let inner = match masses {
            None => SourceAtoms::uniform(dim, pts),
            Some(m) => SourceAtoms::from_masses(dim, pts, m),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    /// Uniform density on `[a, b]` split into `n` cells.
    #[staticmethod]
    #[pyo3(signature = (a, b, n, order=1))]
    fn interval(a: f64, b: f64, n: usize, order: u8) -> PyResult<Self> {
        let mesh = SimplicialMesh::interval(a, b, n).map_err(err)?;
        Self::on_mesh(&mesh, order)
    }

    /// Uniform density on the unit square, `2n²` triangles.
    #[staticmethod]
    #[pyo3(signature = (n, order=1))]
    fn unit_square(n: usize, order: u8) -> PyResult<Self> {
        let mesh = SimplicialMesh::unit_square(n).map_err(err)?;
        Self::on_mesh(&mesh, order)
    }

    /// Icosphere atoms; `density` is "uniform" or "harmonic".
    #[staticmethod]
    #[pyo3(signature = (subdivisions, density="uniform"))]
    fn sphere(subdivisions: usize, density: &str) -> PyResult<Self> {
        let d: SphereDensity = density.parse().map_err(err)?;
        Ok(Self {
            inner: sphere_atoms(subdivisions, d).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        from_points(self.inner.dim(), self.inner.points())
    }

    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Source(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

impl PySource {
    fn on_mesh(mesh: &SimplicialMesh, order: u8) -> PyResult<Self> {
        let rho = DensityField::constant(mesh, 1.0).map_err(err)?;
        let q = QuadratureSpec::new(order).map_err(err)?;
        Ok(Self {
            inner: atomize(mesh, &rho, q).map_err(err)?,
        })
    }
}

/// Solver settings.
#[pyclass(name = "SolverConfig", module = "pyrsot")]
pub struct PySolverConfig {
    inner: solver::SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    /// `truncation` is one of "none", "pointwise", "integrated",
    /// "geometric"; `tau` is the relative error for the last two and
    /// `delta_thr` the threshold for "pointwise".
    #[new]
    #[pyo3(signature = (
        epsilon=1e-2, tolerance=1e-3, truncation="geometric", tau=1e-5, delta_thr=1e-12,
        cost="quadratic", max_iter=1000, memory=10, scaling_steps=0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        epsilon: f64,
        tolerance: f64,
        truncation: &str,
        tau: f64,
        delta_thr: f64,
        cost: &str,
        max_iter: usize,
        memory: usize,
        scaling_steps: usize,
    ) -> PyResult<Self> {
        let truncation = match truncation {
            "none" => Truncation::None,
            "pointwise" => Truncation::Pointwise { delta_thr },
            "integrated" => Truncation::Integrated { tau },
            "geometric" => Truncation::Geometric { tau },
            t => return Err(RsotError::new_err(format!("unknown truncation '{t}'"))),
        };
        let inner = solver::SolverConfig {
            epsilon,
            tolerance,
            truncation,
            cost: cost.parse().map_err(err)?,
            max_iter,
            memory,
            scaling_steps,
            ..Default::default()
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn tolerance(&self) -> f64 {
        self.inner.tolerance
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn config_or_default(cfg: Option<PyRef<'_, PySolverConfig>>, cost: Cost) -> solver::SolverConfig {
    cfg.map(|c| c.inner).unwrap_or_else(|| solver::SolverConfig::default().with_cost(cost))
}

/// Result of a dual solve.
#[pyclass(name = "Solution", module = "pyrsot")]
pub struct PySolution {
    inner: solver::Solution,
    epsilon: f64,
    cost: Cost,
}

#[pymethods]
impl PySolution {
    /// Gauge-fixed dual potential, one value per target point.
    #[getter]
    fn potential(&self) -> Vec<f64> {
        self.inner.potential.values().to_vec()
    }

    #[getter]
    fn value(&self) -> f64 {
        self.inner.value
    }

    #[getter]
    fn gradient(&self) -> Vec<f64> {
        self.inner.gradient.clone()
    }

    #[getter]
    fn grad_l1(&self) -> f64 {
        self.inner.grad_l1()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn report_json(&self) -> String {
        self.inner.report.to_json()
    }

    /// Plan of this potential between `source` and `target`, truncated
    /// as in the final solver iterate.
    fn plan(&self, source: &PySource, target: &PyTarget) -> PyResult<PyPlan> {
        let cutoff = self.inner.report.cutoff_history.as_ref().and_then(|h| h.last().copied());
        PyPlan::build(source, target, self.potential(), self.epsilon, self.cost, cutoff)
    }

    fn __repr__(&self) -> String {
        format!("Solution(converged={}, grad_l1={:e})", self.converged(), self.grad_l1())
    }
}

/// Solve the regularized dual for one source/target pair.
#[pyfunction]
#[pyo3(signature = (source, target, config=None, psi0=None))]
fn solve(
    py: Python<'_>,
    source: &PySource,
    target: &PyTarget,
    config: Option<PyRef<'_, PySolverConfig>>,
    psi0: Option<Vec<f64>>,
) -> PyResult<PySolution> {
    let cfg = config_or_default(config, Cost::Quadratic);
    let (a, t) = (&source.inner, &target.inner);
    let sol = py.detach(|| solver::solve(a, t, &cfg, psi0.as_deref())).map_err(err)?;
    Ok(PySolution {
        inner: sol,
        epsilon: cfg.epsilon,
        cost: cfg.cost,
    })
}

/// k-means hierarchy of a target measure.
#[pyclass(name = "TargetHierarchy", module = "pyrsot")]
pub struct PyTargetHierarchy {
    inner: TargetHierarchy,
}

#[pymethods]
impl PyTargetHierarchy {
    /// `sizes` lists level sizes coarsest first; the last must equal the
    /// number of target points.
    #[new]
    #[pyo3(signature = (target, sizes, seed=0))]
    fn new(target: &PyTarget, sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: build_target_hierarchy(&target.inner, &sizes, seed).map_err(err)?,
        })
    }

    #[getter]
    fn num_levels(&self) -> usize {
        self.inner.num_levels()
    }

    fn level(&self, l: usize) -> PyResult<PyTarget> {
        self.inner
            .levels()
            .get(l)
            .map(|t| PyTarget { inner: t.clone() })
            .ok_or_else(|| RsotError::new_err(format!("level {l} out of range")))
    }

    /// Cluster in level `l` of each point of level `l + 1`.
    fn parents(&self, l: usize) -> PyResult<Vec<usize>> {
        if l + 1 >= self.inner.num_levels() {
            return Err(RsotError::new_err(format!("level {l} has no finer level")));
        }
        Ok(self.inner.parents(l).to_vec())
    }
}

/// k-means hierarchy of a source atom cloud.
#[pyclass(name = "SourceHierarchy", module = "pyrsot")]
pub struct PySourceHierarchy {
    inner: SourceHierarchy,
}

#[pymethods]
impl PySourceHierarchy {
    #[new]
    #[pyo3(signature = (source, sizes, seed=0))]
    fn new(source: &PySource, sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: build_source_hierarchy(&source.inner, &sizes, seed).map_err(err)?,
        })
    }

    #[getter]
    fn num_levels(&self) -> usize {
        self.inner.num_levels()
    }

    fn level(&self, l: usize) -> PyResult<PySource> {
        self.inner
            .levels()
            .get(l)
            .map(|a| PySource { inner: a.clone() })
            .ok_or_else(|| RsotError::new_err(format!("level {l} out of range")))
    }
}

/// Multilevel solve; `strategy` is "source", "target" or "combined".
#[pyfunction]
#[pyo3(signature = (source, target, config=None, strategy="combined", epsilon_start=None))]
fn solve_multilevel(
    py: Python<'_>,
    source: &PySourceHierarchy,
    target: &PyTargetHierarchy,
    config: Option<PyRef<'_, PySolverConfig>>,
    strategy: &str,
    epsilon_start: Option<f64>,
) -> PyResult<PySolution> {
    let cfg = config_or_default(config, Cost::Quadratic);
    let strategy: Strategy = strategy.parse().map_err(err)?;
    let (a, t) = (&source.inner, &target.inner);
    let sol = py
        .detach(|| solver::solve_multilevel(a, t, &cfg, strategy, MultilevelOptions { epsilon_start }))
        .map_err(err)?;
    Ok(PySolution {
        inner: sol,
        epsilon: cfg.epsilon,
        cost: cfg.cost,
    })
}

/// Entropic plan of a fixed potential, with the derived transport maps.
#[pyclass(name = "Plan", module = "pyrsot")]
pub struct PyPlan {
    source: SourceAtoms,
    target: TargetMeasure,
    psi: Vec<f64>,
    epsilon: f64,
    cost: Cost,
    cutoff: Option<f64>,
}

impl PyPlan {
    fn build(
        source: &PySource,
        target: &PyTarget,
        psi: Vec<f64>,
        epsilon: f64,
        cost: Cost,
        cutoff: Option<f64>,
    ) -> PyResult<Self> {
        let plan = Self {
            source: source.inner.clone(),
            target: target.inner.clone(),
            psi,
            epsilon,
            cost,
            cutoff,
        };
        plan.view()?;
        Ok(plan)
    }

    fn view(&self) -> PyResult<PlanView<'_>> {
        PlanView::new(&self.source, &self.target, &self.psi, self.epsilon, self.cost, self.cutoff).map_err(err)
    }
}

#[pymethods]
impl PyPlan {
    #[new]
    #[pyo3(signature = (source, target, potential, epsilon, cost="quadratic", cutoff=None))]
    fn new(
        source: &PySource,
        target: &PyTarget,
        potential: Vec<f64>,
        epsilon: f64,
        cost: &str,
        cutoff: Option<f64>,
    ) -> PyResult<Self> {
        Self::build(source, target, potential, epsilon, cost.parse().map_err(err)?, cutoff)
    }

    /// Target marginal of the plan.
    fn target_marginal(&self) -> PyResult<Vec<f64>> {
        Ok(self.view()?.target_marginal().to_vec())
    }

    fn marginal_error(&self) -> PyResult<f64> {
        Ok(self.view()?.marginal_error())
    }

    /// `(target index, probability)` pairs of atom `q`.
    fn plan_density(&self, q: usize) -> PyResult<Vec<(usize, f64)>> {
        if q >= self.source.len() {
            return Err(RsotError::new_err(format!("atom {q} out of range")));
        }
        Ok(self.view()?.plan_density(q))
    }

    /// Weights of the source measure conditioned on target `j`.
    fn conditional_density(&self, j: usize) -> PyResult<Vec<f64>> {
        self.view()?.conditional_density(j).map_err(err)
    }

    fn conditional_barycenters(&self) -> PyResult<Vec<Vec<f64>>> {
        let b = self.view()?.conditional_barycenters().map_err(err)?;
        Ok(from_points(self.source.dim(), &b))
    }

    /// Expected target location of every source atom.
    fn barycentric_map(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(from_points(self.source.dim(), &self.view()?.barycentric_map().images))
    }

    /// Most likely target index of every source atom.
    fn modal_map(&self) -> PyResult<Vec<usize>> {
        Ok(self.view()?.modal_map().indices.unwrap_or_default())
    }

    /// Barycentric map evaluated at arbitrary points.
    fn barycentric_at(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let (dim, pts) = to_points(&points)?;
        Ok(from_points(dim, &self.view()?.barycentric_at(&pts)))
    }
}

/// Wasserstein barycenter with `support_size` points. `mode` is "lloyd"
/// (uniform weights) or "general" (weights and locations).
#[pyfunction]
#[pyo3(signature = (
    sources, support_size, weights=None, mode="lloyd", init=None, seed=0, config=None,
    max_outer=100, damping=0.5,
))]
#[allow(clippy::too_many_arguments)]
fn barycenter<'py>(
    py: Python<'py>,
    sources: Vec<PyRef<'py, PySource>>,
    support_size: usize,
    weights: Option<Vec<f64>>,
    mode: &str,
    init: Option<Vec<Vec<f64>>>,
    seed: u64,
    config: Option<PyRef<'py, PySolverConfig>>,
    max_outer: usize,
    damping: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let atoms: Vec<SourceAtoms> = sources.iter().map(|s| s.inner.clone()).collect();
    let first = atoms.first().ok_or_else(|| RsotError::new_err("at least one source is required"))?;
    let dim = first.dim();
    let d = BarycenterConfig::new(atoms.len(), support_size);
    let cfg = BarycenterConfig {
        lambda: weights.unwrap_or(d.lambda.clone()),
        max_outer,
        damping,
        solver: config_or_default(config, Cost::Quadratic),
        ..d
    };
    let y0 = match init {
        Some(rows) => to_points(&rows)?.1,
        None => sample_support(first, support_size, seed).map_err(err)?,
    };
    let general = match mode {
        "lloyd" => false,
        "general" => true,
        m => return Err(RsotError::new_err(format!("mode must be lloyd or general, got '{m}'"))),
    };
    let r = py
        .detach(|| {
            let inputs: Vec<BarycenterSource> = atoms.iter().map(BarycenterSource::new).collect();
            if general {
                barycenter_general(&inputs, &cfg, y0, None)
            } else {
                barycenter_lloyd(&inputs, &cfg, y0)
            }
        })
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("points", from_points(dim, &r.points))?;
    out.set_item("weights", r.weights)?;
    out.set_item("converged", r.converged)?;
    out.set_item("rms_movement", r.trace.iter().map(|t| t.rms_movement).collect::<Vec<_>>())?;
    out.set_item("objective", r.trace.iter().map(|t| t.objective).collect::<Vec<_>>())?;
    out.set_item("potentials", r.potentials)?;
    Ok(out)
}

/// Solve, then build the barycentric and modal maps and the
/// displacement snapshots; `field` is carried by the modal map.
#[pyfunction]
#[pyo3(signature = (source, target, config=None, field=None))]
fn register<'py>(
    py: Python<'py>,
    source: &PySource,
    target: &PyTarget,
    config: Option<PyRef<'py, PySolverConfig>>,
    field: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config_or_default(config, Cost::Quadratic);
    let (a, t) = (&source.inner, &target.inner);
    let r = py.detach(|| register_maps(a, t, &cfg, field.as_deref())).map_err(err)?;
    let dim = a.dim();
    let out = PyDict::new(py);
    out.set_item("potential", r.solution.potential.values().to_vec())?;
    out.set_item("converged", r.solution.converged())?;
    out.set_item("barycentric", from_points(dim, &r.barycentric.images))?;
    out.set_item("modal", r.modal.indices.clone().unwrap_or_default())?;
    let snaps: Vec<(f64, Vec<Vec<f64>>)> = r.snapshots.iter().map(|(s, x)| (*s, from_points(dim, x))).collect();
    out.set_item("snapshots", snaps)?;
    if let Some(tr) = r.transfer {
        out.set_item("field_at_images", tr.at_images)?;
        out.set_item("field_target_mean", tr.mean_per_target)?;
    }
    Ok(out)
}

/// Blue-noise sampling of the sphere: `n` points by Lloyd iteration
/// under the squared geodesic cost.
#[pyfunction]
#[pyo3(signature = (n, subdivisions=3, density="uniform", seed=0, epsilon=1e-2, tol_y=1e-3, max_outer=200))]
#[allow(clippy::too_many_arguments)]
fn blue_noise<'py>(
    py: Python<'py>,
    n: usize,
    subdivisions: usize,
    density: &str,
    seed: u64,
    epsilon: f64,
    tol_y: f64,
    max_outer: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let d: SphereDensity = density.parse().map_err(err)?;
    let mut cfg = BlueNoiseConfig {
        tol_y,
        max_outer,
        ..Default::default()
    };
    cfg.solver.epsilon = epsilon;
    let r = py
        .detach(|| {
            let atoms = sphere_atoms(subdivisions, d)?;
            blue_noise_sphere(&atoms, n, &cfg, seed)
        })
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("points", from_points(3, &r.points))?;
    out.set_item("converged", r.converged)?;
    out.set_item("iterations", r.iterations)?;
    out.set_item("movement", r.movement)?;
    out.set_item("residuals", r.residuals)?;
    Ok(out)
}

#[pymodule]
fn pyrsot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RsotError", m.py().get_type::<RsotError>())?;
    m.add_class::<PyTarget>()?;
    m.add_class::<PySource>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyTargetHierarchy>()?;
    m.add_class::<PySourceHierarchy>()?;
    m.add_class::<PyPlan>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_multilevel, m)?)?;
    m.add_function(wrap_pyfunction!(barycenter, m)?)?;
    m.add_function(wrap_pyfunction!(register, m)?)?;
    m.add_function(wrap_pyfunction!(blue_noise, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_and_ragged_rows_fail() {
        let rows = vec![vec![0.5, 1.0], vec![-2.0, 3.0]];
        let (dim, pts) = to_points(&rows).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(pts[1], [-2.0, 3.0, 0.0]);
        assert_eq!(from_points(dim, &pts), rows);
        assert!(to_points(&[vec![0.0], vec![1.0, 2.0]]).is_err());
        assert!(to_points(&[vec![0.0; 4]]).is_err());
        assert!(to_points(&[]).is_err());
    }
}
