use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use bergman_flow::boundary::{fit_boundary_coefficient, fit_from_gram, BoundaryPath};
use bergman_flow::domain::{self as dom, DomainSpec, RadiusProfile};
use bergman_flow::engine::{assemble_gram, monomial_basis, weighted_disc_kernel_closed_form};
use bergman_flow::experiment::{parse_config, run_experiment as run_exp, ExperimentKind};
use bergman_flow::flow::{self, CompactRegion, DegreeSchedule};
use bergman_flow::nodes::{LogDensityField, NodeSet};
use bergman_flow::quadrature::build_radial_grid;
use bergman_flow::reference::ke_for_domain;
use bergman_flow::variation::{psh_test as psh, relative_grid, FiberRun, FiberedDomain, FieldSource, PSH_STEP, PSH_TOLERANCE};

fn py_err(e: bergman_flow::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A bounded domain given by a defining function `φ < 0`.
#[pyclass(frozen, name = "Domain")]
struct PyDomain {
    inner: dom::Domain,
}

#[pymethods]
impl PyDomain {
    #[staticmethod]
    #[pyo3(signature = (radius = 1.0))]
    fn disc(radius: f64) -> PyResult<Self> {
        Ok(Self { inner: dom::make_disc(radius).map_err(py_err)? })
    }

    #[staticmethod]
    fn annulus(r_in: f64, r_out: f64) -> PyResult<Self> {
        Ok(Self { inner: dom::make_annulus(r_in, r_out).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, radius = 1.0))]
    fn ball(n: usize, radius: f64) -> PyResult<Self> {
        Ok(Self { inner: dom::make_ball(n, radius).map_err(py_err)? })
    }

    /// Same JSON shape as the `domain` key of an experiment config.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: DomainSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner: spec.build().map_err(py_err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, z: Vec<Complex64>) -> PyResult<f64> {
        self.check_dim(&z)?;
        Ok(self.inner.value(&z))
    }

    fn contains(&self, z: Vec<Complex64>) -> PyResult<bool> {
        self.check_dim(&z)?;
        Ok(self.inner.contains(&z))
    }

    /// `log` of the Kähler-Einstein density against `Λ = 2ⁿ·Lebesgue`.
    fn ke_log_density(&self, z: Vec<Complex64>) -> PyResult<f64> {
        self.check_dim(&z)?;
        let nodes = NodeSet::from_points(z.len(), &[z]).map_err(py_err)?;
        Ok(ke_for_domain(&self.inner, &nodes).map_err(py_err)?.log_density[0])
    }

    fn __repr__(&self) -> String {
        format!("Domain({})", self.inner.name())
    }
}

impl PyDomain {
    fn check_dim(&self, z: &[Complex64]) -> PyResult<()> {
        if z.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected {} coordinates, got {}", self.inner.dim(), z.len())));
        }
        Ok(())
    }
}

fn parse_schedule(schedule: Option<&str>, domain: &dom::Domain) -> PyResult<DegreeSchedule> {
    match schedule {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(DegreeSchedule::for_domain(domain)),
    }
}

/// Runs the kernel iteration on a disc or annulus and returns `[(m, e_m)]`.
#[pyfunction]
#[pyo3(signature = (domain, max_step, schedule = None, radial_panels = 64))]
fn iterate(
    py: Python<'_>,
    domain: &PyDomain,
    max_step: u32,
    schedule: Option<&str>,
    radial_panels: usize,
) -> PyResult<Vec<(u32, f64)>> {
    let d = domain.inner.clone();
    let schedule = parse_schedule(schedule, &d)?;
    py.detach(move || -> bergman_flow::Result<Vec<(u32, f64)>> {
        let grid = build_radial_grid(&d, radial_panels, 3.0)?;
        let target = ke_for_domain(&d, grid.assembly_nodes())?;
        let (report, _) = flow::run(&d, &grid, max_step, schedule, &target, CompactRegion::for_domain(&d))?;
        Ok(report.steps.iter().map(|s| (s.m, s.error)).collect())
    })
    .map_err(py_err)
}

/// `log κ_m(z)` at points of a circular domain after `m` steps.
#[pyfunction]
#[pyo3(signature = (domain, m, points, schedule = None, radial_panels = 64))]
fn log_kernel(
    py: Python<'_>,
    domain: &PyDomain,
    m: u32,
    points: Vec<Complex64>,
    schedule: Option<&str>,
    radial_panels: usize,
) -> PyResult<Vec<f64>> {
    let d = domain.inner.clone();
    let schedule = parse_schedule(schedule, &d)?;
    py.detach(move || -> bergman_flow::Result<Vec<f64>> {
        let grid = build_radial_grid(&d, radial_panels, 3.0)?;
        let mut state = flow::init_state(&d, &grid, schedule)?;
        while state.m < m {
            state = flow::step(state)?;
        }
        points.iter().map(|&z| flow::log_kernel_at(&state, z)).collect()
    })
    .map_err(py_err)
}

/// Closed-form `(1−|z|²)^s`-weighted Bergman kernel of the unit disc against `scale·dA`.
#[pyfunction]
#[pyo3(signature = (s, z, scale = 2.0))]
fn weighted_disc_kernel(s: f64, z: Complex64, scale: f64) -> PyResult<f64> {
    weighted_disc_kernel_closed_form(s, z, scale).map_err(py_err)
}

/// Fits `K ≈ c·r^p` along a radial path of the unit disc; returns `(c, p)`.
/// With `degree = None` the closed-form kernel is fitted.
#[pyfunction]
#[pyo3(signature = (degree = None, start = 0.8, end = 0.97, points = 40))]
fn boundary_fit(py: Python<'_>, degree: Option<u32>, start: f64, end: f64, points: usize) -> PyResult<(f64, f64)> {
    py.detach(move || -> bergman_flow::Result<(f64, f64)> {
        let d = dom::make_disc(1.0)?;
        let path = BoundaryPath::radial(1, 1.0, start, end, points);
        let fit = match degree {
            Some(deg) => {
                let grid = build_radial_grid(&d, 64, 3.0)?;
                let unit = LogDensityField::unit(grid.assembly_nodes().clone());
                let gram = assemble_gram(&monomial_basis(1, 1, deg), &unit, &grid, &d)?;
                fit_from_gram(&gram, &path, 1.0)?
            }
            None => {
                let nodes = path.nodes()?;
                let two_pi = 2.0 * std::f64::consts::PI;
                let values = nodes.iter().map(|p| -two_pi.ln() - 2.0 * (1.0 - p[0].norm_sqr()).ln()).collect();
                fit_boundary_coefficient(&d, &LogDensityField::new(1, nodes, values)?, 1.0)?
            }
        };
        Ok((fit.fitted_coefficient, fit.fitted_exponent))
    })
    .map_err(py_err)
}

/// Minimum Levi eigenvalue of `log κ_{m,s}` over a Hartogs family
/// `{|z| < ρ(s)}`; `profile` is `"exp_re"`, `"exp_half_abs_sq"` or `"concave"`,
/// `m = 0` tests the fiberwise KE density.
#[pyfunction]
#[pyo3(signature = (profile, m, z_fractions, s_points))]
fn psh_min_eigenvalue(
    py: Python<'_>,
    profile: &str,
    m: u32,
    z_fractions: Vec<Complex64>,
    s_points: Vec<Complex64>,
) -> PyResult<f64> {
    let profile: RadiusProfile = serde_json::from_str(&format!("{{\"kind\": \"{profile}\"}}"))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.detach(move || -> bergman_flow::Result<f64> {
        let family = FiberedDomain::new(profile);
        let pts = relative_grid(&family, &z_fractions, &s_points);
        let source = match m {
            0 => FieldSource::KeClosedForm,
            m => FieldSource::IteratedKernel { m, run: FiberRun::default() },
        };
        Ok(psh(&family, &source, &pts, PSH_STEP, PSH_TOLERANCE)?.min_eigenvalue)
    })
    .map_err(py_err)
}

/// Runs a CLI experiment (`"iterate"`, `"boundary_fit"`, ...) from a JSON
/// config; returns `(passed, summary)`.
#[pyfunction]
#[pyo3(signature = (kind, out, config = "{}"))]
fn run_experiment(py: Python<'_>, kind: &str, out: PathBuf, config: &str) -> PyResult<(bool, String)> {
    let kind: ExperimentKind =
        serde_json::from_str(&format!("\"{kind}\"")).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let config = parse_config(config).map_err(py_err)?;
    py.detach(move || run_exp(&config, kind, &out))
        .map(|o| (o.passed(), o.summary))
        .map_err(py_err)
}

#[pymodule]
fn pybergman(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(log_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_disc_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_fit, m)?)?;
    m.add_function(wrap_pyfunction!(psh_min_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
