//! Hartogs families `{(z, s) : |z| < ρ(s)}` over a parameter disc, fiberwise
//! kernels and KE densities, and a finite-difference plurisubharmonicity test
//! in all variables.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{make_hartogs_fiber, RadiusProfile};
use crate::error::{Error, Result};
use crate::flow::{init_state, log_kernel_at, step, DegreeSchedule};
use crate::nodes::{write_node_csv, NodeSet};
use crate::numerics::{fd_complex_hessian, min_hermitian_eigenvalue};
use crate::quadrature::build_radial_grid;
use crate::reference::ke_disc_log_density;

/// Default finite-difference step for [`psh_test`].
pub const PSH_STEP: f64 = 1e-3;
/// Default pass tolerance for the minimum Hessian eigenvalue.
pub const PSH_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberedDomain {
    pub profile: RadiusProfile,
    /// radius of the parameter disc `Δ`
    #[serde(default = "unit_radius")]
    pub parameter_radius: f64,
}

fn unit_radius() -> f64 {
    1.0
}

impl FiberedDomain {
    pub fn new(profile: RadiusProfile) -> Self {
        Self { profile, parameter_radius: 1.0 }
    }

    pub fn radius(&self, s: Complex64) -> f64 {
        self.profile.radius(s)
    }

    /// `ρ(s) − |z|`, or `None` when `s` is outside the parameter disc.
    pub fn margin(&self, z: Complex64, s: Complex64) -> Option<f64> {
        (s.norm() < self.parameter_radius).then(|| self.radius(s) - z.norm())
    }

    pub fn is_pseudoconvex(&self) -> bool {
        self.profile.is_pseudoconvex()
    }
}

/// A point `(z, s)` of the total space.
pub type FiberPoint = (Complex64, Complex64);

/// Tensor grid `z_points × s_points`, with `z` given relative to the fiber
/// radius (`z = t·ρ(s)`).
pub fn relative_grid(family: &FiberedDomain, z_fractions: &[Complex64], s_points: &[Complex64]) -> Vec<FiberPoint> {
    s_points
        .iter()
        .flat_map(|&s| {
            let rho = family.radius(s);
            z_fractions.iter().map(move |&t| (t * rho, s))
        })
        .collect()
}

/// Log values of a fiberwise density on points of the total space.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeLogDensity {
    pub twist: u32,
    pub points: Vec<FiberPoint>,
    pub log_values: Vec<f64>,
    pub label: String,
}

impl RelativeLogDensity {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\ns_re,s_im,z_re,z_im,log_value\n", self.label);
        for ((z, s), v) in self.points.iter().zip(&self.log_values) {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n", s.re, s.im, z.re, z.im, v));
        }
        out
    }

    /// Values on the fiber over `s`, as a field on `z` nodes.
    pub fn slice(&self, s: Complex64) -> (NodeSet, Vec<f64>) {
        let (zs, vs): (Vec<Complex64>, Vec<f64>) =
            self.points.iter().zip(&self.log_values).filter(|((_, t), _)| *t == s).map(|((z, _), v)| (*z, *v)).unzip();
        (NodeSet::from_points_1d(zs), vs)
    }

    pub fn slice_csv(&self, s: Complex64) -> String {
        let (nodes, values) = self.slice(s);
        write_node_csv(&nodes, &[("log_value", &values)], Some(&self.label))
    }
}

/// Settings of the per-fiber iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberRun {
    pub schedule: DegreeSchedule,
    pub radial_panels: usize,
}

impl Default for FiberRun {
    fn default() -> Self {
        Self { schedule: DegreeSchedule::Harmonic { head: 2000.0, base: 200, slope: 20.0 }, radial_panels: 32 }
    }
}

/// Fiberwise quantity whose logarithm is tested.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    /// `log κ_{m,s}` from the iteration run on each fiber
    IteratedKernel { m: u32, run: FiberRun },
    /// `log κ_{1,s} = log[ρ²/(2π(ρ²−|z|²)²)]`
    FirstKernelClosedForm,
    /// fiberwise KE density `log[2ρ²/(ρ²−|z|²)²]` against Λ
    KeClosedForm,
}

impl FieldSource {
    pub fn twist(&self) -> u32 {
        match self {
            FieldSource::IteratedKernel { m, .. } => *m,
            FieldSource::FirstKernelClosedForm => 1,
            FieldSource::KeClosedForm => 0,
        }
    }

    pub fn label(&self, family: &FiberedDomain) -> String {
        let what = match self {
            FieldSource::IteratedKernel { m, .. } => format!("log kappa_{m} (iterated)"),
            FieldSource::FirstKernelClosedForm => "log kappa_1 (closed form)".into(),
            FieldSource::KeClosedForm => "log dV_s (closed form)".into(),
        };
        format!("{what}, profile {}", family.profile.label())
    }

    /// Evaluates at every point; iterated kernels run once per distinct `s`.
    pub fn evaluate(&self, family: &FiberedDomain, points: &[FiberPoint]) -> Result<Vec<f64>> {
        match self {
            FieldSource::FirstKernelClosedForm => Ok(points
                .iter()
                .map(|&(z, s)| {
                    let r2 = family.radius(s).powi(2);
                    r2.ln() - (2.0 * std::f64::consts::PI).ln() - 2.0 * (r2 - z.norm_sqr()).ln()
                })
                .collect()),
            FieldSource::KeClosedForm => {
                Ok(points.iter().map(|&(z, s)| ke_disc_log_density(family.radius(s), z)).collect())
            }
            FieldSource::IteratedKernel { m, run } => iterated_values(family, *m, run, points),
        }
    }
}

fn iterated_values(family: &FiberedDomain, m: u32, run: &FiberRun, points: &[FiberPoint]) -> Result<Vec<f64>> {
    let mut groups: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    let mut order = Vec::new();
    for (i, (_, s)) in points.iter().enumerate() {
        let key = (s.re.to_bits(), s.im.to_bits());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }
    let per_fiber: Vec<Result<Vec<(usize, f64)>>> = order
        .par_iter()
        .map(|key| {
            let indices = &groups[key];
            let s = points[indices[0]].1;
            let zs: Vec<Complex64> = indices.iter().map(|&i| points[i].0).collect();
            fiber_values(family, s, m, run, &zs)
                .map(|vals| indices.iter().copied().zip(vals).collect())
                .map_err(|e| Error::Fiber { s: s.to_string(), source: Box::new(e) })
        })
        .collect();
    let mut out = vec![f64::NAN; points.len()];
    for fiber in per_fiber {
        for (i, v) in fiber? {
            out[i] = v;
        }
    }
    Ok(out)
}

/// `log κ_m` on the fiber over `s` at the given `z`.
pub fn fiber_values(family: &FiberedDomain, s: Complex64, m: u32, run: &FiberRun, zs: &[Complex64]) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::ScheduleExhausted { step: 0 });
    }
    let domain = make_hartogs_fiber(s, &family.profile)?;
    let grid = build_radial_grid(&domain, run.radial_panels, 3.0)?;
    let mut state = init_state(&domain, &grid, run.schedule.clone())?;
    while state.m < m {
        state = step(state)?;
    }
    zs.iter().map(|&z| log_kernel_at(&state, z)).collect()
}

/// Runs the fiberwise iteration to step `m` and assembles `log κ_{m,s}`.
pub fn fiber_kernels(family: &FiberedDomain, m: u32, run: &FiberRun, points: &[FiberPoint]) -> Result<RelativeLogDensity> {
    check_points(family, points)?;
    let source = FieldSource::IteratedKernel { m, run: run.clone() };
    Ok(RelativeLogDensity {
        twist: m,
        points: points.to_vec(),
        log_values: source.evaluate(family, points)?,
        label: source.label(family),
    })
}

/// Closed-form fiberwise KE density on points.
pub fn fiber_ke(family: &FiberedDomain, points: &[FiberPoint]) -> Result<RelativeLogDensity> {
    check_points(family, points)?;
    let source = FieldSource::KeClosedForm;
    Ok(RelativeLogDensity {
        twist: 0,
        points: points.to_vec(),
        log_values: source.evaluate(family, points)?,
        label: source.label(family),
    })
}

fn check_points(family: &FiberedDomain, points: &[FiberPoint]) -> Result<()> {
    match points.iter().position(|&(z, s)| !family.margin(z, s).is_some_and(|m| m > 0.0)) {
        Some(index) => Err(Error::PointOutsideDomain { domain: format!("hartogs[{}]", family.profile.label()), index }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PshReport {
    pub label: String,
    pub min_eigenvalue: f64,
    pub worst_point: FiberPoint,
    /// minimum eigenvalue per input point
    pub eigenvalues: Vec<f64>,
    pub step: f64,
    pub tolerance: f64,
}

impl PshReport {
    pub fn passed(&self) -> bool {
        self.min_eigenvalue >= -self.tolerance
    }

    pub fn csv_header() -> &'static str {
        "field,min_eigenvalue,worst_z_re,worst_z_im,worst_s_re,worst_s_im,h,tolerance,pass"
    }

    pub fn csv_row(&self) -> String {
        let (z, s) = self.worst_point;
        format!(
            "\"{}\",{:.6e},{},{},{},{},{:e},{:e},{}",
            self.label,
            self.min_eigenvalue,
            z.re,
            z.im,
            s.re,
            s.im,
            self.step,
            self.tolerance,
            self.passed()
        )
    }
}

/// Minimum eigenvalue of the finite-difference complex Hessian in `(z, s)`
/// of the log field, over `points`.
///
/// Every stencil point must lie in the total space, and each centre needs a
/// margin of at least `2h` to the fiber boundary.
pub fn psh_test(
    family: &FiberedDomain,
    source: &FieldSource,
    points: &[FiberPoint],
    h: f64,
    tolerance: f64,
) -> Result<PshReport> {
    if points.is_empty() {
        return Err(Error::EmptyReport);
    }
    // first pass records the stencil, second pass replays evaluated values
    let recorded: RefCell<Vec<FiberPoint>> = RefCell::new(Vec::new());
    let mut spans = Vec::with_capacity(points.len());
    for &(z, s) in points {
        let begin = recorded.borrow().len();
        let record = |p: &[Complex64]| -> f64 {
            recorded.borrow_mut().push((p[0], p[1]));
            0.0
        };
        fd_complex_hessian(&record, &[z, s], h);
        spans.push(begin..recorded.borrow().len());
    }
    let recorded = recorded.into_inner();
    for (index, (&(z, s), span)) in points.iter().zip(&spans).enumerate() {
        let centre_ok = family.margin(z, s).is_some_and(|m| m >= 2.0 * h);
        let stencil_ok = recorded[span.clone()].iter().all(|&(zz, ss)| family.margin(zz, ss).is_some_and(|m| m > 0.0));
        if !(centre_ok && stencil_ok) {
            return Err(Error::InsufficientMargin { index, step: h });
        }
    }
    let values = source.evaluate(family, &recorded)?;

    let eigenvalues: Vec<f64> = points
        .iter()
        .zip(&spans)
        .map(|(&(z, s), span)| {
            let slot = Cell::new(span.start);
            let replay = |_: &[Complex64]| -> f64 {
                let v = values[slot.get()];
                slot.set(slot.get() + 1);
                v
            };
            let hess = fd_complex_hessian(&replay, &[z, s], h);
            debug_assert_eq!(slot.get(), span.end);
            min_hermitian_eigenvalue(&hess)
        })
        .collect();
    let (worst, min_eigenvalue) = eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    Ok(PshReport {
        label: source.label(family),
        min_eigenvalue,
        worst_point: points[worst],
        eigenvalues,
        step: h,
        tolerance,
    })
}
