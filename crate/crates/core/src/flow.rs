//! The iteration `κ₁ = K(Ω)`, `κ_{m+1} = K(Ω, (m+1)K_Ω, 1/κ_m)` and its
//! normalized iterates `B_m = ((m!)^{−n}κ_m)^{1/m}`.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::engine::{assemble_gram, kernel_diagonal, laurent_basis, monomial_basis, GramSystem, SectionBasis};
use crate::error::{Error, Result};
use crate::nodes::{LogDensityField, NodeSet};
use crate::numerics::{linear_fit, ln_factorial};
use crate::quadrature::QuadratureGrid;
use crate::reference::VolumeFormField;

/// Basis degree as a function of the step `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DegreeSchedule {
    /// `base + ⌈slope·m⌉`, optionally capped
    Linear { base: u32, slope: f64, cap: Option<u32> },
    /// `max(⌈head/m⌉, base + ⌈slope·m⌉)`: wide bases early, where truncation
    /// error in the weight is inherited by every later step
    Harmonic { head: f64, base: u32, slope: f64 },
    /// explicit degrees for steps `1..=len`
    Table { degrees: Vec<u32> },
}

impl DegreeSchedule {
    /// Default for one-dimensional circular domains (diagonal Gram path).
    pub fn circular_default() -> Self {
        DegreeSchedule::Harmonic { head: 250_000.0, base: 2000, slope: 40.0 }
    }

    /// Default for the dense path.
    pub fn general_default() -> Self {
        DegreeSchedule::Linear { base: 15, slope: 1.0, cap: Some(60) }
    }

    pub fn for_domain(domain: &Domain) -> Self {
        if domain.radial_interval().is_some() {
            Self::circular_default()
        } else {
            Self::general_default()
        }
    }

    pub fn degree(&self, m: u32) -> Result<u32> {
        match self {
            DegreeSchedule::Linear { base, slope, cap } => {
                let d = base + (slope * m as f64).ceil() as u32;
                Ok(cap.map_or(d, |c| d.min(c)))
            }
            DegreeSchedule::Harmonic { head, base, slope } => {
                if m == 0 {
                    return Err(Error::ScheduleExhausted { step: 0 });
                }
                let early = (head / m as f64).ceil() as u32;
                Ok(early.max(base + (slope * m as f64).ceil() as u32))
            }
            DegreeSchedule::Table { degrees } => {
                degrees.get((m as usize).wrapping_sub(1)).copied().ok_or(Error::ScheduleExhausted { step: m })
            }
        }
    }

    /// Every degree multiplied by `factor` (rounded up).
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            DegreeSchedule::Linear { base, slope, cap } => DegreeSchedule::Linear {
                base: (*base as f64 * factor).ceil() as u32,
                slope: slope * factor,
                cap: cap.map(|c| (c as f64 * factor).ceil() as u32),
            },
            DegreeSchedule::Harmonic { head, base, slope } => DegreeSchedule::Harmonic {
                head: head * factor,
                base: (*base as f64 * factor).ceil() as u32,
                slope: slope * factor,
            },
            DegreeSchedule::Table { degrees } => {
                DegreeSchedule::Table { degrees: degrees.iter().map(|d| (*d as f64 * factor).ceil() as u32).collect() }
            }
        }
    }
}

/// Section basis used on a domain: Laurent monomials on annuli (which omit
/// the origin), ordinary monomials elsewhere.
pub fn basis_for(domain: &Domain, twist: u32, degree: u32) -> SectionBasis {
    match domain.radial_interval() {
        Some((inner, _)) if inner > 0.0 => laurent_basis(twist, degree),
        _ => monomial_basis(domain.dim(), twist, degree),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub m: u32,
    pub degree: u32,
    pub basis_size: usize,
    pub log10_condition: f64,
    pub seconds: f64,
}

/// State of the iteration after step `m`.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub m: u32,
    pub domain: Domain,
    pub grid: QuadratureGrid,
    /// `log κ_m` on the grid's assembly nodes
    pub log_kappa: LogDensityField,
    pub schedule: DegreeSchedule,
    pub history: Vec<StepRecord>,
    gram: GramSystem,
}

impl IterationState {
    /// Gram system of the latest step; evaluates `κ_m` anywhere in the domain.
    pub fn gram(&self) -> &GramSystem {
        &self.gram
    }

    pub fn kernel_at(&self, points: &NodeSet) -> Result<LogDensityField> {
        kernel_diagonal(&self.gram, points)
    }

    pub fn normalized(&self) -> NormalizedKernel {
        normalized(&self.log_kappa, self.domain.dim())
    }
}

fn compute_step(
    domain: &Domain,
    grid: &QuadratureGrid,
    schedule: &DegreeSchedule,
    weight: &LogDensityField,
) -> Result<(GramSystem, LogDensityField, StepRecord)> {
    let m = weight.twist + 1;
    let started = Instant::now();
    let degree = schedule.degree(m)?;
    let basis = basis_for(domain, m, degree);
    let gram = assemble_gram(&basis, weight, grid, domain)?;
    let log_kappa = kernel_diagonal(&gram, grid.assembly_nodes())?;
    let record = StepRecord {
        m,
        degree,
        basis_size: basis.len(),
        log10_condition: gram.log10_condition,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok((gram, log_kappa, record))
}

/// `κ₁`: the unweighted Bergman kernel against `Λ`, on the grid's assembly nodes.
pub fn init_state(domain: &Domain, grid: &QuadratureGrid, schedule: DegreeSchedule) -> Result<IterationState> {
    let unit = LogDensityField::unit(grid.assembly_nodes().clone());
    let (gram, log_kappa, record) = compute_step(domain, grid, &schedule, &unit)?;
    Ok(IterationState {
        m: 1,
        domain: domain.clone(),
        grid: grid.clone(),
        log_kappa,
        schedule,
        history: vec![record],
        gram,
    })
}

/// One step with weight `h_m = 1/κ_m`.
pub fn step(mut state: IterationState) -> Result<IterationState> {
    let (gram, log_kappa, record) = compute_step(&state.domain, &state.grid, &state.schedule, &state.log_kappa)?;
    state.m = record.m;
    state.history.push(record);
    state.log_kappa = log_kappa;
    state.gram = gram;
    Ok(state)
}

/// `log B_m = (log κ_m − n·log m!)/m` at the nodes of a field.
#[derive(Clone, Debug)]
pub struct NormalizedKernel {
    pub m: u32,
    pub nodes: NodeSet,
    pub log_values: Vec<f64>,
}

pub fn normalized(field: &LogDensityField, dim: usize) -> NormalizedKernel {
    let m = field.twist.max(1);
    let shift = dim as f64 * ln_factorial(m);
    NormalizedKernel {
        m,
        nodes: field.nodes.clone(),
        log_values: field.log_values.iter().map(|v| (v - shift) / m as f64).collect(),
    }
}

/// Closed annular band `inner ≤ |z| ≤ outer` on which errors are measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactRegion {
    pub inner: f64,
    pub outer: f64,
}

impl CompactRegion {
    pub fn ball(radius: f64) -> Self {
        Self { inner: 0.0, outer: radius }
    }

    /// Default: `|z| ≤ 0.8·inradius` for discs and balls, the middle band
    /// `0.6 ≤ |z| ≤ 0.85` scaled to the annulus otherwise.
    pub fn for_domain(domain: &Domain) -> Self {
        match domain.radial_interval() {
            Some((inner, outer)) if inner > 0.0 => {
                let w = outer - inner;
                Self { inner: inner + 0.2 * w, outer: inner + 0.7 * w }
            }
            _ => Self::ball(0.8 * domain.inradius().unwrap_or(1.0)),
        }
    }

    pub fn label(&self) -> String {
        if self.inner > 0.0 {
            format!("{} <= |z| <= {}", self.inner, self.outer)
        } else {
            format!("|z| <= {}", self.outer)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepError {
    pub m: u32,
    pub degree: u32,
    /// `sup |log B_m − log target|` over the region
    pub error: f64,
    /// signed `sup (log B_m − log target)`
    pub upper_margin: f64,
    /// signed `inf (log B_m − log target)`
    pub lower_margin: f64,
    pub log10_condition: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    /// smallest step included in the fit
    pub from_step: u32,
    pub intercept: f64,
    /// slope of `e_m` against `log(m)/m`
    pub slope: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub region: CompactRegion,
    pub target_description: String,
    pub steps: Vec<StepError>,
    pub fit: Option<RateFit>,
}

impl ConvergenceReport {
    pub fn final_error(&self) -> Option<f64> {
        self.steps.last().map(|s| s.error)
    }

    pub fn error_at(&self, m: u32) -> Option<f64> {
        self.steps.iter().find(|s| s.m == m).map(|s| s.error)
    }

    /// Whether `e_m` decreases from `from_step` on, allowing `slack`.
    pub fn decreasing_from(&self, from_step: u32, slack: f64) -> bool {
        self.steps
            .windows(2)
            .filter(|w| w[0].m >= from_step)
            .all(|w| w[1].error <= w[0].error + slack)
    }

    /// Per-step CSV: `m,degree,e_m,upper_margin,lower_margin,gram_condition`.
    /// Wall time goes to [`Self::timings_csv`] so that this body is reproducible.
    pub fn steps_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# target: {}; region: {}", self.target_description, self.region.label());
        let _ = writeln!(out, "m,degree,e_m,upper_margin,lower_margin,gram_condition");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
                s.m,
                s.degree,
                s.error,
                s.upper_margin,
                s.lower_margin,
                10f64.powf(s.log10_condition)
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("m,seconds\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{:.6}", s.m, s.seconds);
        }
        out
    }
}

/// Signed error extremes of `log B_m − log target` on the region's nodes.
fn signed_extremes(normalized: &NormalizedKernel, log_target: &[f64], indices: &[usize]) -> (f64, f64) {
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    for &i in indices {
        let d = normalized.log_values[i] - log_target[i];
        upper = upper.max(d);
        lower = lower.min(d);
    }
    (upper, lower)
}

/// Iterates to step `max_step`, comparing `B_m` with `(2π)^{−n}·target` on
/// the region. The target must live on the grid's assembly nodes.
pub fn run(
    domain: &Domain,
    grid: &QuadratureGrid,
    max_step: u32,
    schedule: DegreeSchedule,
    target: &VolumeFormField,
    region: CompactRegion,
) -> Result<(ConvergenceReport, IterationState)> {
    if max_step == 0 {
        return Err(Error::EmptyReport);
    }
    if target.nodes != *grid.assembly_nodes() {
        return Err(Error::NodeMismatch("target must live on the grid's assembly nodes".into()));
    }
    let n = domain.dim() as f64;
    let shift = n * (2.0 * std::f64::consts::PI).ln();
    let log_target: Vec<f64> = target.log_density.iter().map(|v| v - shift).collect();
    let indices = grid.assembly_nodes().select_band(region.inner, region.outer);
    if indices.is_empty() {
        return Err(Error::InvalidField(format!("no assembly nodes in {}", region.label())));
    }

    let mut steps = Vec::with_capacity(max_step as usize);
    let mut record = |state: &IterationState| {
        let (upper, lower) = signed_extremes(&state.normalized(), &log_target, &indices);
        let h = state.history.last().expect("at least one step");
        steps.push(StepError {
            m: state.m,
            degree: h.degree,
            error: upper.abs().max(lower.abs()),
            upper_margin: upper,
            lower_margin: lower,
            log10_condition: h.log10_condition,
            seconds: h.seconds,
        });
    };
    let mut state = init_state(domain, grid, schedule)?;
    record(&state);
    while state.m < max_step {
        state = step(state)?;
        record(&state);
    }
    let fit = rate_fit(&steps, 5);
    Ok((
        ConvergenceReport {
            region,
            target_description: format!("(2pi)^-{} x {:?}", domain.dim(), target.provenance).to_lowercase(),
            steps,
            fit,
        },
        state,
    ))
}

/// Least-squares fit of `e_m ≈ a + b·log(m)/m` over `m ≥ from_step`.
pub fn rate_fit(steps: &[StepError], from_step: u32) -> Option<RateFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = steps
        .iter()
        .filter(|s| s.m >= from_step)
        .map(|s| ((s.m as f64).ln() / s.m as f64, s.error))
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    let (intercept, slope) = linear_fit(&xs, &ys);
    Some(RateFit { from_step, intercept, slope })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichRow {
    pub m: u32,
    /// signed sup of the error: the `limsup ≤` side
    pub upper_margin: f64,
    /// signed inf of the error: the `liminf ≥` side
    pub lower_margin: f64,
}

pub fn sandwich_diagnostic(report: &ConvergenceReport) -> Result<Vec<SandwichRow>> {
    if report.steps.is_empty() {
        return Err(Error::EmptyReport);
    }
    Ok(report
        .steps
        .iter()
        .map(|s| SandwichRow { m: s.m, upper_margin: s.upper_margin, lower_margin: s.lower_margin })
        .collect())
}

/// Normalizing constants of the exact disc iteration: `a₁ = 1/(2π)`,
/// `a_{m+1} = a_m(2m+1)/(2π)`, with `κ_m = a_m(1−|z|²)^{−2m}` on the unit disc.
pub fn disc_recursion_log_constants(max_step: u32) -> Vec<f64> {
    let two_pi_ln = (2.0 * std::f64::consts::PI).ln();
    let mut out = Vec::with_capacity(max_step as usize);
    let mut a = -two_pi_ln;
    for m in 1..=max_step {
        out.push(a);
        a += ((2 * m + 1) as f64).ln() - two_pi_ln;
    }
    out
}

/// Evaluates `κ_m` at a single complex point of a one-dimensional domain.
pub fn log_kernel_at(state: &IterationState, z: Complex64) -> Result<f64> {
    state.gram.log_kernel(&[z])
}
