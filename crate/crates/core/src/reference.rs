//! Kähler-Einstein reference volume forms and the model metric.
//!
//! The Einstein normalization is `−Ric(ω_E) = ω_E` with
//! `ω_E = (√-1/2) Σ g_{ij̄} dz_i∧dz̄_j`, so `Ric = −√-1 ∂∂̄ log det g` forces
//! `g = 2·∂∂̄ log det g`. Writing the volume form as `D·Λ` with
//! `Λ = 2ⁿ·Lebesgue`, the Lebesgue density is `det g = 2ⁿD` and the equation
//! becomes `det(∂∂̄ log D) = D`. On the disc of radius `R` this gives the
//! Lebesgue density `4R²/(R²−|z|²)²`, i.e. `D = 2R²/(R²−|z|²)²`.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, ModelShape, SublevelDomain};
use crate::error::{Error, Result};
use crate::nodes::{point_norm, write_node_csv, NodeSet};
use crate::numerics::{fd_complex_hessian, hermitian_det, min_hermitian_eigenvalue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    DiscClosedForm,
    AnnulusClosedForm,
    BallClosedForm,
    ModelMetric,
    ExhaustionLimit,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::DiscClosedForm => "disc_closed_form",
            Provenance::AnnulusClosedForm => "annulus_closed_form",
            Provenance::BallClosedForm => "ball_closed_form",
            Provenance::ModelMetric => "model_metric",
            Provenance::ExhaustionLimit => "exhaustion_limit",
        }
    }
}

/// Log-density of a volume form against `Λ = 2ⁿ·Lebesgue` on a node set.
#[derive(Clone, Debug)]
pub struct VolumeFormField {
    pub nodes: NodeSet,
    pub log_density: Vec<f64>,
    pub provenance: Provenance,
}

impl VolumeFormField {
    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    pub fn len(&self) -> usize {
        self.log_density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_density.is_empty()
    }

    /// Log of the density against Lebesgue measure.
    pub fn lebesgue_log_density(&self) -> Vec<f64> {
        let shift = self.dim() as f64 * LN_2;
        self.log_density.iter().map(|v| v + shift).collect()
    }

    /// The same form multiplied by a positive constant.
    pub fn scaled(&self, factor: f64) -> VolumeFormField {
        let shift = factor.ln();
        VolumeFormField {
            nodes: self.nodes.clone(),
            log_density: self.log_density.iter().map(|v| v + shift).collect(),
            provenance: self.provenance,
        }
    }

    pub fn to_csv(&self) -> String {
        write_node_csv(
            &self.nodes,
            &[("log_value", &self.log_density)],
            Some(&format!("provenance: {}; density against Lambda = 2^n Lebesgue", self.provenance.label())),
        )
    }
}

fn field_from<F>(domain_name: &str, nodes: &NodeSet, inside: impl Fn(&[Complex64]) -> bool + Sync, log_density: F, provenance: Provenance) -> Result<VolumeFormField>
where
    F: Fn(&[Complex64]) -> f64 + Sync,
{
    for (index, p) in nodes.iter().enumerate() {
        if !inside(p) {
            return Err(Error::PointOutsideDomain { domain: domain_name.to_string(), index });
        }
    }
    let points: Vec<&[Complex64]> = nodes.iter().collect();
    let log_density = points.par_iter().map(|p| log_density(p)).collect();
    Ok(VolumeFormField { nodes: nodes.clone(), log_density, provenance })
}

/// `log D` for the disc of radius `R`: `D = 2R²/(R²−|z|²)²`.
pub fn ke_disc_log_density(radius: f64, z: Complex64) -> f64 {
    let r2 = radius * radius;
    LN_2 + r2.ln() - 2.0 * (r2 - z.norm_sqr()).ln()
}

/// `log D` for the annulus `a < |z| < b`.
///
/// `w = log z` maps the annulus onto a vertical strip of width
/// `L = log(b/a)`, whose curvature −1 metric is `(π/L)/sin(π·(Re w − log a)/L)·|dw|`.
pub fn ke_annulus_log_density(r_in: f64, r_out: f64, z: Complex64) -> f64 {
    let l = (r_out / r_in).ln();
    let r = z.norm();
    let angle = PI * (r / r_in).ln() / l;
    // Lebesgue density (π/L)²/(|z|² sin²), halved for Λ
    2.0 * (PI / l).ln() - 2.0 * r.ln() - 2.0 * angle.sin().ln() - LN_2
}

/// `log D` for the ball of radius `R` in `Cⁿ`: `D = (n+1)ⁿ R²/(R²−|z|²)^{n+1}`.
pub fn ke_ball_log_density(dim: usize, radius: f64, z: &[Complex64]) -> f64 {
    let n = dim as f64;
    let r2 = radius * radius;
    let norm2: f64 = z.iter().map(|w| w.norm_sqr()).sum();
    n * (n + 1.0).ln() + r2.ln() - (n + 1.0) * (r2 - norm2).ln()
}

pub fn ke_disc(radius: f64, nodes: &NodeSet) -> Result<VolumeFormField> {
    if !(radius > 0.0) {
        return Err(Error::InvalidDomain(format!("disc radius must be positive, got {radius}")));
    }
    if nodes.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: nodes.dim() });
    }
    field_from(
        "disc",
        nodes,
        |p| p[0].norm() < radius,
        |p| ke_disc_log_density(radius, p[0]),
        Provenance::DiscClosedForm,
    )
}

pub fn ke_annulus(r_in: f64, r_out: f64, nodes: &NodeSet) -> Result<VolumeFormField> {
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(Error::InvalidDomain(format!("need 0 < r_in < r_out, got ({r_in}, {r_out})")));
    }
    if nodes.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: nodes.dim() });
    }
    field_from(
        "annulus",
        nodes,
        |p| p[0].norm() > r_in && p[0].norm() < r_out,
        |p| ke_annulus_log_density(r_in, r_out, p[0]),
        Provenance::AnnulusClosedForm,
    )
}

pub fn ke_ball(dim: usize, radius: f64, nodes: &NodeSet) -> Result<VolumeFormField> {
    if !(radius > 0.0) {
        return Err(Error::InvalidDomain(format!("ball radius must be positive, got {radius}")));
    }
    if nodes.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: nodes.dim() });
    }
    field_from(
        "ball",
        nodes,
        |p| point_norm(p) < radius,
        |p| ke_ball_log_density(dim, radius, p),
        Provenance::BallClosedForm,
    )
}

/// Closed-form reference for a model domain.
pub fn ke_for_domain(domain: &Domain, nodes: &NodeSet) -> Result<VolumeFormField> {
    match domain.shape() {
        Some(ModelShape::Disc { radius }) => ke_disc(radius, nodes),
        Some(ModelShape::Annulus { inner, outer }) => ke_annulus(inner, outer, nodes),
        Some(ModelShape::Ball { dim, radius }) => ke_ball(dim, radius, nodes),
        None => Err(Error::NoReference(domain.name().to_string())),
    }
}

/// Pointwise log-density function of a model domain's reference.
pub fn ke_log_density_fn(domain: &Domain) -> Result<Box<dyn Fn(&[Complex64]) -> f64 + Send + Sync>> {
    match domain.shape() {
        Some(ModelShape::Disc { radius }) => Ok(Box::new(move |p| ke_disc_log_density(radius, p[0]))),
        Some(ModelShape::Annulus { inner, outer }) => Ok(Box::new(move |p| ke_annulus_log_density(inner, outer, p[0]))),
        Some(ModelShape::Ball { dim, radius }) => Ok(Box::new(move |p| ke_ball_log_density(dim, radius, p))),
        None => Err(Error::NoReference(domain.name().to_string())),
    }
}

/// Largest relative defect `|det(∂∂̄ log D)/D − 1|` over the points, with the
/// complex Hessian taken by finite differences of step `h`.
pub fn einstein_residual<F>(log_density: &F, points: &[Vec<Complex64>], h: f64) -> f64
where
    F: Fn(&[Complex64]) -> f64 + Sync,
{
    points
        .par_iter()
        .map(|p| {
            let hess = fd_complex_hessian(log_density, p, h);
            (hermitian_det(&hess) / log_density(p).exp() - 1.0).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Model metric `√-1 ∂∂̄(−log(−φ))` on a node set.
#[derive(Clone, Debug)]
pub struct ModelMetricField {
    pub nodes: NodeSet,
    /// `log det(∂∂̄(−log(−φ)))`, which is also the log-density of the model
    /// volume form against `Λ` (the metric form carries a factor 2 against
    /// the `(√-1/2)`-normalized Hessian, cancelling the `2ⁿ` of `Λ`).
    pub log_det_g: Vec<f64>,
    /// `∂_i∂̄_j(−log(−φ)) = φ_{ij̄}/(−φ) + φ_i φ_j̄/φ²`
    pub components: Option<Vec<DMatrix<Complex64>>>,
    /// whether `φ_{ij̄}` is positive definite at the node (advisory)
    pub levi_positive: Vec<bool>,
}

impl ModelMetricField {
    pub fn as_volume_form(&self) -> VolumeFormField {
        VolumeFormField { nodes: self.nodes.clone(), log_density: self.log_det_g.clone(), provenance: Provenance::ModelMetric }
    }
}

/// Adjugate of a small hermitian matrix.
fn adjugate(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    match a.nrows() {
        1 => DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        2 => DMatrix::from_row_slice(2, 2, &[a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]]),
        _ => {
            let det = a.determinant();
            a.clone().try_inverse().map(|inv| inv * det).unwrap_or_else(|| DMatrix::zeros(a.nrows(), a.ncols()))
        }
    }
}

/// `det(φ_{ij̄})·(−φ + |∂φ|²)` with `|∂φ|² = φ^{ij̄}φ_iφ_j̄` (gradient norm
/// taken with the inverse Levi form), written with the adjugate so that it
/// stays defined where `φ_{ij̄}` degenerates.
pub fn determinant_factor(jet: &crate::domain::Jet) -> f64 {
    let v = DVector::from_column_slice(&jet.gradient);
    let adj = adjugate(&jet.hessian);
    let quad = (v.adjoint() * adj * &v)[(0, 0)].re;
    -jet.value * hermitian_det(&jet.hessian) + quad
}

/// `log det ∂∂̄(−log(−φ)) = (n+1)·log(−1/φ) + log[det(φ_{ij̄})(−φ + |∂φ|²)]`.
pub fn model_metric_volume(domain: &Domain, nodes: &NodeSet) -> Result<ModelMetricField> {
    domain.check_interior(nodes)?;
    let n = domain.dim() as f64;
    let points: Vec<&[Complex64]> = nodes.iter().collect();
    let rows: Vec<(f64, f64, DMatrix<Complex64>, bool)> = points
        .par_iter()
        .map(|p| {
            let jet = domain.jet(p);
            let factor = determinant_factor(&jet);
            let log_det = (n + 1.0) * (-1.0 / jet.value).ln() + factor.ln();
            let phi = jet.value;
            let dim = jet.gradient.len();
            let comp = DMatrix::from_fn(dim, dim, |i, j| {
                jet.hessian[(i, j)] / (-phi) + jet.gradient[i] * jet.gradient[j].conj() / (phi * phi)
            });
            let levi = min_hermitian_eigenvalue(&jet.hessian) > 0.0;
            (factor, log_det, comp, levi)
        })
        .collect();
    if let Some(index) = rows.iter().position(|r| !(r.0 > 0.0)) {
        return Err(Error::ModelMetricBreakdown { index, value: rows[index].0 });
    }
    let mut log_det_g = Vec::with_capacity(rows.len());
    let mut components = Vec::with_capacity(rows.len());
    let mut levi_positive = Vec::with_capacity(rows.len());
    for (_, l, c, p) in rows {
        log_det_g.push(l);
        components.push(c);
        levi_positive.push(p);
    }
    Ok(ModelMetricField { nodes: nodes.clone(), log_det_g, components: Some(components), levi_positive })
}

/// Largest relative difference between the determinant formula and the
/// finite-difference determinant of `∂∂̄(−log(−φ))`.
pub fn model_metric_fd_defect(domain: &Domain, field: &ModelMetricField, h: f64) -> f64 {
    let potential = |z: &[Complex64]| -(-domain.value(z)).ln();
    field
        .nodes
        .iter()
        .zip(&field.log_det_g)
        .map(|(p, l)| {
            let fd = hermitian_det(&fd_complex_hessian(&potential, p, h));
            (fd / l.exp() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug)]
pub struct RatioBracket {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Extremes of `model density / reference density` over shared nodes.
pub fn quasi_isometry_ratio(model: &ModelMetricField, reference: &VolumeFormField) -> Result<RatioBracket> {
    if model.nodes != reference.nodes {
        return Err(Error::NodeMismatch("model and reference live on different nodes".into()));
    }
    if model.log_det_g.is_empty() {
        return Err(Error::EmptyReport);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in model.log_det_g.iter().zip(&reference.log_density) {
        let d = a - b;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(RatioBracket { min_ratio: lo.exp(), max_ratio: hi.exp() })
}

#[derive(Clone, Debug)]
pub struct ExhaustionReport {
    pub levels: Vec<f64>,
    /// Lebesgue densities `dV_{E,c}(point)`, one per level
    pub densities: Vec<f64>,
    pub limit_estimate: f64,
    /// `|last − second to last|`; zero for a single level
    pub cauchy_gap: f64,
}

/// Relative tolerance of the monotonicity checks.
pub const MONOTONE_TOLERANCE: f64 = 1e-10;

/// KE densities at one point along an exhaustion `Ω_c ↑ Ω`.
pub fn exhaustion_limit<F>(family: F, point: &[Complex64], levels: &[f64]) -> Result<ExhaustionReport>
where
    F: Fn(f64) -> Result<SublevelDomain>,
{
    if levels.is_empty() {
        return Err(Error::EmptyReport);
    }
    if let Some(i) = levels.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::LevelsNotAscending { index: i + 1 });
    }
    let nodes = NodeSet::from_points(point.len(), &[point.to_vec()])?;
    let mut densities = Vec::with_capacity(levels.len());
    for &c in levels {
        let sub = family(c)?;
        let field = ke_for_domain(sub.domain(), &nodes)?;
        let value = field.lebesgue_log_density()[0].exp();
        if let Some(&previous) = densities.last() {
            if value > previous * (1.0 + MONOTONE_TOLERANCE) {
                return Err(Error::NonMonotone { level: c, previous, current: value });
            }
        }
        densities.push(value);
    }
    let limit_estimate = *densities.last().expect("nonempty");
    let cauchy_gap = if densities.len() > 1 { (densities[densities.len() - 2] - limit_estimate).abs() } else { 0.0 };
    Ok(ExhaustionReport { levels: levels.to_vec(), densities, limit_estimate, cauchy_gap })
}

#[derive(Clone, Debug)]
pub struct YauSchwarzReport {
    pub holds: bool,
    /// largest `D_large/D_small − 1`
    pub max_excess: f64,
    pub worst_index: usize,
}

impl YauSchwarzReport {
    pub fn into_result(self) -> Result<YauSchwarzReport> {
        if self.holds {
            Ok(self)
        } else {
            Err(Error::YauSchwarzViolation { index: self.worst_index, excess: self.max_excess })
        }
    }
}

/// Checks that the larger domain's density is pointwise below the smaller
/// domain's, up to [`MONOTONE_TOLERANCE`].
pub fn yau_schwarz_check(small: &VolumeFormField, large: &VolumeFormField) -> Result<YauSchwarzReport> {
    if small.nodes != large.nodes {
        return Err(Error::NodeMismatch("Yau-Schwarz fields live on different nodes".into()));
    }
    if small.is_empty() {
        return Err(Error::EmptyReport);
    }
    let (worst_index, max_excess) = small
        .log_density
        .iter()
        .zip(&large.log_density)
        .map(|(s, l)| (l - s).exp_m1())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    Ok(YauSchwarzReport { holds: max_excess <= MONOTONE_TOLERANCE, max_excess, worst_index })
}
