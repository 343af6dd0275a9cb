//! Bounded pseudoconvex domains described by defining functions.
//!
//! A domain is `Ω = {φ < 0}` for a closed-form defining function `φ` that
//! reports its value, Wirtinger gradient `∂φ/∂z_i` and complex Hessian
//! `φ_{ij̄}` analytically. Finite differences are only used to cross-check.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fd_complex_hessian, fd_wirtinger_gradient, min_hermitian_eigenvalue};

/// Value, Wirtinger gradient and complex Hessian of a defining function.
#[derive(Clone, Debug)]
pub struct Jet {
    pub value: f64,
    /// `∂φ/∂z_i`
    pub gradient: Vec<Complex64>,
    /// `∂²φ/∂z_i∂z̄_j`, hermitian
    pub hessian: DMatrix<Complex64>,
}

impl Jet {
    /// `(λ+μφ)` has the jet `(λ+μφ, μ∂φ, μφ_{ij̄})`.
    pub fn affine(&self, shift: f64, scale: f64) -> Jet {
        Jet {
            value: shift + scale * self.value,
            gradient: self.gradient.iter().map(|g| g * scale).collect(),
            hessian: &self.hessian * Complex64::new(scale, 0.0),
        }
    }
}

pub trait DefiningFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn jet(&self, z: &[Complex64]) -> Jet;

    fn value(&self, z: &[Complex64]) -> f64 {
        self.jet(z).value
    }
}

/// Rotation symmetry of a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// invariant under `z → e^{iθ}z`
    Circular,
    Reinhardt,
    None,
}

/// Geometry with closed-form references, when the domain is a model domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelShape {
    Disc { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    Ball { dim: usize, radius: f64 },
}

/// `φ = Σ|z_i|² − R²`; the disc when `dim = 1`.
#[derive(Clone, Debug)]
pub struct BallPhi {
    pub dim: usize,
    pub radius: f64,
}

impl DefiningFunction for BallPhi {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, z: &[Complex64]) -> Jet {
        let norm_sqr: f64 = z.iter().map(|w| w.norm_sqr()).sum();
        Jet {
            value: norm_sqr - self.radius * self.radius,
            gradient: z.iter().map(|w| w.conj()).collect(),
            hessian: DMatrix::identity(self.dim, self.dim),
        }
    }

    fn value(&self, z: &[Complex64]) -> f64 {
        z.iter().map(|w| w.norm_sqr()).sum::<f64>() - self.radius * self.radius
    }
}

/// Product form `φ = (|z|² − a²)(|z|² − b²)`. Negative exactly on the
/// annulus but not plurisubharmonic near the inner circle.
#[derive(Clone, Debug)]
pub struct AnnulusPhi {
    pub inner: f64,
    pub outer: f64,
}

impl DefiningFunction for AnnulusPhi {
    fn dim(&self) -> usize {
        1
    }

    fn jet(&self, z: &[Complex64]) -> Jet {
        let a2 = self.inner * self.inner;
        let b2 = self.outer * self.outer;
        let t = z[0].norm_sqr();
        let first = 2.0 * t - a2 - b2;
        Jet {
            value: (t - a2) * (t - b2),
            gradient: vec![z[0].conj() * first],
            hessian: DMatrix::from_element(1, 1, Complex64::new(4.0 * t - a2 - b2, 0.0)),
        }
    }
}

/// `φ = x^p + y^p − 1` for even `p`, a smoothed square.
#[derive(Clone, Debug)]
pub struct SuperellipsePhi {
    pub exponent: u32,
}

impl DefiningFunction for SuperellipsePhi {
    fn dim(&self) -> usize {
        1
    }

    fn jet(&self, z: &[Complex64]) -> Jet {
        let p = self.exponent as i32;
        let pf = p as f64;
        let (x, y) = (z[0].re, z[0].im);
        let fx = pf * x.powi(p - 1);
        let fy = pf * y.powi(p - 1);
        let lap = pf * (pf - 1.0) * (x.powi(p - 2) + y.powi(p - 2));
        Jet {
            value: x.powi(p) + y.powi(p) - 1.0,
            gradient: vec![Complex64::new(0.5 * fx, -0.5 * fy)],
            hessian: DMatrix::from_element(1, 1, Complex64::new(0.25 * lap, 0.0)),
        }
    }
}

/// `φ − c`, the defining function of the sublevel set `{φ < c}`.
#[derive(Clone, Debug)]
pub struct ShiftedPhi {
    pub parent: Arc<dyn DefiningFunction>,
    pub level: f64,
}

impl DefiningFunction for ShiftedPhi {
    fn dim(&self) -> usize {
        self.parent.dim()
    }

    fn jet(&self, z: &[Complex64]) -> Jet {
        self.parent.jet(z).affine(-self.level, 1.0)
    }

    fn value(&self, z: &[Complex64]) -> f64 {
        self.parent.value(z) - self.level
    }
}

/// Defining function supplied as a closure returning the full jet.
pub struct FnPhi {
    dim: usize,
    f: Box<dyn Fn(&[Complex64]) -> Jet + Send + Sync>,
}

impl FnPhi {
    pub fn new(dim: usize, f: impl Fn(&[Complex64]) -> Jet + Send + Sync + 'static) -> Self {
        Self { dim, f: Box::new(f) }
    }
}

impl fmt::Debug for FnPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPhi").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl DefiningFunction for FnPhi {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, z: &[Complex64]) -> Jet {
        (self.f)(z)
    }
}

/// Radius profile `ρ(s)` of a Hartogs family `{|z| < ρ(s)}` over the unit disc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusProfile {
    /// `ρ(s) = exp(Re s) = |e^s|`
    ExpRe,
    /// `ρ(s) = |a + b·s|`, nonvanishing on the unit disc when `|a| > |b|`
    AbsAffine { a: [f64; 2], b: [f64; 2] },
    /// `ρ(s) = exp(|s|²/2)`: `log ρ` strictly subharmonic, total space not pseudoconvex
    ExpHalfAbsSq,
    /// `ρ(s) = 1 − |s|²/2`
    Concave,
}

impl RadiusProfile {
    pub fn radius(&self, s: Complex64) -> f64 {
        match self {
            RadiusProfile::ExpRe => s.re.exp(),
            RadiusProfile::AbsAffine { a, b } => {
                (Complex64::new(a[0], a[1]) + Complex64::new(b[0], b[1]) * s).norm()
            }
            RadiusProfile::ExpHalfAbsSq => (0.5 * s.norm_sqr()).exp(),
            RadiusProfile::Concave => 1.0 - 0.5 * s.norm_sqr(),
        }
    }

    /// Whether `−log ρ` is subharmonic, i.e. the Hartogs total space is pseudoconvex.
    pub fn is_pseudoconvex(&self) -> bool {
        !matches!(self, RadiusProfile::ExpHalfAbsSq)
    }

    pub fn label(&self) -> String {
        match self {
            RadiusProfile::ExpRe => "exp(Re s)".into(),
            RadiusProfile::AbsAffine { a, b } => {
                format!("|({}{:+}i) + ({}{:+}i)s|", a[0], a[1], b[0], b[1])
            }
            RadiusProfile::ExpHalfAbsSq => "exp(|s|^2/2)".into(),
            RadiusProfile::Concave => "1 - |s|^2/2".into(),
        }
    }
}

/// A bounded domain `{φ < 0}` with its bounding box and symmetry metadata.
#[derive(Clone, Debug)]
pub struct Domain {
    name: String,
    phi: Arc<dyn DefiningFunction>,
    /// real 2n-box `[(x1_lo, x1_hi), (y1_lo, y1_hi), …]`
    bounding_box: Vec<(f64, f64)>,
    symmetry: Symmetry,
    shape: Option<ModelShape>,
}

impl Domain {
    pub fn custom(
        name: impl Into<String>,
        phi: Arc<dyn DefiningFunction>,
        bounding_box: Vec<(f64, f64)>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        let dim = phi.dim();
        if bounding_box.len() != 2 * dim {
            return Err(Error::DimensionMismatch { expected: 2 * dim, got: bounding_box.len() });
        }
        if bounding_box.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidDomain("bounding box must be finite and non-degenerate".into()));
        }
        Ok(Self { name: name.into(), phi, bounding_box, symmetry, shape: None })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    pub fn phi(&self) -> &Arc<dyn DefiningFunction> {
        &self.phi
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn bounding_box(&self) -> &[(f64, f64)] {
        &self.bounding_box
    }

    pub fn shape(&self) -> Option<ModelShape> {
        self.shape
    }

    pub fn value(&self, z: &[Complex64]) -> f64 {
        self.phi.value(z)
    }

    pub fn jet(&self, z: &[Complex64]) -> Jet {
        self.phi.jet(z)
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        self.phi.value(z) < 0.0
    }

    /// For one-dimensional circular domains: the radii `(a, b)` with
    /// `Ω = {a < |z| < b}` (`a = 0` for discs).
    pub fn radial_interval(&self) -> Option<(f64, f64)> {
        if self.dim() != 1 || self.symmetry != Symmetry::Circular {
            return None;
        }
        match self.shape {
            Some(ModelShape::Disc { radius }) => Some((0.0, radius)),
            Some(ModelShape::Annulus { inner, outer }) => Some((inner, outer)),
            _ => radial_interval_by_scan(self),
        }
    }

    /// Largest radius of a ball (disc) inside the domain, for model shapes.
    pub fn inradius(&self) -> Option<f64> {
        match self.shape? {
            ModelShape::Disc { radius } | ModelShape::Ball { radius, .. } => Some(radius),
            ModelShape::Annulus { inner, outer } => Some(0.5 * (outer - inner)),
        }
    }

    /// Rejects nodes where `φ ≥ 0`.
    pub fn check_interior(&self, nodes: &crate::nodes::NodeSet) -> Result<()> {
        if nodes.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: nodes.dim() });
        }
        for (index, p) in nodes.iter().enumerate() {
            if !self.contains(p) {
                return Err(Error::PointOutsideDomain { domain: self.name.clone(), index });
            }
        }
        Ok(())
    }

    /// Largest relative deviation between the analytic gradient/Hessian and
    /// central finite differences of `φ` over the given points.
    pub fn derivative_defect(&self, points: &[Vec<Complex64>], h: f64) -> f64 {
        let f = |z: &[Complex64]| self.phi.value(z);
        let mut worst: f64 = 0.0;
        for p in points {
            let jet = self.phi.jet(p);
            let grad = fd_wirtinger_gradient(&f, p, h);
            let hess = fd_complex_hessian(&f, p, h);
            let gscale = jet.gradient.iter().map(|g| g.norm()).fold(1.0, f64::max);
            for (a, b) in jet.gradient.iter().zip(&grad) {
                worst = worst.max((a - b).norm() / gscale);
            }
            let hscale = jet.hessian.iter().map(|g| g.norm()).fold(1.0, f64::max);
            for (a, b) in jet.hessian.iter().zip(hess.iter()) {
                worst = worst.max((a - b).norm() / hscale);
            }
        }
        worst
    }

    /// Deterministic interior sample, used by hypothesis checks.
    pub fn sample_interior(&self, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count && attempts < 1000 * count.max(1) {
            attempts += 1;
            let p: Vec<Complex64> = self
                .bounding_box
                .chunks_exact(2)
                .map(|c| Complex64::new(rng.random_range(c[0].0..c[0].1), rng.random_range(c[1].0..c[1].1)))
                .collect();
            if self.contains(&p) {
                out.push(p);
            }
        }
        out
    }
}

fn radial_interval_by_scan(domain: &Domain) -> Option<(f64, f64)> {
    let rmax = domain
        .bounding_box
        .iter()
        .map(|(lo, hi)| lo.abs().max(hi.abs()))
        .fold(0.0, f64::max)
        * std::f64::consts::SQRT_2;
    let inside = |r: f64| domain.value(&[Complex64::new(r, 0.0)]) < 0.0;
    let samples = 4096;
    let mut first = None;
    let mut last = None;
    for k in 0..=samples {
        let r = rmax * k as f64 / samples as f64;
        if inside(r) {
            if first.is_none() {
                first = Some(k);
            }
            last = Some(k);
        }
    }
    let (first, last) = (first?, last?);
    let bisect = |mut lo: f64, mut hi: f64, lo_inside: bool| {
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) == lo_inside {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let step = rmax / samples as f64;
    let a = if first == 0 { 0.0 } else { bisect((first - 1) as f64 * step, first as f64 * step, false) };
    let b = bisect(last as f64 * step, (last + 1) as f64 * step, true);
    Some((a, b))
}

fn disc_box(radius: f64, dim: usize) -> Vec<(f64, f64)> {
    vec![(-radius, radius); 2 * dim]
}

pub fn make_disc(radius: f64) -> Result<Domain> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidDomain(format!("disc radius must be positive, got {radius}")));
    }
    Ok(Domain {
        name: format!("disc(R={radius})"),
        phi: Arc::new(BallPhi { dim: 1, radius }),
        bounding_box: disc_box(radius, 1),
        symmetry: Symmetry::Circular,
        shape: Some(ModelShape::Disc { radius }),
    })
}

pub fn make_annulus(r_in: f64, r_out: f64) -> Result<Domain> {
    if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
        return Err(Error::InvalidDomain(format!(
            "annulus needs 0 < r_in < r_out, got ({r_in}, {r_out})"
        )));
    }
    Ok(Domain {
        name: format!("annulus({r_in},{r_out})"),
        phi: Arc::new(AnnulusPhi { inner: r_in, outer: r_out }),
        bounding_box: disc_box(r_out, 1),
        symmetry: Symmetry::Circular,
        shape: Some(ModelShape::Annulus { inner: r_in, outer: r_out }),
    })
}

pub fn make_ball(dim: usize, radius: f64) -> Result<Domain> {
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidDomain(format!("ball dimension must be 1 or 2, got {dim}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidDomain(format!("ball radius must be positive, got {radius}")));
    }
    if dim == 1 {
        return make_disc(radius);
    }
    Ok(Domain {
        name: format!("ball(n={dim},R={radius})"),
        phi: Arc::new(BallPhi { dim, radius }),
        bounding_box: disc_box(radius, dim),
        symmetry: Symmetry::Circular,
        shape: Some(ModelShape::Ball { dim, radius }),
    })
}

/// Fiber `{|z| < ρ(s)}` of a Hartogs family.
pub fn make_hartogs_fiber(s: Complex64, profile: &RadiusProfile) -> Result<Domain> {
    let radius = profile.radius(s);
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidDomain(format!(
            "profile {} is not positive at s = {s}",
            profile.label()
        )));
    }
    let mut d = make_disc(radius)?;
    d.name = format!("hartogs[{}](s={s})", profile.label());
    Ok(d)
}

/// `{x^p + y^p < 1}` for even `p ≥ 2`.
pub fn make_superellipse(exponent: u32) -> Result<Domain> {
    if exponent < 2 || exponent % 2 == 1 {
        return Err(Error::InvalidDomain(format!("superellipse exponent must be even ≥ 2, got {exponent}")));
    }
    Domain::custom(
        format!("superellipse(p={exponent})"),
        Arc::new(SuperellipsePhi { exponent }),
        disc_box(1.0, 1),
        Symmetry::None,
    )
}

/// The sublevel set `{φ < c}` of a domain's defining function.
#[derive(Clone, Debug)]
pub struct SublevelDomain {
    pub parent: Domain,
    pub level: f64,
    domain: Domain,
}

impl SublevelDomain {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn into_domain(self) -> Domain {
        self.domain
    }
}

pub fn sublevel(domain: &Domain, c: f64) -> Result<SublevelDomain> {
    let (shape, bounding_box) = match domain.shape {
        Some(ModelShape::Disc { radius }) | Some(ModelShape::Ball { radius, .. }) => {
            let r2 = radius * radius + c;
            if r2 <= 0.0 {
                return Err(Error::EmptySublevel { level: c });
            }
            let r = r2.sqrt();
            let shape = match domain.shape {
                Some(ModelShape::Ball { dim, .. }) => ModelShape::Ball { dim, radius: r },
                _ => ModelShape::Disc { radius: r },
            };
            (Some(shape), disc_box(r, domain.dim()))
        }
        Some(ModelShape::Annulus { inner, outer }) => {
            let (a2, b2) = (inner * inner, outer * outer);
            let half = 0.5 * (b2 - a2);
            let disc = half * half + c;
            if disc <= 0.0 {
                return Err(Error::EmptySublevel { level: c });
            }
            let mid = 0.5 * (a2 + b2);
            let lo = mid - disc.sqrt();
            let hi = (mid + disc.sqrt()).sqrt();
            let shape = if lo > 0.0 {
                ModelShape::Annulus { inner: lo.sqrt(), outer: hi }
            } else {
                ModelShape::Disc { radius: hi }
            };
            (Some(shape), disc_box(hi, 1))
        }
        None => {
            if c > 0.0 {
                return Err(Error::InvalidDomain(
                    "sublevel above 0 needs a model shape to bound the new domain".into(),
                ));
            }
            // sampled emptiness check
            let min = sampled_minimum(domain);
            if c <= min {
                return Err(Error::EmptySublevel { level: c });
            }
            (None, domain.bounding_box.clone())
        }
    };
    let phi: Arc<dyn DefiningFunction> = if c == 0.0 {
        domain.phi.clone()
    } else {
        Arc::new(ShiftedPhi { parent: domain.phi.clone(), level: c })
    };
    // a disc-shaped sublevel of an annulus is no longer described by the
    // annulus closed forms but keeps its radial symmetry
    let inner = Domain {
        name: if c == 0.0 { domain.name.clone() } else { format!("{}{{φ<{c}}}", domain.name) },
        phi,
        bounding_box,
        symmetry: domain.symmetry,
        shape,
    };
    Ok(SublevelDomain { parent: domain.clone(), level: c, domain: inner })
}

fn sampled_minimum(domain: &Domain) -> f64 {
    let per_axis: usize = if domain.dim() == 1 { 256 } else { 24 };
    let axes = domain.bounding_box.len();
    let total = per_axis.pow(axes as u32);
    let mut min = f64::INFINITY;
    let mut idx = vec![0usize; axes];
    for _ in 0..total {
        let coords: Vec<f64> = idx
            .iter()
            .zip(&domain.bounding_box)
            .map(|(&k, (lo, hi))| lo + (hi - lo) * (k as f64 + 0.5) / per_axis as f64)
            .collect();
        let z: Vec<Complex64> = coords.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        min = min.min(domain.value(&z));
        for k in idx.iter_mut() {
            *k += 1;
            if *k < per_axis {
                break;
            }
            *k = 0;
        }
    }
    min
}

/// Minimum Levi eigenvalue over sampled points.
#[derive(Clone, Debug)]
pub struct LeviReport {
    pub min_levi_eigenvalue: f64,
    pub strictly_psh: bool,
    pub worst_point: Vec<Complex64>,
    pub samples: usize,
}

/// Samples the complex Hessian `φ_{ij̄}` over the interior, including points
/// close to the boundary, and records its smallest eigenvalue.
pub fn levi_check(domain: &Domain, sample_count: usize) -> Result<LeviReport> {
    if sample_count == 0 {
        return Err(Error::InvalidDomain("levi_check needs at least one sample".into()));
    }
    let points: Vec<Vec<Complex64>> = match domain.radial_interval() {
        Some((a, b)) => (0..sample_count)
            .map(|k| {
                let t = (k as f64 + 0.5) / sample_count as f64;
                let r = a + (b - a) * t;
                let theta = 2.399_963_229_728_653 * k as f64;
                vec![Complex64::from_polar(r, theta)]
            })
            .collect(),
        None => domain.sample_interior(sample_count, 0x1e71),
    };
    if points.is_empty() {
        return Err(Error::InvalidDomain("no interior samples found".into()));
    }
    let mut min = f64::INFINITY;
    let mut worst = points[0].clone();
    for p in &points {
        let jet = domain.jet(p);
        if jet.hessian.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
            return Err(Error::InvalidDomain(format!("Hessian not finite at {p:?}")));
        }
        let lambda = min_hermitian_eigenvalue(&jet.hessian);
        if lambda < min {
            min = lambda;
            worst = p.clone();
        }
    }
    Ok(LeviReport { min_levi_eigenvalue: min, strictly_psh: min > 0.0, worst_point: worst, samples: points.len() })
}

/// JSON description of a supported domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disc { radius: f64 },
    Annulus { r_in: f64, r_out: f64 },
    Ball { n: usize, radius: f64 },
    Hartogs { s: [f64; 2], profile: RadiusProfile },
    Superellipse { exponent: u32 },
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::Disc { radius: 1.0 }
    }
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainSpec::Disc { radius } => make_disc(*radius),
            DomainSpec::Annulus { r_in, r_out } => make_annulus(*r_in, *r_out),
            DomainSpec::Ball { n, radius } => make_ball(*n, *radius),
            DomainSpec::Hartogs { s, profile } => make_hartogs_fiber(Complex64::new(s[0], s[1]), profile),
            DomainSpec::Superellipse { exponent } => make_superellipse(*exponent),
        }
    }

    pub fn from_json(text: &str) -> Result<Domain> {
        let spec: DomainSpec = serde_json::from_str(text)?;
        spec.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disc_values() {
        let d = make_disc(1.0).unwrap();
        assert_eq!(d.value(&[c(0.0, 0.0)]), -1.0);
        assert_eq!(d.value(&[c(1.0, 0.0)]), 0.0);
        let d2 = make_disc(2.0).unwrap();
        assert_eq!(d2.value(&[c(1.0, 0.0)]), -3.0);
        assert!(make_disc(0.0).is_err());
        assert!(make_disc(-1.0).is_err());
    }

    #[test]
    fn other_model_domains() {
        let a = make_annulus(0.5, 1.0).unwrap();
        assert!(a.contains(&[c(0.7, 0.0)]));
        assert!(!a.contains(&[c(0.3, 0.0)]));
        assert!(!a.contains(&[c(1.1, 0.0)]));
        assert!(make_annulus(1.0, 0.5).is_err());
        assert!(make_annulus(0.5, 0.5).is_err());

        let b = make_ball(2, 1.0).unwrap();
        assert_eq!(b.value(&[c(0.0, 0.0), c(0.0, 0.0)]), -1.0);

        let h = make_hartogs_fiber(c(0.0, 0.0), &RadiusProfile::ExpRe).unwrap();
        assert_eq!(h.shape(), Some(ModelShape::Disc { radius: 1.0 }));
    }

    #[test]
    fn interior_and_boundary_along_rays() {
        for d in [make_disc(1.3).unwrap(), make_annulus(0.4, 1.0).unwrap(), make_superellipse(8).unwrap()] {
            let (lo, hi) = d.radial_interval().unwrap_or((0.0, 0.0));
            for k in 0..16 {
                let theta = k as f64 * 0.39;
                let dir = Complex64::from_polar(1.0, theta);
                if d.symmetry() == Symmetry::Circular {
                    assert!(d.value(&[dir * hi]).abs() < 1e-9);
                    assert!(d.contains(&[dir * (0.5 * (lo + hi))]));
                    assert!(!d.contains(&[dir * (hi * 1.01)]));
                } else {
                    // bisection along the ray from the origin anchor
                    let (mut a, mut b) = (0.0, 2.0);
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if d.contains(&[dir * m]) { a = m } else { b = m }
                    }
                    assert!(d.value(&[dir * a]).abs() < 1e-9);
                    assert!(d.contains(&[dir * (0.99 * a)]));
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let domains = [
            make_disc(1.0).unwrap(),
            make_annulus(0.5, 1.0).unwrap(),
            make_ball(2, 1.0).unwrap(),
            make_superellipse(8).unwrap(),
        ];
        for d in &domains {
            let pts = d.sample_interior(20, 7);
            assert_eq!(pts.len(), 20);
            let defect = d.derivative_defect(&pts, 1e-3);
            assert!(defect < 1e-6, "{}: {defect}", d.name());
        }
    }

    #[test]
    fn circular_domains_are_rotation_invariant() {
        for d in [make_disc(1.0).unwrap(), make_annulus(0.5, 1.0).unwrap(), make_ball(2, 1.0).unwrap()] {
            for p in d.sample_interior(10, 3) {
                for k in 0..8 {
                    let rot = Complex64::from_polar(1.0, 0.77 * k as f64);
                    let q: Vec<Complex64> = p.iter().map(|z| z * rot).collect();
                    assert!((d.value(&p) - d.value(&q)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn levi_examples() {
        let disc = levi_check(&make_disc(1.0).unwrap(), 50).unwrap();
        assert_eq!(disc.min_levi_eigenvalue, 1.0);
        assert!(disc.strictly_psh);
        let ball = levi_check(&make_ball(2, 1.0).unwrap(), 50).unwrap();
        assert_relative_eq!(ball.min_levi_eigenvalue, 1.0, epsilon = 1e-14);

        // φ_{zz̄} = 4|z|² − a² − b² is negative for |z|² < (a²+b²)/4
        let annulus = levi_check(&make_annulus(0.5, 1.0).unwrap(), 200).unwrap();
        assert!(!annulus.strictly_psh);
        let r = annulus.worst_point[0].norm();
        assert_relative_eq!(annulus.min_levi_eigenvalue, 4.0 * r * r - 1.25, epsilon = 1e-12);
        assert!(annulus.min_levi_eigenvalue < -0.2);
        assert!(levi_check(&make_disc(1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn sublevel_examples() {
        let d = make_disc(1.0).unwrap();
        let s = sublevel(&d, -0.19).unwrap();
        match s.domain().shape() {
            Some(ModelShape::Disc { radius }) => assert_relative_eq!(radius, 0.9, epsilon = 1e-14),
            other => panic!("unexpected {other:?}"),
        }
        assert!(s.domain().contains(&[c(0.89, 0.0)]));
        assert!(!s.domain().contains(&[c(0.91, 0.0)]));
        assert!(sublevel(&d, -1.0).is_err());
        assert!(sublevel(&d, -2.0).is_err());

        let same = sublevel(&d, 0.0).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let z = [c(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2))];
            assert_eq!(same.domain().contains(&z), d.contains(&z));
        }
    }

    #[test]
    fn sublevel_of_custom_domain() {
        let d = make_superellipse(4).unwrap();
        let s = sublevel(&d, -0.5).unwrap();
        assert!(s.domain().contains(&[c(0.0, 0.0)]));
        assert!(!s.domain().contains(&[c(0.9, 0.0)]));
        assert!(sublevel(&d, -1.5).is_err());
    }

    #[test]
    fn sublevel_of_annulus_shapes() {
        let a = make_annulus(0.5, 1.0).unwrap();
        let s = sublevel(&a, -0.1).unwrap();
        let Some(ModelShape::Annulus { inner, outer }) = s.domain().shape() else { panic!() };
        assert!(a.value(&[c(inner, 0.0)]) + 0.1 < 1e-12);
        assert!(a.value(&[c(outer, 0.0)]) + 0.1 < 1e-12);
        let grown = sublevel(&a, 0.5).unwrap();
        assert!(matches!(grown.domain().shape(), Some(ModelShape::Disc { .. })));
    }

    #[test]
    fn json_descriptions() {
        let d = DomainSpec::from_json(r#"{"kind":"annulus","r_in":0.5,"r_out":1.0}"#).unwrap();
        assert_eq!(d.shape(), Some(ModelShape::Annulus { inner: 0.5, outer: 1.0 }));
        let h = DomainSpec::from_json(r#"{"kind":"hartogs","s":[0.0,0.0],"profile":{"kind":"exp_re"}}"#).unwrap();
        assert_eq!(h.radial_interval(), Some((0.0, 1.0)));
        assert!(DomainSpec::from_json(r#"{"kind":"disc","radius":1.0,"foo":2}"#).is_err());
        assert!(DomainSpec::from_json(r#"{"kind":"cube"}"#).is_err());
    }
}
