//! Quadrature rules approximating Lebesgue integration over a domain.
//!
//! Circular one-dimensional domains get a graded radial product rule: a
//! composite Gauss-Legendre rule in a parameter `t` pushed through a map that
//! clusters nodes toward each boundary circle. Everything else gets a
//! tensor-product rule on the bounding box, cut to `φ < 0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::domain::{Domain, Symmetry};
use crate::error::{Error, Result};
use crate::nodes::{write_node_csv, NodeSet};
use crate::numerics::gauss_legendre;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridScheme {
    RadialProduct,
    TensorCartesian,
}

/// One-dimensional radial rule: `∫_Ω f(|z|) dA ≈ 2π Σ w_k r_k f(r_k)`.
#[derive(Clone, Debug)]
pub struct RadialRule {
    pub radii: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        2.0 * PI * self.radii.iter().zip(&self.weights).map(|(r, w)| w * r * f(*r)).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct RadialGridOptions {
    pub radial_panels: usize,
    pub refinement_exponent: f64,
    pub points_per_panel: usize,
    pub angular_points: usize,
}

impl Default for RadialGridOptions {
    fn default() -> Self {
        Self { radial_panels: 64, refinement_exponent: 3.0, points_per_panel: 16, angular_points: 64 }
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub scheme: GridScheme,
    /// Interior nodes; for radial grids this is the 2-d exposure (rings of
    /// equispaced angles at each radial node).
    pub nodes: NodeSet,
    /// Lebesgue weights of `nodes`, all positive.
    pub weights: Vec<f64>,
    pub panel_counts: Vec<usize>,
    pub refinement_exponent: f64,
    pub radial: Option<RadialRule>,
    pub angular_points: usize,
    /// Expected relative error on smooth integrands.
    pub stated_tolerance: f64,
    assembly_nodes: NodeSet,
    assembly_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    /// Nodes on which densities are stored and Gram matrices are assembled:
    /// the radial nodes on the positive real axis for radial grids, all
    /// nodes otherwise.
    pub fn assembly_nodes(&self) -> &NodeSet {
        &self.assembly_nodes
    }

    /// Lebesgue weights matching [`Self::assembly_nodes`] (for radial grids the
    /// ring weight `2π w_k r_k`).
    pub fn assembly_weights(&self) -> &[f64] {
        &self.assembly_weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&[Complex64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn integrate_complex(&self, f: impl Fn(&[Complex64]) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| f(p) * *w).sum()
    }

    /// Scales every node by `factor` (pullback under `z → factor·z`).
    pub fn scaled(&self, factor: f64) -> QuadratureGrid {
        let scale_set = |set: &NodeSet| {
            NodeSet::from_flat(set.dim(), set.iter().flatten().map(|z| z * factor).collect())
                .expect("same dimension")
        };
        let jac = factor.powi(2 * self.dim() as i32);
        QuadratureGrid {
            scheme: self.scheme,
            nodes: scale_set(&self.nodes),
            weights: self.weights.iter().map(|w| w * jac).collect(),
            panel_counts: self.panel_counts.clone(),
            refinement_exponent: self.refinement_exponent,
            radial: self.radial.as_ref().map(|r| RadialRule {
                radii: r.radii.iter().map(|x| x * factor).collect(),
                weights: r.weights.iter().map(|w| w * factor).collect(),
            }),
            angular_points: self.angular_points,
            stated_tolerance: self.stated_tolerance,
            assembly_nodes: scale_set(&self.assembly_nodes),
            assembly_weights: self.assembly_weights.iter().map(|w| w * jac).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let comment = format!(
            "scheme: {:?}; panels: {:?}; refinement_exponent: {}",
            self.scheme, self.panel_counts, self.refinement_exponent
        );
        write_node_csv(&self.nodes, &[("weight", &self.weights)], Some(&comment))
    }
}

/// Graded map `t ∈ [0,1] → g ∈ [0,1]` and its derivative.
fn graded(t: f64, p: f64, two_sided: bool) -> (f64, f64) {
    if !two_sided {
        let s = 1.0 - t;
        (1.0 - s.powf(p), p * s.powf(p - 1.0))
    } else if t <= 0.5 {
        let u = 2.0 * t;
        (0.5 * u.powf(p), p * u.powf(p - 1.0))
    } else {
        let u = 2.0 * (1.0 - t);
        (1.0 - 0.5 * u.powf(p), p * u.powf(p - 1.0))
    }
}

pub fn build_radial_grid(domain: &Domain, radial_panels: usize, refinement_exponent: f64) -> Result<QuadratureGrid> {
    build_radial_grid_with(
        domain,
        &RadialGridOptions { radial_panels, refinement_exponent, ..Default::default() },
    )
}

pub fn build_radial_grid_with(domain: &Domain, options: &RadialGridOptions) -> Result<QuadratureGrid> {
    if domain.symmetry() != Symmetry::Circular {
        return Err(Error::Quadrature(format!("radial grid needs a circular domain, `{}` is not", domain.name())));
    }
    let (inner, outer) = domain.radial_interval().ok_or_else(|| {
        Error::Quadrature(format!("radial grid needs a one-dimensional circular domain, got `{}`", domain.name()))
    })?;
    if options.radial_panels < 4 {
        return Err(Error::Quadrature(format!("radial_panels must be ≥ 4, got {}", options.radial_panels)));
    }
    if !(options.refinement_exponent >= 1.0) {
        return Err(Error::Quadrature("refinement_exponent must be ≥ 1".into()));
    }
    if options.points_per_panel == 0 || options.angular_points == 0 {
        return Err(Error::Quadrature("points per panel and angular points must be positive".into()));
    }
    let two_sided = inner > 0.0;
    let p = options.refinement_exponent;
    let (gx, gw) = gauss_legendre(options.points_per_panel);

    // Panel breakpoints in t; two-sided grading keeps t = 1/2 as a breakpoint.
    let breaks: Vec<f64> = if two_sided {
        let left = options.radial_panels / 2;
        let right = options.radial_panels - left;
        let mut b: Vec<f64> = (0..=left).map(|k| 0.5 * k as f64 / left as f64).collect();
        b.extend((1..=right).map(|k| 0.5 + 0.5 * k as f64 / right as f64));
        b
    } else {
        (0..=options.radial_panels).map(|k| k as f64 / options.radial_panels as f64).collect()
    };

    let width = outer - inner;
    let mut radii = Vec::new();
    let mut weights = Vec::new();
    for pair in breaks.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        let half = 0.5 * (t1 - t0);
        for (x, w) in gx.iter().zip(&gw) {
            let t = t0 + half * (x + 1.0);
            let (g, dg) = graded(t, p, two_sided);
            let r = inner + width * g;
            let weight = w * half * width * dg;
            if r > inner && r < outer && weight > 0.0 {
                radii.push(r);
                weights.push(weight);
            }
        }
    }

    let n_theta = options.angular_points;
    let mut nodes = NodeSet::new(1);
    let mut node_weights = Vec::with_capacity(radii.len() * n_theta);
    for (r, w) in radii.iter().zip(&weights) {
        for j in 0..n_theta {
            let theta = 2.0 * PI * j as f64 / n_theta as f64;
            nodes.push(&[Complex64::from_polar(*r, theta)])?;
            node_weights.push(2.0 * PI * w * r / n_theta as f64);
        }
    }
    let assembly_nodes = NodeSet::from_points_1d(radii.iter().map(|r| Complex64::new(*r, 0.0)));
    let assembly_weights: Vec<f64> = radii.iter().zip(&weights).map(|(r, w)| 2.0 * PI * w * r).collect();
    Ok(QuadratureGrid {
        scheme: GridScheme::RadialProduct,
        nodes,
        weights: node_weights,
        panel_counts: vec![options.radial_panels, options.points_per_panel, n_theta],
        refinement_exponent: p,
        radial: Some(RadialRule { radii, weights }),
        angular_points: n_theta,
        stated_tolerance: 1e-12,
        assembly_nodes,
        assembly_weights,
    })
}

pub fn build_tensor_grid(domain: &Domain, panels_per_axis: usize) -> Result<QuadratureGrid> {
    build_tensor_grid_with(domain, panels_per_axis, 2)
}

/// Tensor Gauss-Legendre rule on the bounding box, keeping nodes with `φ < 0`.
/// The cut at the boundary makes the error first order in the cell width.
pub fn build_tensor_grid_with(domain: &Domain, panels_per_axis: usize, points_per_panel: usize) -> Result<QuadratureGrid> {
    if panels_per_axis == 0 || points_per_panel == 0 {
        return Err(Error::Quadrature("panels_per_axis and points_per_panel must be positive".into()));
    }
    let bbox = domain.bounding_box();
    let (gx, gw) = gauss_legendre(points_per_panel);
    let axis_rules: Vec<(Vec<f64>, Vec<f64>)> = bbox
        .iter()
        .map(|(lo, hi)| {
            let h = (hi - lo) / panels_per_axis as f64;
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            for k in 0..panels_per_axis {
                let a = lo + h * k as f64;
                for (x, w) in gx.iter().zip(&gw) {
                    xs.push(a + 0.5 * h * (x + 1.0));
                    ws.push(0.5 * h * w);
                }
            }
            (xs, ws)
        })
        .collect();
    let per_axis = panels_per_axis * points_per_panel;
    let axes = bbox.len();
    let mut nodes = NodeSet::new(domain.dim());
    let mut weights = Vec::new();
    let mut idx = vec![0usize; axes];
    let mut coords = vec![0.0; axes];
    let total = per_axis.pow(axes as u32);
    for _ in 0..total {
        let mut w = 1.0;
        for (a, &k) in idx.iter().enumerate() {
            coords[a] = axis_rules[a].0[k];
            w *= axis_rules[a].1[k];
        }
        let z: Vec<Complex64> = coords.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        if domain.contains(&z) {
            nodes.push(&z)?;
            weights.push(w);
        }
        for k in idx.iter_mut() {
            *k += 1;
            if *k < per_axis {
                break;
            }
            *k = 0;
        }
    }
    if nodes.is_empty() {
        return Err(Error::Quadrature(format!(
            "no tensor nodes inside `{}`: bounding box misses the domain",
            domain.name()
        )));
    }
    let h_max = bbox.iter().map(|(lo, hi)| (hi - lo) / panels_per_axis as f64).fold(0.0, f64::max);
    let extent_min = bbox.iter().map(|(lo, hi)| hi - lo).fold(f64::INFINITY, f64::min);
    Ok(QuadratureGrid {
        scheme: GridScheme::TensorCartesian,
        assembly_nodes: nodes.clone(),
        assembly_weights: weights.clone(),
        nodes,
        weights,
        panel_counts: vec![panels_per_axis; axes],
        refinement_exponent: 1.0,
        radial: None,
        angular_points: 0,
        stated_tolerance: h_max / extent_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_annulus, make_ball, make_disc, make_superellipse, sublevel, Domain};
    use std::sync::Arc;

    fn disc_identity(m: i32, rho: f64) -> f64 {
        2.0 * PI / (m as f64 + 1.0) * (1.0 - (1.0 - 0.5 * rho * rho).powi(m + 1))
    }

    #[test]
    fn disc_area_is_exact() {
        let g = build_radial_grid(&make_disc(1.0).unwrap(), 16, 3.0).unwrap();
        assert!(((g.total_weight() - PI) / PI).abs() < 1e-12);
        let rule = g.radial.as_ref().unwrap();
        assert!(((rule.integrate(|_| 1.0) - PI) / PI).abs() < 1e-12);
        assert!(g.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn truncated_disc_identity_exactness() {
        for rho in [0.5, 0.9, 1.0] {
            let g = build_radial_grid(&make_disc(rho).unwrap(), 32, 3.0).unwrap();
            let rule = g.radial.as_ref().unwrap();
            for m in 0..=200 {
                let q = rule.integrate(|r| (1.0 - 0.5 * r * r).powi(m));
                let exact = disc_identity(m, rho);
                assert!(((q - exact) / exact).abs() < 1e-10, "rho {rho} m {m}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn beta_integral() {
        // ∫_D (1 − |z|²)^3 dA = π/4
        let g = build_radial_grid(&make_disc(1.0).unwrap(), 16, 3.0).unwrap();
        let q = g.radial.as_ref().unwrap().integrate(|r| (1.0 - r * r).powi(3));
        assert!((q - PI / 4.0).abs() < 1e-13);
    }

    #[test]
    fn sublevel_disc_grid_matches_identity() {
        let d = sublevel(&make_disc(1.0).unwrap(), 0.81 - 1.0).unwrap();
        let g = build_radial_grid(d.domain(), 32, 3.0).unwrap();
        let q = g.radial.as_ref().unwrap().integrate(|r| (1.0 - 0.5 * r * r).powi(20));
        let exact = disc_identity(20, 0.9);
        assert!(((q - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn annulus_grid_area_and_moments() {
        let g = build_radial_grid(&make_annulus(0.5, 1.0).unwrap(), 16, 3.0).unwrap();
        let area = PI * (1.0 - 0.25);
        assert!(((g.total_weight() - area) / area).abs() < 1e-12);
        // log-radial moment ∫ |z|^{-2} dA = 2π log 2
        let q = g.radial.as_ref().unwrap().integrate(|r| r.powi(-2));
        assert!((q - 2.0 * PI * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn off_diagonal_moments_vanish() {
        let g = build_radial_grid(&make_disc(1.0).unwrap(), 16, 3.0).unwrap();
        for a in 0..6u32 {
            for b in 0..6u32 {
                let v = g.integrate_complex(|p| p[0].powu(a) * p[0].conj().powu(b));
                if a != b {
                    assert!(v.norm() < 1e-12, "({a},{b}) -> {v}");
                } else {
                    assert!((v.re - PI / (a as f64 + 1.0)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn radial_grid_rejects_bad_input() {
        assert!(build_radial_grid(&make_disc(1.0).unwrap(), 3, 3.0).is_err());
        assert!(build_radial_grid(&make_ball(2, 1.0).unwrap(), 8, 3.0).is_err());
        assert!(build_radial_grid(&make_superellipse(4).unwrap(), 8, 3.0).is_err());
    }

    #[test]
    fn tensor_grid_disc_area() {
        let g = build_tensor_grid(&make_disc(1.0).unwrap(), 200).unwrap();
        assert!((g.total_weight() - PI).abs() < 1e-3);
        assert!(g.weights.iter().all(|w| *w > 0.0));
        assert!(g.nodes.iter().all(|p| p[0].norm() < 1.0));
    }

    #[test]
    fn tensor_grid_superellipse_self_refinement() {
        let d = make_superellipse(8).unwrap();
        let coarse = build_tensor_grid(&d, 100).unwrap().total_weight();
        let fine = build_tensor_grid(&d, 1000).unwrap().total_weight();
        assert!((coarse - fine).abs() < 1e-3, "{coarse} vs {fine}");
        // closed form area 4Γ(1+1/p)²/Γ(1+2/p)
        let p = 8.0;
        let exact = 4.0 * (2.0 * libm::lgamma(1.0 + 1.0 / p) - libm::lgamma(1.0 + 2.0 / p)).exp();
        assert!((fine - exact).abs() < 1e-4);
    }

    #[test]
    fn tensor_grid_ball_volume() {
        let g = build_tensor_grid(&make_ball(2, 1.0).unwrap(), 16).unwrap();
        let exact = PI * PI / 2.0;
        assert!(((g.total_weight() - exact) / exact).abs() < 5e-2);
    }

    #[test]
    fn empty_tensor_grid_is_an_error() {
        let far = Domain::custom(
            "offset disc",
            Arc::new(crate::domain::FnPhi::new(1, |z| {
                let w = z[0] - Complex64::new(10.0, 0.0);
                crate::domain::Jet {
                    value: w.norm_sqr() - 1.0,
                    gradient: vec![w.conj()],
                    hessian: nalgebra::DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
                }
            })),
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            Symmetry::None,
        )
        .unwrap();
        assert!(build_tensor_grid(&far, 20).is_err());
    }

    #[test]
    fn csv_round_shape() {
        let g = build_radial_grid_with(
            &make_disc(1.0).unwrap(),
            &RadialGridOptions { radial_panels: 4, points_per_panel: 2, angular_points: 4, ..Default::default() },
        )
        .unwrap();
        let csv = g.to_csv();
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "node_re,node_im,weight");
        assert_eq!(rows.len(), 1 + 4 * 2 * 4);
    }
}
