//! Leading boundary behaviour of the Bergman kernel,
//! `K = |r|^{−n−1}(c_n + o(1))` with `c_n = n!/πⁿ` for a defining function
//! normalized by the Monge–Ampère determinant `J[r] = 1`.
//!
//! Sign convention: the determinant is taken of `ρ = −scale·φ`, positive
//! inside; stored `r_values` are `scale·φ`, negative inside, and the fit uses
//! `|r|`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Jet};
use crate::engine::{kernel_diagonal, GramSystem};
use crate::error::{Error, Result};
use crate::nodes::{LogDensityField, NodeSet};
use crate::numerics::{linear_fit, ln_factorial};

/// `J[ρ] = (−1)ⁿ det [[ρ, ρ_{j̄}], [ρ_i, ρ_{ij̄}]]`.
pub fn j_functional(jet: &Jet) -> f64 {
    let n = jet.gradient.len();
    let bordered = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => Complex64::new(jet.value, 0.0),
        (0, j) => jet.gradient[j - 1].conj(),
        (i, 0) => jet.gradient[i - 1],
        (i, j) => jet.hessian[(i - 1, j - 1)],
    });
    let det = bordered.determinant().re;
    if n % 2 == 0 {
        det
    } else {
        -det
    }
}

/// Jet of `ρ = −scale·φ` at `z`.
pub fn defining_jet(domain: &Domain, z: &[Complex64], scale: f64) -> Jet {
    domain.jet(z).affine(0.0, -scale)
}

/// `c_n = n!/πⁿ`.
pub fn fefferman_constant(dim: usize) -> f64 {
    (ln_factorial(dim as u32) - dim as f64 * std::f64::consts::PI.ln()).exp()
}

/// Points `t·b` for `t` uniform in `[start, end]`, `b` on the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryPath {
    pub boundary_point: Vec<[f64; 2]>,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl BoundaryPath {
    /// Path along the positive real axis of the first coordinate.
    pub fn radial(dim: usize, boundary_radius: f64, start: f64, end: f64, points: usize) -> Self {
        let mut b = vec![[0.0, 0.0]; dim];
        b[0] = [boundary_radius, 0.0];
        Self { boundary_point: b, start, end, points }
    }

    pub fn boundary(&self) -> Vec<Complex64> {
        self.boundary_point.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub fn nodes(&self) -> Result<NodeSet> {
        if self.points < 2 || !(self.start < self.end) || self.start < 0.0 || self.end >= 1.0 {
            return Err(Error::InvalidField(format!(
                "path needs ≥ 2 points and 0 ≤ start < end < 1 (got {} points on [{}, {}])",
                self.points, self.start, self.end
            )));
        }
        let b = self.boundary();
        let mut set = NodeSet::new(b.len());
        for i in 0..self.points {
            let t = self.start + (self.end - self.start) * i as f64 / (self.points - 1) as f64;
            let p: Vec<Complex64> = b.iter().map(|c| c * t).collect();
            set.push(&p)?;
        }
        Ok(set)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeffermanFit {
    pub path: NodeSet,
    /// `log K` in the Lebesgue convention, sorted by increasing `r`
    pub kernel_values: Vec<f64>,
    pub r_values: Vec<f64>,
    /// `ĉ` with the exponent held at `−(n+1)`
    pub fitted_coefficient: f64,
    /// slope of the free fit of `log K` against `log|r|`
    pub fitted_exponent: f64,
    /// intercept of the free fit, exponentiated
    pub free_coefficient: f64,
    /// `log K + (n+1)log|r| − log ĉ`
    pub residuals: Vec<f64>,
    pub scale: f64,
}

impl FeffermanFit {
    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    pub fn relative_error(&self, dim: usize) -> f64 {
        self.fitted_coefficient / fefferman_constant(dim) - 1.0
    }

    pub fn csv_header() -> &'static str {
        "boundary_point,c_hat,exponent,residual_norm,r_min,r_max"
    }

    pub fn csv_row(&self, boundary: &[Complex64]) -> String {
        let mut point = String::new();
        for (i, c) in boundary.iter().enumerate() {
            if i > 0 {
                point.push(' ');
            }
            let _ = write!(point, "{}{:+}i", c.re, c.im);
        }
        let r_min = self.r_values.first().copied().unwrap_or(f64::NAN);
        let r_max = self.r_values.last().copied().unwrap_or(f64::NAN);
        format!(
            "{point},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e}",
            self.fitted_coefficient,
            self.fitted_exponent,
            self.residual_norm(),
            r_min,
            r_max
        )
    }
}

/// Fits `log K = −(n+1)·log|r| + log ĉ` along a path.
///
/// `kernel` holds `log κ₁` in the Λ convention (as produced by the engine); it
/// is converted to the function convention `K = 2ⁿκ₁` first. The kernel must
/// increase strictly towards the boundary, otherwise the path is reported as
/// under-resolved.
pub fn fit_boundary_coefficient(domain: &Domain, kernel: &LogDensityField, scale: f64) -> Result<FeffermanFit> {
    if kernel.twist != 1 {
        return Err(Error::InvalidField(format!("boundary fit needs a twist-1 kernel, got twist {}", kernel.twist)));
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidField(format!("defining-function scale must be positive, got {scale}")));
    }
    let nodes = &kernel.nodes;
    domain.check_interior(nodes)?;
    let n = domain.dim();
    let lebesgue_shift = n as f64 * std::f64::consts::LN_2;

    let mut rows: Vec<(f64, f64, usize)> = nodes
        .iter()
        .enumerate()
        .map(|(i, p)| (scale * domain.value(p), kernel.log_values[i] + lebesgue_shift, i))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (k, w) in rows.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(Error::InvalidField(format!("path points {} and {} share a level of r", w[0].2, w[1].2)));
        }
        if !(w[1].1 > w[0].1) {
            return Err(Error::UnderResolvedPath { index: rows[k + 1].2 });
        }
    }
    let r_values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let kernel_values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let log_abs_r: Vec<f64> = r_values.iter().map(|r| r.abs().ln()).collect();
    let power = (n + 1) as f64;

    let shifted: Vec<f64> = kernel_values.iter().zip(&log_abs_r).map(|(k, r)| k + power * r).collect();
    let log_c = shifted.iter().sum::<f64>() / shifted.len() as f64;
    let residuals = shifted.iter().map(|s| s - log_c).collect();
    let (intercept, slope) = linear_fit(&log_abs_r, &kernel_values);

    Ok(FeffermanFit {
        path: nodes.subset(&rows.iter().map(|r| r.2).collect::<Vec<_>>()),
        kernel_values,
        r_values,
        fitted_coefficient: log_c.exp(),
        fitted_exponent: slope,
        free_coefficient: intercept.exp(),
        residuals,
        scale,
    })
}

/// Evaluates a Gram system along `path` and fits.
pub fn fit_from_gram(gram: &GramSystem, path: &BoundaryPath, scale: f64) -> Result<FeffermanFit> {
    let nodes = path.nodes()?;
    let kernel = kernel_diagonal(gram, &nodes)?;
    fit_boundary_coefficient(gram.domain(), &kernel, scale)
}

/// `max |J[ρ] − 1|` over points, for checking a normalization.
pub fn j_defect(domain: &Domain, points: &NodeSet, scale: f64) -> f64 {
    let pts: Vec<&[Complex64]> = points.iter().collect();
    pts.par_iter().map(|p| (j_functional(&defining_jet(domain, p, scale)) - 1.0).abs()).reduce(|| 0.0, f64::max)
}
