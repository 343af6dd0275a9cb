//! Diagonals of weighted Bergman kernels from finite monomial section bases.
//!
//! Sections of `mK_Ω` are written `f(z)·(dz₁∧…∧dz_n)^⊗m` and all densities are
//! coefficients against `Λ^⊗m`, `Λ = (√-1)^{n²} dz∧dz̄ = 2ⁿ·Lebesgue`. With
//! this convention the weighted inner product of two sections is
//! `∫ f ḡ · e^{−log κ} · Λ`, where `κ` is the previous density.
//!
//! Two assembly routes exist. On one-dimensional circular domains with a
//! radial grid the Gram matrix of monomials is diagonal and every entry is a
//! one-dimensional log-sum-exp, which keeps degrees in the thousands cheap
//! and overflow free. Elsewhere the full hermitian matrix is assembled,
//! Jacobi-scaled and Cholesky-factored, guarded by a condition limit.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::nodes::{LogDensityField, NodeSet};
use crate::numerics::log_sum_exp_iter;
use crate::quadrature::{GridScheme, QuadratureGrid};

/// Guard on the condition number of the Jacobi-scaled dense Gram matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Finite monomial basis `z^α (dz)^⊗m` of a weighted Bergman space.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionBasis {
    pub dim: usize,
    pub twist: u32,
    pub degree: u32,
    /// Multi-indices; negative entries (Laurent monomials) only in [`laurent_basis`].
    pub exponents: Vec<Vec<i32>>,
}

impl SectionBasis {
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn is_laurent(&self) -> bool {
        self.exponents.iter().flatten().any(|&a| a < 0)
    }

    /// `z^α` for every basis element.
    pub fn values(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.exponents
            .iter()
            .map(|alpha| alpha.iter().zip(z).map(|(&a, w)| w.powi(a)).product())
            .collect()
    }

    /// Single-variable exponents, for the diagonal fast path.
    fn exponents_1d(&self) -> Vec<i32> {
        self.exponents.iter().map(|a| a[0]).collect()
    }
}

/// All multi-indices `α ∈ ℕⁿ` with `|α| ≤ degree`, ordered by total degree.
pub fn monomial_basis(dim: usize, twist: u32, degree: u32) -> SectionBasis {
    let mut exponents = Vec::new();
    for total in 0..=degree as i32 {
        push_compositions(dim, total, &mut Vec::with_capacity(dim), &mut exponents);
    }
    SectionBasis { dim, twist, degree, exponents }
}

fn push_compositions(slots: usize, remaining: i32, prefix: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
    if slots == 1 {
        prefix.push(remaining);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=remaining).rev() {
        prefix.push(first);
        push_compositions(slots - 1, remaining - first, prefix, out);
        prefix.pop();
    }
}

/// Laurent monomials `z^k`, `−degree ≤ k ≤ degree`, for planar domains that
/// omit the origin (annuli), where polynomials are not dense in `A²`.
pub fn laurent_basis(twist: u32, degree: u32) -> SectionBasis {
    let d = degree as i32;
    SectionBasis { dim: 1, twist, degree, exponents: (-d..=d).map(|k| vec![k]).collect() }
}

#[derive(Clone, Debug)]
enum Factor {
    /// `G = diag(exp(log_diag))`
    Diagonal { log_diag: Vec<f64> },
    /// `G = e^{log_scale} · S M S`, `S = diag(e^{col_log_scale})`, `M = L L*`
    Dense {
        scaled: DMatrix<Complex64>,
        cholesky: DMatrix<Complex64>,
        col_log_scale: Vec<f64>,
        log_scale: f64,
    },
}

/// Weighted Gram matrix of a section basis together with its factorization.
#[derive(Clone, Debug)]
pub struct GramSystem {
    pub basis: SectionBasis,
    domain: Domain,
    factor: Factor,
    /// `log₁₀` of the condition estimate: of the Jacobi-scaled matrix on the
    /// dense path, of the raw diagonal on the circular path.
    pub log10_condition: f64,
}

impl GramSystem {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.factor, Factor::Diagonal { .. })
    }

    pub fn condition_estimate(&self) -> f64 {
        10f64.powf(self.log10_condition)
    }

    /// `log G_αα` for every basis element.
    pub fn log_diagonal(&self) -> Vec<f64> {
        match &self.factor {
            Factor::Diagonal { log_diag } => log_diag.clone(),
            Factor::Dense { scaled, col_log_scale, log_scale, .. } => col_log_scale
                .iter()
                .enumerate()
                .map(|(a, s)| log_scale + 2.0 * s + scaled[(a, a)].re.ln())
                .collect(),
        }
    }

    /// The assembled matrix `G_αβ = ∫ z^α z̄^β e^{−log κ} Λ` in linear scale.
    /// Overflows for strongly weighted late iterates; meant for inspection.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        match &self.factor {
            Factor::Diagonal { log_diag } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    log_diag.len(),
                    log_diag.iter().map(|l| Complex64::new(l.exp(), 0.0)),
                ))
            }
            Factor::Dense { scaled, col_log_scale, log_scale, .. } => {
                let n = scaled.nrows();
                DMatrix::from_fn(n, n, |a, b| {
                    scaled[(a, b)] * (log_scale + col_log_scale[a] + col_log_scale[b]).exp()
                })
            }
        }
    }

    /// `L·L*` rebuilt from the stored factor, in the same scale as [`Self::matrix`].
    pub fn reconstructed(&self) -> DMatrix<Complex64> {
        match &self.factor {
            Factor::Diagonal { .. } => self.matrix(),
            Factor::Dense { cholesky, col_log_scale, log_scale, .. } => {
                let m = cholesky * cholesky.adjoint();
                let n = m.nrows();
                DMatrix::from_fn(n, n, |a, b| m[(a, b)] * (log_scale + col_log_scale[a] + col_log_scale[b]).exp())
            }
        }
    }

    /// Diagonal of the triangular factor (all entries positive).
    pub fn factor_diagonal(&self) -> Vec<f64> {
        match &self.factor {
            Factor::Diagonal { log_diag } => log_diag.iter().map(|l| (0.5 * l).exp()).collect(),
            Factor::Dense { cholesky, .. } => (0..cholesky.nrows()).map(|i| cholesky[(i, i)].re).collect(),
        }
    }

    /// Whitened basis values `y` and a log factor with `κ(z) = e^{log_factor}·‖y‖²`.
    ///
    /// A section with coefficients `g` in the same whitened coordinates has
    /// Gram norm `‖g‖_M` and value `|⟨g, ṽ⟩|` up to the same factor, see
    /// [`section_ratio`].
    fn scaled_values(&self, z: &[Complex64]) -> (Vec<Complex64>, f64) {
        match &self.factor {
            Factor::Diagonal { log_diag } => {
                let r = z[0].norm();
                let ln_r = r.ln();
                let theta = z[0].arg();
                let exps = self.basis.exponents_1d();
                let logs: Vec<f64> = exps
                    .iter()
                    .zip(log_diag)
                    .map(|(&k, ld)| if k == 0 { -0.5 * ld } else { k as f64 * ln_r - 0.5 * ld })
                    .collect();
                let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let v = exps
                    .iter()
                    .zip(&logs)
                    .map(|(&k, l)| Complex64::from_polar((l - shift).exp(), k as f64 * theta))
                    .collect();
                (v, 2.0 * shift)
            }
            Factor::Dense { col_log_scale, log_scale, .. } => {
                let b = self.basis.values(z);
                let v = b.iter().zip(col_log_scale).map(|(x, s)| x * (-s).exp()).collect();
                (v, -log_scale)
            }
        }
    }

    /// `log κ(z)` at a single point, without the domain check.
    pub fn log_kernel_unchecked(&self, z: &[Complex64]) -> f64 {
        match &self.factor {
            Factor::Diagonal { log_diag } => {
                let ln_r = z[0].norm().ln();
                let exps = self.basis.exponents_1d();
                log_sum_exp_iter(exps.iter().zip(log_diag).map(|(&k, ld)| {
                    if k == 0 {
                        -ld
                    } else {
                        2.0 * k as f64 * ln_r - ld
                    }
                }))
            }
            Factor::Dense { cholesky, .. } => {
                let (v, log_factor) = self.scaled_values(z);
                let y = forward_substitute(cholesky, &v);
                let norm_sqr: f64 = y.iter().map(|c| c.norm_sqr()).sum();
                norm_sqr.ln() + log_factor
            }
        }
    }

    /// `log κ(z)` at a single interior point.
    pub fn log_kernel(&self, z: &[Complex64]) -> Result<f64> {
        if !self.domain.contains(z) {
            return Err(Error::PointOutsideDomain { domain: self.domain.name().to_string(), index: 0 });
        }
        let v = self.log_kernel_unchecked(z);
        if v == f64::NEG_INFINITY || v.is_nan() {
            return Err(Error::KernelUnderflow { index: 0 });
        }
        Ok(v)
    }
}

fn forward_substitute(lower: &DMatrix<Complex64>, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = rhs.len();
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = rhs[i];
        for j in 0..i {
            acc -= lower[(i, j)] * y[j];
        }
        y[i] = acc / lower[(i, i)];
    }
    y
}

fn same_nodes(a: &NodeSet, b: &NodeSet) -> bool {
    a.dim() == b.dim()
        && a.len() == b.len()
        && a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() <= 1e-14 * (1.0 + x.norm()))
}

/// Assembles the weighted Gram system. The weight is the previous density
/// (twist `m − 1`) on the grid's assembly nodes.
pub fn assemble_gram(basis: &SectionBasis, weight: &LogDensityField, grid: &QuadratureGrid, domain: &Domain) -> Result<GramSystem> {
    check_weight(basis, weight, grid, domain)?;
    if grid.scheme == GridScheme::RadialProduct && basis.dim == 1 {
        assemble_diagonal(basis, weight, grid, domain)
    } else {
        assemble_dense(basis, &grid.nodes, &grid.weights, &expand_weight(weight, grid), domain)
    }
}

/// Forces the dense route, also on radial grids (through the 2-d exposure).
/// Used to cross-check the circular fast path.
pub fn assemble_gram_dense(basis: &SectionBasis, weight: &LogDensityField, grid: &QuadratureGrid, domain: &Domain) -> Result<GramSystem> {
    check_weight(basis, weight, grid, domain)?;
    assemble_dense(basis, &grid.nodes, &grid.weights, &expand_weight(weight, grid), domain)
}

fn check_weight(basis: &SectionBasis, weight: &LogDensityField, grid: &QuadratureGrid, domain: &Domain) -> Result<()> {
    if weight.twist + 1 != basis.twist {
        return Err(Error::TwistMismatch { weight: weight.twist, basis: basis.twist });
    }
    if basis.dim != domain.dim() || grid.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: basis.dim });
    }
    if !same_nodes(&weight.nodes, grid.assembly_nodes()) {
        return Err(Error::NodeMismatch(format!(
            "{} weight nodes vs {} assembly nodes",
            weight.nodes.len(),
            grid.assembly_nodes().len()
        )));
    }
    if !weight.all_finite() {
        return Err(Error::InvalidField("weight has non-finite log values".into()));
    }
    Ok(())
}

/// Weight log-values on `grid.nodes` (radial values repeated around each ring).
fn expand_weight(weight: &LogDensityField, grid: &QuadratureGrid) -> Vec<f64> {
    match grid.scheme {
        GridScheme::RadialProduct => weight
            .log_values
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, grid.angular_points))
            .collect(),
        GridScheme::TensorCartesian => weight.log_values.clone(),
    }
}

fn assemble_diagonal(basis: &SectionBasis, weight: &LogDensityField, grid: &QuadratureGrid, domain: &Domain) -> Result<GramSystem> {
    let n_lambda = basis.dim as f64 * LN_2;
    let ln_r: Vec<f64> = grid.assembly_nodes().iter().map(|p| p[0].norm().ln()).collect();
    let base: Vec<f64> = grid
        .assembly_weights()
        .iter()
        .zip(&weight.log_values)
        .map(|(w, lk)| w.ln() + n_lambda - lk)
        .collect();
    let exps = basis.exponents_1d();
    let log_diag: Vec<f64> = exps
        .par_iter()
        .map(|&k| {
            let two_k = 2.0 * k as f64;
            log_sum_exp_iter(base.iter().zip(&ln_r).map(move |(b, lr)| b + two_k * lr))
        })
        .collect();
    if log_diag.iter().any(|l| !l.is_finite()) {
        return Err(Error::GramIndefinite { log10_condition: f64::INFINITY });
    }
    let max = log_diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = log_diag.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GramSystem {
        basis: basis.clone(),
        domain: domain.clone(),
        factor: Factor::Diagonal { log_diag },
        log10_condition: (max - min) / std::f64::consts::LN_10,
    })
}

fn assemble_dense(
    basis: &SectionBasis,
    nodes: &NodeSet,
    weights: &[f64],
    log_weight: &[f64],
    domain: &Domain,
) -> Result<GramSystem> {
    let n_lambda = basis.dim as f64 * LN_2;
    let lw: Vec<f64> = weights.iter().zip(log_weight).map(|(w, lk)| w.ln() + n_lambda - lk).collect();
    let shift = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let size = basis.len();
    // rows: √c_j · z_j^α
    let rows: Vec<Vec<Complex64>> = nodes
        .iter()
        .zip(&lw)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(p, l)| {
            let s = (0.5 * (*l - shift)).exp();
            basis.values(p).into_iter().map(|v| v * s).collect()
        })
        .collect();
    let mut raw = DMatrix::<Complex64>::zeros(size, size);
    let columns: Vec<Vec<Complex64>> = (0..size)
        .into_par_iter()
        .map(|a| {
            (a..size)
                .map(|b| rows.iter().map(|r| r[a] * r[b].conj()).sum::<Complex64>())
                .collect()
        })
        .collect();
    for (a, col) in columns.into_iter().enumerate() {
        for (offset, v) in col.into_iter().enumerate() {
            let b = a + offset;
            if a == b {
                raw[(a, a)] = Complex64::new(v.re, 0.0);
            } else {
                raw[(a, b)] = v;
                raw[(b, a)] = v.conj();
            }
        }
    }
    let col_log_scale: Vec<f64> = (0..size).map(|a| 0.5 * raw[(a, a)].re.ln()).collect();
    if col_log_scale.iter().any(|s| !s.is_finite()) {
        return Err(Error::GramIndefinite { log10_condition: f64::INFINITY });
    }
    let scaled = DMatrix::from_fn(size, size, |a, b| {
        if a == b {
            Complex64::new(1.0, 0.0)
        } else {
            raw[(a, b)] * (-col_log_scale[a] - col_log_scale[b]).exp()
        }
    });
    let log10_condition = condition_log10(&scaled);
    let cholesky = match scaled.clone().cholesky() {
        Some(c) => c.l(),
        None => return Err(Error::GramIndefinite { log10_condition }),
    };
    if log10_condition > CONDITION_LIMIT.log10() {
        return Err(Error::GramIllConditioned { log10_condition, limit_log10: CONDITION_LIMIT.log10() });
    }
    Ok(GramSystem {
        basis: basis.clone(),
        domain: domain.clone(),
        factor: Factor::Dense { scaled, cholesky, col_log_scale, log_scale: shift },
        log10_condition,
    })
}

fn condition_log10(m: &DMatrix<Complex64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).log10()
    }
}

/// `log κ(z) = log(b(z)* G⁻¹ b(z))` at each evaluation point. Points
/// outside the domain are rejected.
pub fn kernel_diagonal(gram: &GramSystem, eval_points: &NodeSet) -> Result<LogDensityField> {
    gram.domain.check_interior(eval_points)?;
    let points: Vec<&[Complex64]> = eval_points.iter().collect();
    let values: Vec<f64> = points.par_iter().map(|p| gram.log_kernel_unchecked(p)).collect();
    if let Some(index) = values.iter().position(|v| *v == f64::NEG_INFINITY || v.is_nan()) {
        return Err(Error::KernelUnderflow { index });
    }
    LogDensityField::new(gram.basis.twist, eval_points.clone(), values)
}

/// Classical weighted Bergman kernel of the unit disc for the measure
/// `scale·(1−|z|²)^s·dA`: `(1/scale)·((s+1)/π)·(1−|z|²)^{−(s+2)}`.
pub fn weighted_disc_kernel_closed_form(s: f64, z: Complex64, scale: f64) -> Result<f64> {
    if z.norm() >= 1.0 {
        return Err(Error::PointOutsideDomain { domain: "unit disc".into(), index: 0 });
    }
    if !(s >= 0.0 && scale > 0.0) {
        return Err(Error::InvalidDomain(format!("need s ≥ 0 and scale > 0, got s={s}, scale={scale}")));
    }
    Ok((s + 1.0) / (std::f64::consts::PI * scale) * (1.0 - z.norm_sqr()).powf(-(s + 2.0)))
}

/// `|σ(z)|² / (‖σ‖²·κ(z))` for a section whose coefficients `g` are given in
/// the Gram-whitened monomial coordinates (`σ = Σ ḡ_α e^{−s_α} z^α` up to a
/// global scale, `‖σ‖² = g* M g`).
pub fn section_ratio(gram: &GramSystem, z: &[Complex64], log_kappa: f64, coefficients: &[Complex64]) -> Result<f64> {
    if coefficients.len() != gram.basis.len() {
        return Err(Error::DimensionMismatch { expected: gram.basis.len(), got: coefficients.len() });
    }
    let norm_sqr = match &gram.factor {
        Factor::Diagonal { .. } => coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>(),
        Factor::Dense { scaled, .. } => {
            let g = nalgebra::DVector::from_column_slice(coefficients);
            (g.adjoint() * scaled * &g)[(0, 0)].re
        }
    };
    if !(norm_sqr > 0.0) {
        return Err(Error::ZeroSection);
    }
    let (v, log_factor) = gram.scaled_values(z);
    let value: Complex64 = coefficients.iter().zip(&v).map(|(g, x)| g.conj() * x).sum();
    Ok((value.norm_sqr().ln() + log_factor - norm_sqr.ln() - log_kappa).exp())
}

#[derive(Clone, Debug)]
pub struct ExtremalReport {
    pub max_ratio: f64,
    /// ratio attained by the Gram-optimal section `M⁻¹ṽ(z)`
    pub extremal_ratio: f64,
    pub trials: usize,
}

/// Checks the extremal property `|σ(z)|² ≤ κ(z)·‖σ‖²` on random sections and
/// the equality case at one of the kernel's evaluation nodes.
pub fn extremal_check(kernel: &LogDensityField, gram: &GramSystem, point_index: usize, trials: usize, seed: u64) -> Result<ExtremalReport> {
    if point_index >= kernel.len() {
        return Err(Error::InvalidField(format!("point index {point_index} out of range")));
    }
    let z = kernel.nodes.point(point_index);
    let log_kappa = kernel.log_values[point_index];
    let mut rng = StdRng::seed_from_u64(seed);
    let size = gram.basis.len();
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let g: Vec<Complex64> = (0..size)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        max_ratio = max_ratio.max(section_ratio(gram, z, log_kappa, &g)?);
    }
    let (v, _) = gram.scaled_values(z);
    let optimal: Vec<Complex64> = match &gram.factor {
        Factor::Diagonal { .. } => v,
        Factor::Dense { scaled, .. } => {
            let rhs = nalgebra::DVector::from_column_slice(&v);
            let sol = scaled.clone().cholesky().expect("factored at assembly").solve(&rhs);
            sol.iter().copied().collect()
        }
    };
    let extremal_ratio = section_ratio(gram, z, log_kappa, &optimal)?;
    Ok(ExtremalReport { max_ratio, extremal_ratio, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_ball, make_disc, make_superellipse};
    use crate::numerics::ln_gamma;
    use crate::quadrature::{build_radial_grid, build_tensor_grid};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_weight(grid: &QuadratureGrid) -> LogDensityField {
        LogDensityField::unit(grid.assembly_nodes().clone())
    }

    /// weight `(1−|z|²)^s` stored as the log-density `−s·log(1−|z|²)`
    fn power_weight(grid: &QuadratureGrid, s: f64, twist: u32) -> LogDensityField {
        let nodes = grid.assembly_nodes().clone();
        let values = nodes.iter().map(|p| -s * (1.0 - p[0].norm_sqr()).ln()).collect();
        LogDensityField::new(twist, nodes, values).unwrap()
    }

    /// Oracle: `G_kk = 2·2π ∫₀¹ r^{2k+1}(1−r²)^s dr = 2π·B(k+1, s+1)` in the Λ convention.
    fn beta_gram_log(k: u32, s: f64) -> f64 {
        (2.0 * PI).ln() + ln_gamma(k as f64 + 1.0) + ln_gamma(s + 1.0) - ln_gamma(k as f64 + s + 2.0)
    }

    #[test]
    fn basis_counts() {
        let b = monomial_basis(1, 1, 3);
        assert_eq!(b.exponents, vec![vec![0], vec![1], vec![2], vec![3]]);
        let b = monomial_basis(2, 1, 1);
        assert_eq!(b.exponents, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
        assert_eq!(monomial_basis(2, 1, 2).len(), 6);
        assert_eq!(monomial_basis(2, 1, 10).len(), 66);
        assert_eq!(laurent_basis(1, 3).len(), 7);
        assert!(laurent_basis(1, 3).is_laurent());
    }

    #[test]
    fn unit_weight_gram_on_disc() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 16, 3.0).unwrap();
        let gram = assemble_gram(&monomial_basis(1, 1, 3), &unit_weight(&grid), &grid, &d).unwrap();
        assert!(gram.is_diagonal());
        for (k, l) in gram.log_diagonal().iter().enumerate() {
            let expected = 2.0 * PI / (k as f64 + 1.0);
            assert!((l.exp() - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn weighted_gram_matches_beta_oracle() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 32, 3.0).unwrap();
        let gram = assemble_gram(&monomial_basis(1, 2, 40), &power_weight(&grid, 2.0, 1), &grid, &d).unwrap();
        for (k, l) in gram.log_diagonal().iter().enumerate() {
            assert!((l - beta_gram_log(k as u32, 2.0)).abs() < 1e-11, "k={k}");
        }
    }

    #[test]
    fn dense_route_agrees_with_diagonal_route() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 16, 3.0).unwrap();
        let basis = monomial_basis(1, 2, 12);
        let w = power_weight(&grid, 2.0, 1);
        let fast = assemble_gram(&basis, &w, &grid, &d).unwrap();
        let dense = assemble_gram_dense(&basis, &w, &grid, &d).unwrap();
        assert!(!dense.is_diagonal());
        let g = dense.matrix();
        for a in 0..basis.len() {
            for b in 0..basis.len() {
                assert!((g[(a, b)] - g[(b, a)].conj()).norm() <= 1e-14 * g[(a, b)].norm());
            }
        }
        let pts = NodeSet::from_points_1d([c(0.0, 0.0), c(0.3, 0.4), c(-0.7, 0.1)]);
        let kf = kernel_diagonal(&fast, &pts).unwrap();
        let kd = kernel_diagonal(&dense, &pts).unwrap();
        for (a, b) in kf.log_values.iter().zip(&kd.log_values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_at_origin_and_half() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 32, 3.0).unwrap();
        for degree in [0, 5, 60] {
            let gram = assemble_gram(&monomial_basis(1, 1, degree), &unit_weight(&grid), &grid, &d).unwrap();
            let k0 = gram.log_kernel(&[c(0.0, 0.0)]).unwrap().exp();
            assert!((k0 - 1.0 / (2.0 * PI)).abs() < 1e-10);
        }
        let gram = assemble_gram(&monomial_basis(1, 1, 60), &unit_weight(&grid), &grid, &d).unwrap();
        let k = gram.log_kernel(&[c(0.5, 0.0)]).unwrap().exp();
        let exact = 1.0 / (2.0 * PI * 0.75 * 0.75);
        assert!(((k - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn truncation_is_monotone() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 16, 3.0).unwrap();
        let pts = NodeSet::from_points_1d((0..20).map(|k| Complex64::from_polar(0.049 * k as f64, 0.3 * k as f64)));
        let mut prev: Option<Vec<f64>> = None;
        for degree in 0..30 {
            let gram = assemble_gram(&monomial_basis(1, 1, degree), &unit_weight(&grid), &grid, &d).unwrap();
            let k = kernel_diagonal(&gram, &pts).unwrap().log_values;
            if let Some(p) = prev {
                assert!(p.iter().zip(&k).all(|(a, b)| *a <= *b + 1e-15));
            }
            prev = Some(k);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert!((weighted_disc_kernel_closed_form(0.0, c(0.0, 0.0), 1.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((weighted_disc_kernel_closed_form(2.0, c(0.0, 0.0), 1.0).unwrap() - 3.0 / PI).abs() < 1e-15);
        let v = weighted_disc_kernel_closed_form(2.0, c(0.5, 0.0), 4.0 * PI).unwrap();
        let expected = 3.0 / (4.0 * PI * PI) * 0.75f64.powi(-4);
        assert!(((v - expected) / expected).abs() < 1e-14);
        assert!(weighted_disc_kernel_closed_form(0.0, c(1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn outside_points_rejected() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 8, 3.0).unwrap();
        let gram = assemble_gram(&monomial_basis(1, 1, 4), &unit_weight(&grid), &grid, &d).unwrap();
        assert!(matches!(
            kernel_diagonal(&gram, &NodeSet::from_points_1d([c(1.2, 0.0)])),
            Err(Error::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn twist_and_node_mismatch_rejected() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 8, 3.0).unwrap();
        let w = unit_weight(&grid);
        assert!(matches!(
            assemble_gram(&monomial_basis(1, 2, 4), &w, &grid, &d),
            Err(Error::TwistMismatch { .. })
        ));
        let other = build_radial_grid(&d, 12, 3.0).unwrap();
        assert!(matches!(
            assemble_gram(&monomial_basis(1, 1, 4), &w, &other, &d),
            Err(Error::NodeMismatch(_))
        ));
    }

    #[test]
    fn extremal_property_fast_and_dense() {
        let d = make_disc(1.0).unwrap();
        let grid = build_radial_grid(&d, 16, 3.0).unwrap();
        let w = power_weight(&grid, 4.0, 1);
        let basis = monomial_basis(1, 2, 20);
        for gram in [assemble_gram(&basis, &w, &grid, &d).unwrap(), assemble_gram_dense(&basis, &w, &grid, &d).unwrap()] {
            let pts = NodeSet::from_points_1d([c(0.1, 0.2), c(0.6, -0.3)]);
            let kernel = kernel_diagonal(&gram, &pts).unwrap();
            for i in 0..pts.len() {
                let report = extremal_check(&kernel, &gram, i, 300, 42).unwrap();
                assert!(report.max_ratio <= 1.0 + 1e-8);
                assert!(report.max_ratio > 0.0);
                assert!((report.extremal_ratio - 1.0).abs() < 1e-8);
            }
            let zero = vec![Complex64::new(0.0, 0.0); basis.len()];
            assert!(matches!(section_ratio(&gram, pts.point(0), kernel.log_values[0], &zero), Err(Error::ZeroSection)));
        }
    }

    #[test]
    fn dense_gram_on_ball_and_superellipse() {
        let ball = make_ball(2, 1.0).unwrap();
        let grid = build_tensor_grid(&ball, 10).unwrap();
        let gram = assemble_gram(&monomial_basis(2, 1, 3), &unit_weight(&grid), &grid, &ball).unwrap();
        // unweighted ball kernel at the origin: 1/(Λ-volume) = 1/(4·π²/2)
        let k0 = gram.log_kernel(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap().exp();
        let exact = 1.0 / (4.0 * PI * PI / 2.0);
        assert!(((k0 - exact) / exact).abs() < 0.05);
        let recon = gram.reconstructed();
        let g = gram.matrix();
        let scale = g.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!((recon - &g).iter().all(|x| x.norm() < 1e-10 * scale));
        assert!(gram.factor_diagonal().iter().all(|x| *x > 0.0));

        let sq = make_superellipse(8).unwrap();
        let grid = build_tensor_grid(&sq, 60).unwrap();
        let gram = assemble_gram(&monomial_basis(1, 1, 8), &unit_weight(&grid), &grid, &sq).unwrap();
        assert!(gram.log10_condition < 12.0);
    }

    #[test]
    fn condition_guard_trips_when_nodes_cannot_resolve_basis() {
        // fewer quadrature nodes than basis elements: the Gram matrix is singular
        let sq = make_superellipse(8).unwrap();
        let grid = build_tensor_grid(&sq, 4).unwrap();
        assert!(grid.nodes.len() < 100);
        let r = assemble_gram(&monomial_basis(1, 1, 99), &unit_weight(&grid), &grid, &sq);
        assert!(matches!(r, Err(Error::GramIllConditioned { .. }) | Err(Error::GramIndefinite { .. })));
    }
}
