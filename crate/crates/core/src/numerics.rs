//! Small numerical helpers shared by the compute modules: log-domain sums,
//! Gauss-Legendre rules, log-factorials and finite-difference complex Hessians.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// `log(Σ exp(x_i))` with the maximum factored out. Returns `-inf` for an
/// empty slice or when every term is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Streaming variant of [`log_sum_exp`] over an iterator that can be replayed.
pub fn log_sum_exp_iter<I>(values: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(m!)` through the log-gamma function.
pub fn ln_factorial(m: u32) -> f64 {
    libm::lgamma(m as f64 + 1.0)
}

/// `log Γ(x)` for positive `x`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Smallest eigenvalue of a hermitian matrix.
pub fn min_hermitian_eigenvalue(matrix: &DMatrix<Complex64>) -> f64 {
    match matrix.nrows() {
        0 => f64::NAN,
        1 => matrix[(0, 0)].re,
        2 => {
            let a = matrix[(0, 0)].re;
            let d = matrix[(1, 1)].re;
            let b = matrix[(0, 1)];
            let half = 0.5 * (a - d);
            0.5 * (a + d) - (half * half + b.norm_sqr()).sqrt()
        }
        _ => SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
    }
}

/// Determinant of a small hermitian matrix (real part).
pub fn hermitian_det(matrix: &DMatrix<Complex64>) -> f64 {
    match matrix.nrows() {
        1 => matrix[(0, 0)].re,
        2 => (matrix[(0, 0)] * matrix[(1, 1)] - matrix[(0, 1)] * matrix[(1, 0)]).re,
        _ => matrix.clone().determinant().re,
    }
}

/// Second directional derivative `d²/dt² f(p + t v)` at `t = 0` by the
/// five-point fourth-order stencil.
pub fn directional_second_derivative<F>(f: &F, point: &[Complex64], direction: &[Complex64], h: f64) -> f64
where
    F: Fn(&[Complex64]) -> f64,
{
    let shifted = |t: f64| -> f64 {
        let p: Vec<Complex64> = point
            .iter()
            .zip(direction)
            .map(|(p, v)| p + v * t)
            .collect();
        f(&p)
    };
    let f0 = f(point);
    let fp1 = shifted(h);
    let fm1 = shifted(-h);
    let fp2 = shifted(2.0 * h);
    let fm2 = shifted(-2.0 * h);
    (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)
}

/// Finite-difference complex Hessian `∂²f/∂z_i∂z̄_j` of a real function on `Cⁿ`.
///
/// Uses the Levi-form identity `L(v) = (D²_v f + D²_{iv} f)/4` with
/// polarization for the off-diagonal entries, so the result is hermitian by
/// construction. Truncation error is `O(h⁴)`.
pub fn fd_complex_hessian<F>(f: &F, point: &[Complex64], h: f64) -> DMatrix<Complex64>
where
    F: Fn(&[Complex64]) -> f64,
{
    let n = point.len();
    let i = Complex64::i();
    let levi = |v: &[Complex64]| -> f64 {
        let iv: Vec<Complex64> = v.iter().map(|x| x * i).collect();
        0.25 * (directional_second_derivative(f, point, v, h)
            + directional_second_derivative(f, point, &iv, h))
    };
    let unit = |k: usize| -> Vec<Complex64> {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[k] = Complex64::new(1.0, 0.0);
        e
    };
    let mut hess = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        hess[(a, a)] = Complex64::new(levi(&unit(a)), 0.0);
        for b in (a + 1)..n {
            let combo = |c: Complex64| -> Vec<Complex64> {
                let mut v = unit(a);
                v[b] = c;
                v
            };
            let one = Complex64::new(1.0, 0.0);
            let re = (levi(&combo(one)) - levi(&combo(-one))) / 4.0;
            let im = (levi(&combo(i)) - levi(&combo(-i))) / 4.0;
            // L(e_a + c e_b) = H_aa + |c|² H_bb + 2 Re(conj(c) H_ab)
            hess[(a, b)] = Complex64::new(re, im);
            hess[(b, a)] = Complex64::new(re, -im);
        }
    }
    hess
}

/// Fourth-order central-difference Wirtinger gradient `∂f/∂z_i = (f_x - i f_y)/2`.
pub fn fd_wirtinger_gradient<F>(f: &F, point: &[Complex64], h: f64) -> Vec<Complex64>
where
    F: Fn(&[Complex64]) -> f64,
{
    let n = point.len();
    let partial = |k: usize, dir: Complex64| -> f64 {
        let at = |t: f64| {
            let mut p = point.to_vec();
            p[k] = point[k] + dir * t;
            f(&p)
        };
        (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
    };
    (0..n)
        .map(|k| {
            let fx = partial(k, Complex64::new(1.0, 0.0));
            let fy = partial(k, Complex64::new(0.0, 1.0));
            Complex64::new(0.5 * fx, -0.5 * fy)
        })
        .collect()
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let v = [0.1, -2.0, 3.5];
        let direct: f64 = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(&v), direct, epsilon = 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        // would overflow without the shift
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(order);
            for p in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                assert!((q - exact).abs() < 1e-13, "order {order} power {p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_relative_eq!(ln_factorial(0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), epsilon = 1e-13);
        assert!(ln_factorial(500).is_finite());
    }

    #[test]
    fn fd_hessian_of_quadratic_form() {
        // f = |z1|² + 2|z2|² + 2 Re(c z1 z̄2) has Hessian [[1, c],[c̄, 2]]
        let c = Complex64::new(0.3, -0.7);
        let f = |z: &[Complex64]| z[0].norm_sqr() + 2.0 * z[1].norm_sqr() + 2.0 * (c * z[0] * z[1].conj()).re;
        let p = [Complex64::new(0.2, 0.1), Complex64::new(-0.4, 0.3)];
        let h = fd_complex_hessian(&f, &p, 1e-3);
        assert_relative_eq!(h[(0, 0)].re, 1.0, epsilon = 1e-8);
        assert_relative_eq!(h[(1, 1)].re, 2.0, epsilon = 1e-8);
        assert_relative_eq!(h[(0, 1)].re, c.re, epsilon = 1e-8);
        assert_relative_eq!(h[(0, 1)].im, c.im, epsilon = 1e-8);
        assert_eq!(h[(1, 0)], h[(0, 1)].conj());
    }

    #[test]
    fn min_eigenvalue_two_by_two() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        assert_relative_eq!(min_hermitian_eigenvalue(&m), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let (a, b) = linear_fit(&xs, &ys);
        assert_relative_eq!(a, 1.5, epsilon = 1e-14);
        assert_relative_eq!(b, -0.25, epsilon = 1e-14);
    }
}
