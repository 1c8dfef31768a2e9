//! Quadrature rules used by the PCRB machinery: per-component Gauss-Hermite
//! for mixture expectations and adaptive Simpson for the prior-information
//! correction term.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::sync::OnceLock;

use crate::array::LocationPrior;
use crate::error::PcrbError;

/// Nodes and weights of an n-point Gauss-Hermite rule for the weight
/// exp(-x^2) on (-inf, inf).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch construction: eigenvalues of the Jacobi matrix give the
    /// nodes, squared first eigenvector components (times sqrt(pi)) the
    /// weights.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            let off = ((i + 1) as f64 / 2.0).sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let w = eig.eigenvectors[(0, i)].powi(2) * std::f64::consts::PI.sqrt();
                (eig.eigenvalues[i], w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integral of exp(-x^2) f(x) over the real line.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Shared 40-node rule; plenty for mixture components with sigma_theta <= 1e-1.
pub fn gauss_hermite_40() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(40))
}

/// Expectation of a scalar function under the Gaussian-mixture prior:
/// each component integrated by Gauss-Hermite after theta = theta_k +
/// sqrt(2) sigma u.
pub fn prior_expect<F: Fn(f64) -> f64>(prior: &LocationPrior, f: F) -> f64 {
    let rule = gauss_hermite_40();
    let scale = std::f64::consts::SQRT_2 * prior.sigma_theta();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let mut total = 0.0;
    for (&tk, &pk) in prior.angles_rad().iter().zip(prior.probs()) {
        let mut comp = 0.0;
        for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
            comp += w * f(tk + scale * u);
        }
        total += pk * comp * inv_sqrt_pi;
    }
    total
}

/// Complex-valued version of [`prior_expect`].
pub fn prior_expect_complex<F: Fn(f64) -> Complex64>(prior: &LocationPrior, f: F) -> Complex64 {
    let rule = gauss_hermite_40();
    let scale = std::f64::consts::SQRT_2 * prior.sigma_theta();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let mut total = Complex64::new(0.0, 0.0);
    for (&tk, &pk) in prior.angles_rad().iter().zip(prior.probs()) {
        let mut comp = Complex64::new(0.0, 0.0);
        for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
            comp += f(tk + scale * u) * w;
        }
        total += comp * (pk * inv_sqrt_pi);
    }
    total
}

/// Gauss-Hermite integral of exp(-u^2) F(theta_k + sqrt(2) sigma u) for one
/// mixture component, with a matrix-valued integrand, normalized so the
/// result approximates integral N(theta; theta_k, sigma^2) F(theta) dtheta.
pub fn component_expect_matrix<F: Fn(f64) -> DMatrix<Complex64>>(
    theta_k: f64,
    sigma: f64,
    dim: usize,
    f: F,
) -> DMatrix<Complex64> {
    let rule = gauss_hermite_40();
    let scale = std::f64::consts::SQRT_2 * sigma;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
        acc += f(theta_k + scale * u) * Complex64::new(w, 0.0);
    }
    acc * Complex64::new(inv_sqrt_pi, 0.0)
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, PcrbError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || (b - a).abs() < 1e-15 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(PcrbError::Quadrature(format!(
            "adaptive Simpson hit max depth on [{a}, {b}] with remaining error {:.3e}",
            delta.abs() / 15.0
        )));
    }
    let l = adaptive_step(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)?;
    let r = adaptive_step(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)?;
    Ok(l + r)
}

/// Adaptive Simpson integration of f over [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, PcrbError> {
    if !(b > a) {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Integration domain for prior-related integrals: the union of
/// [theta_k - 8 sigma, theta_k + 8 sigma] windows, plus bridging gaps wherever
/// the mixture density stays above 1e-300.
pub fn prior_support_segments(prior: &LocationPrior, half_width: f64) -> Vec<(f64, f64)> {
    let mut centers: Vec<f64> = prior.angles_rad().to_vec();
    centers.sort_by(f64::total_cmp);
    let mut windows: Vec<(f64, f64)> = centers
        .iter()
        .map(|&t| (t - half_width, t + half_width))
        .collect();
    // merge overlapping windows and bridge gaps where the density survives
    let mut segments: Vec<(f64, f64)> = Vec::new();
    for win in windows.drain(..) {
        match segments.last_mut() {
            Some(last) if win.0 <= last.1 => {
                last.1 = last.1.max(win.1);
            }
            Some(last) => {
                let mid = 0.5 * (last.1 + win.0);
                if crate::array::gmm_pdf(mid, prior) > 1e-300 {
                    last.1 = win.1.max(last.1);
                } else {
                    segments.push(win);
                }
            }
            None => segments.push(win),
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gauss_hermite_moments() {
        let rule = GaussHermite::new(40);
        assert_relative_eq!(rule.integrate(|_| 1.0), PI.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(rule.integrate(|x| x * x), PI.sqrt() / 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            rule.integrate(|x| x.cos()),
            PI.sqrt() * (-0.25f64).exp(),
            epsilon = 1e-12
        );
        // odd moments vanish
        assert!(rule.integrate(|x| x.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn prior_expectation_of_constant_is_one() {
        let prior = LocationPrior::new(
            10.0,
            vec![-0.9, -0.6, 0.8, 1.1],
            vec![0.2, 0.3, 0.1, 0.4],
            1e-2,
        )
        .unwrap();
        assert_relative_eq!(prior_expect(&prior, |_| 1.0), 1.0, epsilon = 1e-13);
        // E[theta] = sum p_k theta_k for the mixture
        let mean = prior_expect(&prior, |t| t);
        let expect = -0.9 * 0.2 + -0.6 * 0.3 + 0.8 * 0.1 + 1.1 * 0.4;
        assert_relative_eq!(mean, expect, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_simpson_known_integrals() {
        let v = adaptive_simpson(|x| x.sin(), 0.0, PI, 1e-12).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-10);
        let v = adaptive_simpson(|x| (-x * x).exp(), -8.0, 8.0, 1e-13).unwrap();
        assert_relative_eq!(v, PI.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn support_segments_merge_and_bridge() {
        // widely separated components: distinct segments
        let prior =
            LocationPrior::new(10.0, vec![-1.0, 1.0], vec![0.5, 0.5], 1e-3).unwrap();
        let segs = prior_support_segments(&prior, 8e-3);
        assert_eq!(segs.len(), 2);
        // close components at larger sigma: bridged into one segment
        let prior =
            LocationPrior::new(10.0, vec![-0.02, 0.02], vec![0.5, 0.5], 2e-2).unwrap();
        let segs = prior_support_segments(&prior, 0.16);
        assert_eq!(segs.len(), 1);
    }
}
