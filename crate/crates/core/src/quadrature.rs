//! Gauss rules used by the mollifier transform and the jump expectations.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre on `[-1, 1]`, nodes by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Expectation rule for a standard Gaussian: `E f(Z) ≈ Σ w_i f(x_i)`.
///
/// Built from the physicists' Hermite rule (weight `e^{-x²}`) by the
/// substitution `z = √2 x`, `w → w / √π`.
pub fn gauss_hermite_normal(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite recurrence.
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    let norm = PI.sqrt();
    Rule {
        nodes: nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect(),
        weights: weights.iter().map(|w| w / norm).collect(),
    }
}

impl Rule {
    /// Apply to `[a, b]` (Legendre rules only).
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    /// Weighted sum at the stored nodes (Hermite expectation rules).
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Adaptive Gauss-Legendre: bisect until the 10- and 20-point estimates on
/// each panel agree to within the panel's share of `tol`.
pub struct Adaptive {
    coarse: Rule,
    fine: Rule,
    max_depth: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            coarse: gauss_legendre(10),
            fine: gauss_legendre(20),
            max_depth: 40,
        }
    }
}

impl Adaptive {
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, tol: f64, f: &F) -> Result<f64> {
        self.panel(a, b, tol, f, 0)
    }

    fn panel<F: Fn(f64) -> f64>(&self, a: f64, b: f64, tol: f64, f: &F, depth: usize) -> Result<f64> {
        let c = self.coarse.integrate(a, b, f);
        let fi = self.fine.integrate(a, b, f);
        if (fi - c).abs() <= tol {
            return Ok(fi);
        }
        if depth >= self.max_depth {
            return Err(Error::Quadrature(format!(
                "panel [{a}, {b}] still off by {:.3e} after {depth} bisections",
                (fi - c).abs()
            )));
        }
        let m = 0.5 * (a + b);
        Ok(self.panel(a, m, 0.5 * tol, f, depth + 1)? + self.panel(m, b, 0.5 * tol, f, depth + 1)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(10);
        // Degree 19 is the limit for 10 points.
        let v = rule.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9 * 2f64.powi(20) / 20.0);
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_rule_reproduces_gaussian_moments() {
        let rule = gauss_hermite_normal(21);
        assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!(rule.expect(|z| z).abs() < 1e-13);
        assert!((rule.expect(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((rule.expect(|z| z.powi(4)) - 3.0).abs() < 1e-11);
        assert!((rule.expect(|z| z.powi(6)) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_smooth_bump() {
        let f = |s: f64| if s < 1.0 { (1.0 / (s * s - 1.0)).exp() } else { 0.0 };
        let a = Adaptive::default().integrate(0.0, 1.0, 1e-12, &f).unwrap();
        let b = gauss_legendre(200).integrate(0.0, 1.0, f);
        assert!((a - b).abs() < 1e-11);
    }
}
