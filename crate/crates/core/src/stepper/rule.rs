use crate::error::{Error, Result};

/// Nodes `0 = c_0 < … < c_m = 1` of continuous collocation with the Lagrange
/// basis expanded in monomials of the local variable `σ ∈ [0, 1]`.
#[derive(Clone, Debug)]
pub struct CollocationRule {
    m: usize,
    nodes: Vec<f64>,
    /// Evaluate `f` at the last node as the limit from the left.
    left_limit: bool,
    /// `basis[j][n]`: coefficient of `σ^n` in `ℓ_j`.
    basis: Vec<Vec<f64>>,
    /// `deriv[j][n]`: coefficient of `σ^n` in `ℓ_j'`.
    deriv: Vec<Vec<f64>>,
    samples: Vec<f64>,
}

/// Gauss-Lobatto points on `[0, 1]`.
pub fn gauss_lobatto(m: usize) -> Vec<f64> {
    assert!(m >= 1);
    if m == 1 {
        return vec![0.0, 1.0];
    }
    // Newton on (1 - x²) P_m'(x) from Chebyshev-Lobatto guesses.
    let mut x: Vec<f64> = (0..=m)
        .map(|i| -(std::f64::consts::PI * i as f64 / m as f64).cos())
        .collect();
    for xi in x.iter_mut().take(m).skip(1) {
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, *xi);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * *xi * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let step = (*xi * p1 - p0) / ((m + 1) as f64 * p1);
            *xi -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
    }
    let mut c: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
    c[0] = 0.0;
    c[m] = 1.0;
    // symmetrise
    for i in 1..m {
        if i < m - i {
            let a = 0.5 * (c[i] + 1.0 - c[m - i]);
            c[i] = a;
            c[m - i] = 1.0 - a;
        } else if i == m - i {
            c[i] = 0.5;
        }
    }
    c
}

fn poly_mul_linear(p: &[f64], root: f64, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (n, &a) in p.iter().enumerate() {
        out[n + 1] += a * scale;
        out[n] -= a * root * scale;
    }
    out
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

impl CollocationRule {
    /// Order `m` rule on Gauss-Lobatto nodes with the left-limit flag set.
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > 12 {
            return Err(Error::InvalidParams(format!(
                "collocation order must be in 1..=12, got {m}"
            )));
        }
        Self::from_nodes(gauss_lobatto(m))
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let m = nodes.len().saturating_sub(1);
        if m == 0 || nodes[0] != 0.0 || nodes[m] != 1.0 || nodes.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::InvalidParams(
                "collocation nodes must satisfy 0 = c_0 < … < c_m = 1".into(),
            ));
        }
        let basis: Vec<Vec<f64>> = (0..=m)
            .map(|j| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .fold(vec![1.0], |p, (_, &ck)| {
                        poly_mul_linear(&p, ck, 1.0 / (nodes[j] - ck))
                    })
            })
            .collect();
        let deriv = basis
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(n, a)| n as f64 * a)
                    .collect()
            })
            .collect();
        let mut samples: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut g = 0.5 * nodes[1];
        for _ in 0..m {
            g /= 4.0;
            samples.push(g);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            m,
            nodes,
            left_limit: true,
            basis,
            deriv,
            samples,
        })
    }

    pub fn with_left_limit(mut self, on: bool) -> Self {
        self.left_limit = on;
        self
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn left_limit(&self) -> bool {
        self.left_limit
    }

    /// Local residual sample positions: midpoints between nodes plus a
    /// geometric cluster towards `σ = 0`.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn set_samples(&mut self, samples: Vec<f64>) -> Result<()> {
        if samples.is_empty() || samples.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(Error::InvalidParams(
                "residual samples must lie in (0, 1)".into(),
            ));
        }
        self.samples = samples;
        Ok(())
    }

    pub fn basis_coeffs(&self, j: usize) -> &[f64] {
        &self.basis[j]
    }

    pub fn deriv_coeffs(&self, j: usize) -> &[f64] {
        &self.deriv[j]
    }

    /// `ℓ_j(σ)` for all `j`.
    pub fn basis_values(&self, sigma: f64) -> Vec<f64> {
        self.basis.iter().map(|p| horner(p, sigma)).collect()
    }
}
