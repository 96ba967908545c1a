//! Moments `W_n(θ) = ∫_0^{min(θ,1)} (θ - σ)^{-α} σ^n dσ` of the Caputo kernel
//! against the monomials of one cell.

use crate::special::gamma_pos;

#[derive(Clone, Debug)]
pub struct KernelMoments {
    alpha: f64,
    /// `B(n + 1, 1 - α)`.
    beta: Vec<f64>,
    binom: Vec<Vec<f64>>,
}

impl KernelMoments {
    pub fn new(alpha: f64, nmax: usize) -> Self {
        let g = gamma_pos(1.0 - alpha);
        let mut beta = Vec::with_capacity(nmax);
        let mut fact = 1.0;
        for n in 0..nmax {
            if n > 0 {
                fact *= n as f64;
            }
            beta.push(fact * g / gamma_pos(n as f64 + 2.0 - alpha));
        }
        let mut binom = vec![vec![1.0]];
        for n in 1..nmax {
            let prev = &binom[n - 1];
            let mut row = vec![1.0; n + 1];
            for j in 1..n {
                row[j] = prev[j - 1] + prev[j];
            }
            binom.push(row);
        }
        Self { alpha, beta, binom }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Moments for an evaluation point inside the cell, `0 ≤ θ ≤ 1`.
    pub fn inside(&self, theta: f64, out: &mut [f64]) {
        let a = self.alpha;
        if theta <= 0.0 {
            out.fill(0.0);
            return;
        }
        let mut p = theta.powf(1.0 - a);
        for (o, b) in out.iter_mut().zip(&self.beta) {
            *o = p * b;
            p *= theta;
        }
    }

    /// Moments for a point beyond the cell: `θ = 1 + gap`, `gap ≥ 0` passed
    /// separately so that adjacent cells keep full relative accuracy.
    pub fn beyond(&self, theta: f64, gap: f64, out: &mut [f64]) {
        let a = self.alpha;
        if gap <= 0.0 {
            out.copy_from_slice(&self.beta[..out.len()]);
        } else if theta <= 2.0 {
            // u = θ - σ: ∫_gap^θ u^{-α} (θ - u)^n du, expanded binomially.
            let nmax = out.len();
            let mut tp = Vec::with_capacity(nmax + 1);
            let mut gp = Vec::with_capacity(nmax + 1);
            let (mut t, mut g) = (theta.powf(1.0 - a), gap.powf(1.0 - a));
            for _ in 0..=nmax {
                tp.push(t);
                gp.push(g);
                t *= theta;
                g *= gap;
            }
            for (n, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                let mut th = 1.0;
                for j in (0..=n).rev() {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    s += sign * self.binom[n][j] * th * (tp[j] - gp[j]) / (j as f64 + 1.0 - a);
                    th *= theta;
                }
                *o = s;
            }
        } else {
            // (θ - σ)^{-α} = θ^{-α} Σ_k (α)_k/k! (σ/θ)^k
            let inv = 1.0 / theta;
            let lead = theta.powf(-a);
            let mut c = 1.0;
            out.fill(0.0);
            for k in 0..200 {
                let mut done = true;
                for (n, o) in out.iter_mut().enumerate() {
                    let term = c / (n + k + 1) as f64;
                    *o += term;
                    if term > 1e-17 * *o {
                        done = false;
                    }
                }
                if done {
                    break;
                }
                c *= (k as f64 + a) / (k as f64 + 1.0) * inv;
            }
            for o in out.iter_mut() {
                *o *= lead;
            }
        }
    }
}
