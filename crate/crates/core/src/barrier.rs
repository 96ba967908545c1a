//! Residual barriers `R(t) = λ + t^{-α}/Γ(1-α)` and their weighted sums
//! `B(t) = Σ_k w_k H(t - s_k) R(t - s_k)`.

use crate::error::{Error, Result};
use crate::special::gamma_pos;

/// Above this many terms an extended barrier is considered impractical.
pub const TERM_WARNING: usize = 64;
const TERM_LIMIT: usize = 4096;

pub fn base_barrier(alpha: f64, lambda: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        lambda + t.powf(-alpha) / gamma_pos(1.0 - alpha)
    }
}

/// Zero of `R` for `λ < 0`: `(|λ| Γ(1-α))^{-1/α}`.
pub fn barrier_root(alpha: f64, lambda: f64) -> Option<f64> {
    (lambda < 0.0).then(|| (lambda.abs() * gamma_pos(1.0 - alpha)).powf(-1.0 / alpha))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSpec {
    alpha: f64,
    lambda: f64,
    onsets: Vec<f64>,
    weights: Vec<f64>,
    inv_gamma: f64,
}

impl BarrierSpec {
    pub fn new(alpha: f64, lambda: f64, onsets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "barrier alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParams("barrier lambda must be finite".into()));
        }
        if onsets.first() != Some(&0.0) {
            return Err(Error::InvalidParams(
                "barrier onsets must start at 0".into(),
            ));
        }
        if onsets.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: onsets.len(),
                got: weights.len(),
            });
        }
        if onsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams(
                "barrier onsets must be strictly increasing".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParams(
                "barrier weights must be positive".into(),
            ));
        }
        Ok(Self {
            alpha,
            lambda,
            onsets,
            weights,
            inv_gamma: 1.0 / gamma_pos(1.0 - alpha),
        })
    }

    /// Unit weights at the given onsets.
    pub fn unit(alpha: f64, lambda: f64, onsets: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; onsets.len()];
        Self::new(alpha, lambda, onsets, w)
    }

    /// The base barrier alone, `S = {0}`.
    pub fn plain(alpha: f64, lambda: f64) -> Result<Self> {
        Self::unit(alpha, lambda, vec![0.0])
    }

    /// Weights `2^{-k}`.
    pub fn halving(alpha: f64, lambda: f64, onsets: Vec<f64>) -> Result<Self> {
        let w = (0..onsets.len()).map(|k| 0.5f64.powi(k as i32)).collect();
        Self::new(alpha, lambda, onsets, w)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn onsets(&self) -> &[f64] {
        &self.onsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }

    /// `W = Σ w_k`.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn r(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            self.lambda + t.powf(-self.alpha) * self.inv_gamma
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.onsets
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * self.r(t - s))
            .sum()
    }

    /// `B(origin + left + offset)` with every difference `t - s_k` formed
    /// before adding the small offset.
    pub fn value_at(&self, origin: f64, left: f64, offset: f64) -> f64 {
        self.onsets
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * self.r(((origin - s) + left) + offset))
            .sum()
    }

    /// `B` restricted to its first `k` terms.
    pub fn partial(&self, k: usize, t: f64) -> f64 {
        self.onsets
            .iter()
            .zip(&self.weights)
            .take(k)
            .map(|(s, w)| w * self.r(t - s))
            .sum()
    }

    /// `Σ_{s_k ≤ t} w_k`: the factor multiplying `TOL` in the error bound at `t`.
    pub fn error_bound(&self, t: f64) -> f64 {
        self.onsets
            .iter()
            .zip(&self.weights)
            .filter(|(s, _)| **s <= t)
            .map(|(_, w)| w)
            .sum()
    }

    /// Insert an onset, keeping the list sorted.
    pub fn insert_onset(&mut self, s: f64, weight: f64) -> Result<()> {
        if !(s > 0.0) || !(weight > 0.0) {
            return Err(Error::InvalidParams(format!(
                "cannot insert onset {s} with weight {weight}"
            )));
        }
        let pos = self.onsets.partition_point(|&x| x < s);
        if self.onsets.get(pos) == Some(&s) {
            return Err(Error::InvalidParams(format!("onset {s} already present")));
        }
        self.onsets.insert(pos, s);
        self.weights.insert(pos, weight);
        Ok(())
    }

    /// Smallest onset strictly greater than `t`, or `horizon`.
    pub fn next_cut(&self, t: f64, horizon: f64) -> f64 {
        self.onsets
            .iter()
            .copied()
            .find(|&s| s > t)
            .map_or(horizon, |s| s.min(horizon))
    }
}

pub fn generalized_barrier(spec: &BarrierSpec, t: f64) -> f64 {
    spec.value(t)
}

pub fn error_bound(spec: &BarrierSpec, t: f64) -> f64 {
    spec.error_bound(t)
}

/// Add onsets so that `B ≥ ρ|λ|` on `(0, horizon]` when `λ < 0`.
///
/// Each new onset is where the barrier built from the earlier terms decays to
/// `ρ|λ|`, located by bisection to `1e-12`.
/// Default `ρ` for [`extend_for_negative_lambda`].
pub const DEFAULT_RHO: f64 = 0.05;

pub fn extend_for_negative_lambda(spec: &BarrierSpec, horizon: f64, rho: f64) -> BarrierSpec {
    extend_with_weight(spec, horizon, rho, 1.0)
}

pub fn extend_with_weight(spec: &BarrierSpec, horizon: f64, rho: f64, weight: f64) -> BarrierSpec {
    let mut out = spec.clone();
    if spec.lambda >= 0.0 {
        return out;
    }
    let level = rho * spec.lambda.abs();
    let mut p = 0.0;
    let mut warned = false;
    while p < horizon {
        let active = out.onsets.partition_point(|&s| s <= p);
        let next = out
            .onsets
            .get(active)
            .copied()
            .unwrap_or(horizon)
            .min(horizon);
        let f = |t: f64| out.partial(active, t) - level;
        if f(next) >= 0.0 {
            p = next;
            if next >= horizon {
                break;
            }
            continue;
        }
        // f(p+) = +∞ and f decreases on (p, next]
        let (mut lo, mut hi) = (p, next);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo <= p {
            break;
        }
        out.insert_onset(lo, weight)
            .expect("bisection stays inside the gap");
        p = lo;
        if out.len() > TERM_WARNING && !warned {
            log::warn!(
                "negative-lambda barrier needs more than {TERM_WARNING} terms before t = {horizon}"
            );
            warned = true;
        }
        if out.len() >= TERM_LIMIT {
            log::warn!("negative-lambda barrier truncated at {TERM_LIMIT} terms (t = {p})");
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1() -> BarrierSpec {
        BarrierSpec::unit(0.4, 0.0, vec![0.0, 1.0 / 3.0, 0.5, 0.75]).unwrap()
    }

    #[test]
    fn base_barrier_values() {
        assert_eq!(base_barrier(0.4, 0.0, -0.1), 0.0);
        assert_eq!(base_barrier(0.4, 0.0, 0.0), 0.0);
        assert!((base_barrier(0.4, 0.0, 1.0) - 0.67150497).abs() < 1e-8);
        assert!(base_barrier(0.4, -1.0, 0.36946).abs() < 1e-4);
    }

    #[test]
    fn generalized_values() {
        let b = ex1();
        assert!((generalized_barrier(&b, 0.25) - 1.16915806).abs() < 1e-8);
        assert!((generalized_barrier(&b, 0.4) - 2.95252466).abs() < 1e-8);
        assert_eq!(generalized_barrier(&b, 0.0), 0.0);
        assert_eq!(generalized_barrier(&b, -1.0), 0.0);
        assert_eq!(b.value(0.3), base_barrier(0.4, 0.0, 0.3));
        assert_eq!(
            b.value_at(0.0, 1.0 / 3.0, 1e-12),
            b.partial(1, 1.0 / 3.0 + 1e-12) + base_barrier(0.4, 0.0, 1e-12)
        );
    }

    #[test]
    fn error_bound_steps() {
        let b = ex1();
        assert_eq!(error_bound(&b, 0.2), 1.0);
        assert_eq!(error_bound(&b, 1.0), 4.0);
        assert_eq!(b.total_weight(), 4.0);
        let h = BarrierSpec::halving(0.4, 0.0, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert!(h.error_bound(1.0) <= 2.0);
    }

    #[test]
    fn roots() {
        assert!((barrier_root(0.4, -1.0).unwrap() - 0.3695).abs() < 1e-4);
        assert_eq!(barrier_root(0.4, 0.0), None);
        let r = barrier_root(0.5, -2.0).unwrap();
        assert!((r - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
        // bisection oracle on the base barrier
        let (mut lo, mut hi) = (1e-6, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if base_barrier(0.5, -2.0, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((r - lo).abs() < 1e-14);
    }

    #[test]
    fn negative_lambda_extension() {
        let b = BarrierSpec::plain(0.4, -1.0).unwrap();
        let e = extend_for_negative_lambda(&b, 1.0, 0.05);
        assert!((4..=6).contains(&e.len()), "{:?}", e.onsets());
        let gaps: Vec<f64> = e.onsets().windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
        let min = (1..=100_000)
            .map(|i| e.value(i as f64 * 1e-5))
            .fold(f64::INFINITY, f64::min);
        assert!(min >= 0.05 - 1e-12, "{min}");

        let unchanged = extend_for_negative_lambda(&ex1(), 1.0, 0.05);
        assert_eq!(unchanged, ex1());

        // with ρ → 0 the first onset is the root of R
        let e0 = extend_for_negative_lambda(&b, 1.0, 1e-9);
        assert!((e0.onsets()[1] - barrier_root(0.4, -1.0).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn extension_respects_existing_onsets() {
        let b = BarrierSpec::unit(0.4, -1.0, vec![0.0, 0.2]).unwrap();
        let e = extend_for_negative_lambda(&b, 1.0, 0.05);
        assert!(e.onsets().contains(&0.2));
        let min = (1..=20_000)
            .map(|i| e.value(i as f64 * 5e-5))
            .fold(f64::INFINITY, f64::min);
        assert!(min >= 0.05 - 1e-12);
    }

    #[test]
    fn invalid_specs() {
        assert!(BarrierSpec::unit(0.4, 0.0, vec![0.1]).is_err());
        assert!(BarrierSpec::unit(0.4, 0.0, vec![0.0, 0.5, 0.5]).is_err());
        assert!(BarrierSpec::new(0.4, 0.0, vec![0.0], vec![0.0]).is_err());
        assert!(BarrierSpec::new(0.4, 0.0, vec![0.0, 0.2], vec![1.0]).is_err());
        let mut b = ex1();
        assert!(b.insert_onset(0.5, 1.0).is_err());
        b.insert_onset(0.6, 2.0).unwrap();
        assert_eq!(b.onsets()[3], 0.6);
        assert_eq!(b.next_cut(0.5, 1.0), 0.6);
        assert_eq!(b.next_cut(0.8, 1.0), 1.0);
    }
}
