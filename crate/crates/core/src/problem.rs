//! Problem description `(∂_t^α + L) u = f` on `(0, T) × Ω` with a right-hand
//! side that switches on in pieces:
//!
//! ```text
//! f(x, t) = Σ_k H(t - s_k) · spatial_k(x) · temporal_k(t - s_k)
//! ```

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::function::ScalarFn;
use crate::spatial::{compute_lambda, SpatialOperatorSpec};
use crate::special::gamma_pos;

/// One term of the right-hand side, active for `t ≥ onset`.
#[derive(Clone, Debug)]
pub struct RhsPiece {
    pub onset: f64,
    /// Expected local behaviour `(t - onset)^exponent`; informational.
    pub exponent: f64,
    pub spatial: ScalarFn,
    /// Profile in local time `τ = t - onset ≥ 0`.
    pub temporal: ScalarFn,
}

impl RhsPiece {
    pub fn new(onset: f64, exponent: f64, spatial: ScalarFn, temporal: ScalarFn) -> Self {
        Self {
            onset,
            exponent,
            spatial,
            temporal,
        }
    }
}

/// How far onsets are moved to the left before use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpShift {
    /// `4·ε·max(1, s)` with ε the machine epsilon.
    Auto,
    Fixed(f64),
}

impl JumpShift {
    pub fn amount(&self, onset: f64) -> f64 {
        match *self {
            JumpShift::Auto => 4.0 * f64::EPSILON * onset.abs().max(1.0),
            JumpShift::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub horizon: f64,
    pub pieces: Vec<RhsPiece>,
    pub u0: ScalarFn,
    pub spatial: SpatialOperatorSpec,
    pub jump_shift: JumpShift,
}

impl ProblemSpec {
    pub fn new(
        alpha: f64,
        horizon: f64,
        pieces: Vec<RhsPiece>,
        u0: ScalarFn,
        spatial: SpatialOperatorSpec,
    ) -> Result<Self> {
        let spec = Self {
            alpha,
            horizon,
            pieces,
            u0,
            spatial,
            jump_shift: JumpShift::Auto,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_jump_shift(mut self, shift: JumpShift) -> Result<Self> {
        if let JumpShift::Fixed(v) = shift {
            if !(v >= 0.0) {
                return Err(Error::InvalidProblem(format!(
                    "jump shift must be non-negative, got {v}"
                )));
            }
        }
        self.jump_shift = shift;
        Ok(self)
    }

    pub fn with_spatial_cells(mut self, ncells: usize) -> Result<Self> {
        if !self.spatial.is_scalar() {
            self.spatial.ncells = ncells;
        }
        self.spatial.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidProblem(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let Some(first) = self.pieces.first() else {
            return Err(Error::InvalidProblem(
                "at least one right-hand side piece is required".into(),
            ));
        };
        if first.onset != 0.0 {
            return Err(Error::InvalidProblem(format!(
                "first onset must be 0, got {}",
                first.onset
            )));
        }
        for w in self.pieces.windows(2) {
            if !(w[1].onset > w[0].onset) {
                return Err(Error::InvalidProblem(
                    "onsets must be strictly increasing".into(),
                ));
            }
        }
        if let Some(last) = self.pieces.last() {
            if !(last.onset < self.horizon) {
                return Err(Error::InvalidProblem(format!(
                    "last onset {} must precede the horizon {}",
                    last.onset, self.horizon
                )));
            }
        }
        if let Some(p) = self.pieces.iter().find(|p| !(p.exponent >= 0.0)) {
            return Err(Error::InvalidProblem(format!(
                "piece exponents must be non-negative, got {}",
                p.exponent
            )));
        }
        self.spatial.validate()
    }

    pub fn onsets(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.onset).collect()
    }

    /// Onset of piece `k` after the left shift; `s_0 = 0` is never moved.
    pub fn effective_onset(&self, k: usize) -> f64 {
        let s = self.pieces[k].onset;
        if k == 0 {
            s
        } else {
            s - self.jump_shift.amount(s)
        }
    }

    pub fn effective_onsets(&self) -> Vec<f64> {
        (0..self.pieces.len())
            .map(|k| self.effective_onset(k))
            .collect()
    }

    /// `λ = inf L[1]`.
    pub fn lambda(&self) -> f64 {
        compute_lambda(&self.spatial)
    }

    /// `f(x, t)` with the post-jump value taken at each (shifted) onset.
    pub fn rhs_eval(&self, x: f64, t: f64) -> f64 {
        self.pieces
            .iter()
            .enumerate()
            .filter(|(k, _)| self.effective_onset(*k) <= t)
            .map(|(_, p)| p.spatial.eval(x) * p.temporal.eval((t - p.onset).max(0.0)))
            .sum()
    }
}

/// Built-in benchmark problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// Four unit steps at 0, 1/3, 1/2, 3/4 times `sin x` on (0, π) × (0, 1].
    Ex1,
    /// Same onsets with smoothed steps `τ^γ, τ^{γ/2}, τ^{γ/4}, τ^{γ/8}`.
    Ex2,
    /// `(∂_t^α - 1) u = f` on (0, 1) with `u = t^0.6`.
    NegLambdaScalar,
}

impl ProblemId {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemId::Ex1 => "ex1",
            ProblemId::Ex2 => "ex2",
            ProblemId::NegLambdaScalar => "neg_lambda_scalar",
        }
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(ProblemId::Ex1),
            "ex2" => Ok(ProblemId::Ex2),
            "neg_lambda_scalar" => Ok(ProblemId::NegLambdaScalar),
            other => Err(Error::InvalidProblem(format!(
                "unknown problem id '{other}'"
            ))),
        }
    }
}

pub const EX_ONSETS: [f64; 4] = [0.0, 1.0 / 3.0, 0.5, 0.75];

/// Exponent of the exact solution `t^ν` of the scalar negative-λ problem.
pub const NEG_LAMBDA_POWER: f64 = 0.6;

pub fn make_problem(id: ProblemId, alpha: f64, gamma: Option<f64>) -> Result<ProblemSpec> {
    match id {
        ProblemId::Ex1 => {
            let pieces = EX_ONSETS
                .iter()
                .map(|&s| RhsPiece::new(s, 0.0, ScalarFn::new(f64::sin), ScalarFn::constant(1.0)))
                .collect();
            ProblemSpec::new(
                alpha,
                1.0,
                pieces,
                ScalarFn::constant(0.0),
                SpatialOperatorSpec::laplacian((0.0, PI), 30),
            )
        }
        ProblemId::Ex2 => {
            let gamma = gamma.filter(|g| *g > 0.0).ok_or_else(|| {
                Error::InvalidProblem("ex2 requires a smoothing exponent gamma > 0".into())
            })?;
            let pieces = EX_ONSETS
                .iter()
                .enumerate()
                .map(|(k, &s)| {
                    let e = gamma / f64::powi(2.0, k as i32);
                    RhsPiece::new(
                        s,
                        e,
                        ScalarFn::new(f64::sin),
                        ScalarFn::new(move |tau: f64| tau.max(0.0).powf(e)),
                    )
                })
                .collect();
            ProblemSpec::new(
                alpha,
                1.0,
                pieces,
                ScalarFn::constant(0.0),
                SpatialOperatorSpec::laplacian((0.0, PI), 30),
            )
        }
        ProblemId::NegLambdaScalar => {
            let nu = NEG_LAMBDA_POWER;
            if !(alpha > 0.0 && alpha < nu) {
                return Err(Error::InvalidProblem(format!(
                    "neg_lambda_scalar needs alpha in (0, {nu}) for a bounded source, got {alpha}"
                )));
            }
            // ∂_t^α t^ν = Γ(ν+1)/Γ(ν+1-α) t^{ν-α}
            let coeff = gamma_pos(nu + 1.0) / gamma_pos(nu + 1.0 - alpha);
            let temporal = ScalarFn::new(move |t: f64| {
                let t = t.max(0.0);
                coeff * t.powf(nu - alpha) - t.powf(nu)
            });
            let piece = RhsPiece::new(0.0, nu - alpha, ScalarFn::constant(1.0), temporal);
            ProblemSpec::new(
                alpha,
                1.0,
                vec![piece],
                ScalarFn::constant(0.0),
                SpatialOperatorSpec::scalar(-1.0),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    #[test]
    fn ex1_rhs_at_and_before_jump() {
        let p = make_problem(ProblemId::Ex1, 0.4, None).unwrap();
        assert_eq!(p.rhs_eval(FRAC_PI_2, 1.0 / 3.0), 2.0);
        let unshifted = p.clone().with_jump_shift(JumpShift::Fixed(0.0)).unwrap();
        assert_eq!(unshifted.rhs_eval(FRAC_PI_2, 1.0 / 3.0 - 1e-6), 1.0);
        let shifted = p.with_jump_shift(JumpShift::Fixed(1e-12)).unwrap();
        assert_eq!(shifted.rhs_eval(FRAC_PI_2, 1.0 / 3.0 - 1e-13), 2.0);
    }

    #[test]
    fn problem_structures() {
        let ex1 = make_problem(ProblemId::Ex1, 0.4, None).unwrap();
        assert_eq!(ex1.onsets(), EX_ONSETS.to_vec());
        assert!(ex1.pieces.iter().all(|p| p.exponent == 0.0));
        assert_eq!(ex1.lambda(), 0.0);

        let ex2 = make_problem(ProblemId::Ex2, 0.4, Some(0.25)).unwrap();
        let exps: Vec<f64> = ex2.pieces.iter().map(|p| p.exponent).collect();
        assert_eq!(exps, vec![0.25, 0.125, 0.0625, 0.03125]);

        let neg = make_problem(ProblemId::NegLambdaScalar, 0.4, None).unwrap();
        assert_eq!(neg.pieces.len(), 1);
        assert_eq!(neg.lambda(), -1.0);
        let t: f64 = 0.3;
        let want = gamma_pos(1.6) / gamma_pos(1.2) * t.powf(0.2) - t.powf(0.6);
        assert!((neg.rhs_eval(0.5, t) - want).abs() < 1e-15);
    }

    #[test]
    fn ex2_requires_gamma() {
        assert!(make_problem(ProblemId::Ex2, 0.4, None).is_err());
        assert!(make_problem(ProblemId::Ex2, 0.4, Some(0.0)).is_err());
        assert!("nope".parse::<ProblemId>().is_err());
        assert_eq!(
            "neg_lambda_scalar".parse::<ProblemId>().unwrap(),
            ProblemId::NegLambdaScalar
        );
    }

    #[test]
    fn rhs_is_right_continuous_at_onsets() {
        let p = make_problem(ProblemId::Ex2, 0.4, Some(0.5)).unwrap();
        for k in 1..p.pieces.len() {
            let s = p.pieces[k].onset;
            // The new piece starts from zero, so f is continuous across the onset.
            let at = p.rhs_eval(1.0, s);
            let before = p.rhs_eval(1.0, s - 1e-12);
            assert!((at - before).abs() < 1e-9, "onset {s}: {at} vs {before}");
        }
        let ex1 = make_problem(ProblemId::Ex1, 0.4, None).unwrap();
        for s in EX_ONSETS {
            assert_eq!(ex1.rhs_eval(1.0, s), ex1.rhs_eval(1.0, s + 1e-9));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let piece = |s| RhsPiece::new(s, 0.0, ScalarFn::constant(1.0), ScalarFn::constant(1.0));
        let spatial = SpatialOperatorSpec::scalar(0.0);
        let zero = ScalarFn::constant(0.0);
        assert!(
            ProblemSpec::new(1.2, 1.0, vec![piece(0.0)], zero.clone(), spatial.clone()).is_err()
        );
        assert!(
            ProblemSpec::new(0.5, 0.0, vec![piece(0.0)], zero.clone(), spatial.clone()).is_err()
        );
        assert!(ProblemSpec::new(0.5, 1.0, vec![], zero.clone(), spatial.clone()).is_err());
        assert!(
            ProblemSpec::new(0.5, 1.0, vec![piece(0.1)], zero.clone(), spatial.clone()).is_err()
        );
        assert!(ProblemSpec::new(
            0.5,
            1.0,
            vec![piece(0.0), piece(0.0)],
            zero.clone(),
            spatial.clone()
        )
        .is_err());
        assert!(ProblemSpec::new(
            0.5,
            1.0,
            vec![piece(0.0), piece(1.0)],
            zero.clone(),
            spatial.clone()
        )
        .is_err());
        assert!(make_problem(ProblemId::NegLambdaScalar, 0.7, None).is_err());
    }

    #[test]
    fn ex2_converges_to_ex1_as_gamma_vanishes() {
        let ex1 = make_problem(ProblemId::Ex1, 0.4, None).unwrap();
        let t = 0.8;
        let mut prev = f64::INFINITY;
        for g in [0.5, 0.1, 0.01, 0.001] {
            let ex2 = make_problem(ProblemId::Ex2, 0.4, Some(g)).unwrap();
            let gap = (ex2.rhs_eval(1.0, t) - ex1.rhs_eval(1.0, t)).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-2);
    }
}
