//! Reference solutions for error measurement.
//!
//! Exact solutions are evaluated piecewise in the local time `t - s_k` of
//! each onset, never through a Mittag-Leffler argument formed across a jump.

use nalgebra::DVector;

use crate::controller::AdaptiveParams;
use crate::error::Result;
use crate::problem::{make_problem, ProblemId, EX_ONSETS, NEG_LAMBDA_POWER};
use crate::spatial::{assemble, AssembledOperator};
use crate::special::{mittag_leffler, MLParams};
use crate::stepper::CollocationRule;
use crate::strategies::{solve_by_shifting, SegmentedSolution, Trajectory};

/// `v(τ) = τ^α E_{α,α+1}(-τ^α)`, the response of `∂^α v + v = 1`, `v(0) = 0`.
pub fn relaxation_step(alpha: f64, tau: f64) -> Result<f64> {
    if tau <= 0.0 {
        return Ok(0.0);
    }
    let ta = tau.powf(alpha);
    Ok(ta * mittag_leffler(MLParams::new(alpha, alpha + 1.0)?, -ta)?)
}

pub fn exact_ex1(alpha: f64, x: f64, t: f64) -> Result<f64> {
    let mut sum = 0.0;
    for s in EX_ONSETS {
        if t >= s {
            sum += relaxation_step(alpha, t - s)?;
        }
    }
    Ok(x.sin() * sum)
}

pub fn exact_neg_lambda(t: f64) -> f64 {
    t.max(0.0).powf(NEG_LAMBDA_POWER)
}

/// Something to measure errors against.
pub enum Reference {
    Ex1 {
        alpha: f64,
    },
    NegLambda,
    /// A numerical solution on the same spatial discretisation.
    Numerical(Box<dyn Trajectory + Send>),
}

impl std::fmt::Debug for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reference::Ex1 { alpha } => write!(f, "Ex1 {{ alpha: {alpha} }}"),
            Reference::NegLambda => f.write_str("NegLambda"),
            Reference::Numerical(_) => f.write_str("Numerical(..)"),
        }
    }
}

impl Reference {
    /// Exact reference for a built-in problem, if one is known.
    pub fn exact(id: ProblemId, alpha: f64) -> Option<Self> {
        match id {
            ProblemId::Ex1 => Some(Reference::Ex1 { alpha }),
            ProblemId::NegLambdaScalar => Some(Reference::NegLambda),
            ProblemId::Ex2 => None,
        }
    }

    /// Values at the operator's spatial sample points.
    pub fn sample_values(&self, op: &AssembledOperator, t: f64) -> Result<DVector<f64>> {
        match self {
            Reference::Ex1 { alpha } => {
                let pts = op.sample_points();
                let mut out = DVector::zeros(pts.len());
                for (o, &x) in out.iter_mut().zip(pts) {
                    *o = exact_ex1(*alpha, x, t)?;
                }
                Ok(out)
            }
            Reference::NegLambda => Ok(DVector::from_element(
                op.sample_points().len(),
                exact_neg_lambda(t),
            )),
            Reference::Numerical(sol) => Ok(op.sample_matrix() * sol.value_at(t)?),
        }
    }
}

/// `n` uniform times `T·i/n`, `i = 1..=n`.
pub fn uniform_times(horizon: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Largest pointwise deviation over the given times and all spatial samples.
pub fn max_error(
    approx: &dyn Trajectory,
    reference: &Reference,
    op: &AssembledOperator,
    times: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in times {
        let u = op.sample_matrix() * approx.value_at(t)?;
        let r = reference.sample_values(op, t)?;
        worst = worst.max((u - r).amax());
    }
    Ok(worst)
}

/// Largest deviation between two numerical solutions on the same operator.
pub fn max_difference(
    a: &dyn Trajectory,
    b: &dyn Trajectory,
    op: &AssembledOperator,
    times: &[f64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in times {
        let d = op.sample_matrix() * (a.value_at(t)? - b.value_at(t)?);
        worst = worst.max(d.amax());
    }
    Ok(worst)
}

/// Numerical reference for the smoothed-step problem: a shifting solve at
/// `TOL/100`.
pub fn reference_for_ex2(
    alpha: f64,
    gamma: f64,
    params: &AdaptiveParams,
) -> Result<(SegmentedSolution, AssembledOperator)> {
    let spec = make_problem(ProblemId::Ex2, alpha, Some(gamma))?;
    let op = assemble(&spec.spatial)?;
    let rule = CollocationRule::new(4)?;
    let ref_params = AdaptiveParams {
        tol: params.tol / 100.0,
        ..params.clone()
    };
    let (sol, _) = solve_by_shifting(&spec, &rule, &op, &ref_params)?;
    Ok((sol, op))
}
