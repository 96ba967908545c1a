//! Alternatives to a single run with the generalized barrier: one subproblem
//! per right-hand-side piece (splitting) or one run per interval between
//! onsets with the earlier solution as history (shifting).

use nalgebra::DVector;
use rayon::prelude::*;

use crate::barrier::{extend_for_negative_lambda, BarrierSpec, DEFAULT_RHO};
use crate::controller::{run_adaptive, run_segment, AdaptiveParams, RunReport};
use crate::error::{Error, Result};
use crate::function::ScalarFn;
use crate::problem::{ProblemSpec, RhsPiece};
use crate::spatial::AssembledOperator;
use crate::stepper::{CollocationRule, PiecewiseSolution, SemiDiscreteSystem};

/// Anything that yields physical dof vectors at global times.
pub trait Trajectory: Sync {
    fn value_at(&self, t: f64) -> Result<DVector<f64>>;
    fn horizon(&self) -> f64;
}

impl Trajectory for PiecewiseSolution {
    fn value_at(&self, t: f64) -> Result<DVector<f64>> {
        self.evaluate_global(t)
    }

    fn horizon(&self) -> f64 {
        self.origin() + self.end()
    }
}

/// `u_h(t) = Σ_k u_h^k(t - s_k)` over the components that have started.
#[derive(Clone, Debug)]
pub struct MergedSolution {
    pub components: Vec<PiecewiseSolution>,
    pub offsets: Vec<f64>,
    horizon: f64,
}

impl Trajectory for MergedSolution {
    fn value_at(&self, t: f64) -> Result<DVector<f64>> {
        let n = self.components[0].ndof();
        let mut out = DVector::zeros(n);
        for (c, &s) in self.components.iter().zip(&self.offsets) {
            if s <= t {
                let local = (t - s).min(c.end());
                out += c.evaluate(local)?;
            }
        }
        Ok(out)
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Consecutive segments, each in its own local time.
#[derive(Clone, Debug)]
pub struct SegmentedSolution {
    pub segments: Vec<PiecewiseSolution>,
}

impl SegmentedSolution {
    pub fn mesh(&self) -> Vec<f64> {
        let mut nodes = vec![0.0];
        for s in &self.segments {
            nodes.extend(s.mesh()[1..].iter().map(|t| s.origin() + t));
        }
        nodes
    }
}

impl Trajectory for SegmentedSolution {
    fn value_at(&self, t: f64) -> Result<DVector<f64>> {
        let k = self.segments.partition_point(|s| s.origin() <= t).max(1) - 1;
        let seg = &self.segments[k];
        let local = (t - seg.origin()).clamp(0.0, seg.end());
        seg.evaluate(local)
    }

    fn horizon(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.origin() + s.end())
    }
}

fn barrier_for_component(alpha: f64, lambda: f64, horizon: f64) -> Result<BarrierSpec> {
    let b = BarrierSpec::plain(alpha, lambda)?;
    Ok(extend_for_negative_lambda(&b, horizon, DEFAULT_RHO))
}

/// Solve each piece separately in its local time with tolerance `w_k·TOL`
/// (unit weights) and sum the results.
pub fn solve_by_splitting(
    spec: &ProblemSpec,
    rule: &CollocationRule,
    op: &AssembledOperator,
    params: &AdaptiveParams,
) -> Result<(MergedSolution, RunReport)> {
    solve_by_splitting_weighted(spec, rule, op, params, &vec![1.0; spec.pieces.len()])
}

pub fn solve_by_splitting_weighted(
    spec: &ProblemSpec,
    rule: &CollocationRule,
    op: &AssembledOperator,
    params: &AdaptiveParams,
    weights: &[f64],
) -> Result<(MergedSolution, RunReport)> {
    if weights.len() != spec.pieces.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.pieces.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParams(
            "splitting weights must be positive".into(),
        ));
    }
    let lambda = spec.lambda();
    let offsets = spec.effective_onsets();
    let results: Vec<Result<(PiecewiseSolution, RunReport, f64)>> = spec
        .pieces
        .par_iter()
        .enumerate()
        .map(|(k, piece)| {
            let wrap = |e: Error| Error::Subproblem {
                index: k,
                source: Box::new(e),
            };
            let horizon = spec.horizon - offsets[k];
            let local = RhsPiece::new(
                0.0,
                piece.exponent,
                piece.spatial.clone(),
                piece.temporal.clone(),
            );
            let u0 = if k == 0 {
                spec.u0.clone()
            } else {
                ScalarFn::constant(0.0)
            };
            let sub = ProblemSpec::new(spec.alpha, horizon, vec![local], u0, spec.spatial.clone())
                .map_err(wrap)?;
            let bspec = barrier_for_component(spec.alpha, lambda, horizon).map_err(wrap)?;
            let sub_params = AdaptiveParams {
                tol: params.tol * weights[k],
                ..params.clone()
            };
            let (sol, report) = run_adaptive(&sub, &bspec, rule, op, &sub_params).map_err(wrap)?;
            Ok((sol, report, bspec.total_weight()))
        })
        .collect();

    let mut components = Vec::with_capacity(results.len());
    let mut report = RunReport {
        tol: params.tol,
        ..RunReport::default()
    };
    for (k, r) in results.into_iter().enumerate() {
        let (sol, mut sub, w) = r?;
        for c in &mut sub.cells {
            c.left += offsets[k];
            c.right += offsets[k];
            for s in &mut c.samples {
                s.t += offsets[k];
            }
        }
        report.weight_total += weights[k] * w;
        report.absorb(sub);
        components.push(sol);
    }
    report.barrier_onsets = offsets.clone();
    Ok((
        MergedSolution {
            components,
            offsets,
            horizon: spec.horizon,
        },
        report,
    ))
}

/// Solve interval by interval between consecutive onsets, each in local time
/// with the shifted Caputo operator and the full barrier.
pub fn solve_by_shifting(
    spec: &ProblemSpec,
    rule: &CollocationRule,
    op: &AssembledOperator,
    params: &AdaptiveParams,
) -> Result<(SegmentedSolution, RunReport)> {
    let bspec = BarrierSpec::unit(spec.alpha, spec.lambda(), spec.effective_onsets())?;
    let bspec = extend_for_negative_lambda(&bspec, spec.horizon, DEFAULT_RHO);
    solve_by_shifting_with(spec, &bspec, rule, op, params)
}

pub fn solve_by_shifting_with(
    spec: &ProblemSpec,
    bspec: &BarrierSpec,
    rule: &CollocationRule,
    op: &AssembledOperator,
    params: &AdaptiveParams,
) -> Result<(SegmentedSolution, RunReport)> {
    let sys = SemiDiscreteSystem::new(spec, op, rule)?;
    let starts: Vec<f64> = bspec
        .onsets()
        .iter()
        .copied()
        .filter(|&s| s < spec.horizon)
        .collect();
    let mut segments: Vec<PiecewiseSolution> = Vec::with_capacity(starts.len());
    let mut report = RunReport {
        tol: params.tol,
        weight_total: bspec.total_weight(),
        ..RunReport::default()
    };
    for (k, &origin) in starts.iter().enumerate() {
        let wrap = |e: Error| Error::Subproblem {
            index: k,
            source: Box::new(e),
        };
        let end = starts.get(k + 1).copied().unwrap_or(spec.horizon);
        let horizon = end - origin;
        let start = match segments.last() {
            Some(prev) => sys.continue_from(origin, prev),
            None => sys.start(0.0),
        };
        let (sol, sub) =
            run_segment(&sys, &segments, start, horizon, bspec, params).map_err(wrap)?;
        report.absorb(sub);
        segments.push(sol);
    }
    report.barrier_onsets = bspec.onsets().to_vec();
    Ok((SegmentedSolution { segments }, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_problem, ProblemId};
    use crate::reference::{max_difference, max_error, uniform_times, Reference};
    use crate::spatial::{assemble, SpatialOperatorSpec};

    fn single_piece() -> ProblemSpec {
        let spatial = SpatialOperatorSpec::laplacian((0.0, std::f64::consts::PI), 6);
        let piece = RhsPiece::new(
            0.0,
            0.5,
            ScalarFn::new(f64::sin),
            ScalarFn::new(|t: f64| t.sqrt()),
        );
        ProblemSpec::new(0.5, 1.0, vec![piece], ScalarFn::constant(0.0), spatial).unwrap()
    }

    #[test]
    fn single_piece_strategies_match_plain_run() {
        let spec = single_piece();
        let op = assemble(&spec.spatial).unwrap();
        let rule = CollocationRule::new(4).unwrap();
        let params = AdaptiveParams::default().with_tol(1e-3);
        let b = BarrierSpec::plain(spec.alpha, spec.lambda()).unwrap();
        let (sol, rep) = run_adaptive(&spec, &b, &rule, &op, &params).unwrap();
        let (split, srep) = solve_by_splitting(&spec, &rule, &op, &params).unwrap();
        let (shift, hrep) = solve_by_shifting(&spec, &rule, &op, &params).unwrap();
        assert_eq!(srep.mesh(), rep.mesh());
        assert_eq!(hrep.mesh(), rep.mesh());
        assert_eq!(shift.mesh(), rep.mesh());
        for t in uniform_times(1.0, 37) {
            let u = sol.value_at(t).unwrap();
            assert_eq!(split.value_at(t).unwrap(), u);
            assert_eq!(shift.value_at(t).unwrap(), u);
        }
    }

    #[test]
    fn strategies_agree_on_ex1() {
        let alpha = 0.4;
        let tol = 1e-3;
        let spec = make_problem(ProblemId::Ex1, alpha, None)
            .unwrap()
            .with_spatial_cells(10)
            .unwrap();
        let op = assemble(&spec.spatial).unwrap();
        let rule = CollocationRule::new(4).unwrap();
        let params = AdaptiveParams::default().with_tol(tol);
        let (split, srep) = solve_by_splitting(&spec, &rule, &op, &params).unwrap();
        let (shift, hrep) = solve_by_shifting(&spec, &rule, &op, &params).unwrap();
        assert_eq!(srep.error_bound(), 4.0 * tol);
        assert_eq!(hrep.error_bound(), 4.0 * tol);
        assert_eq!(shift.segments.len(), 4);
        let times = uniform_times(1.0, 100);
        assert!(max_difference(&split, &shift, &op, &times).unwrap() < 8.0 * tol);
        // spatial error of 10 cubic cells stays well below the tolerance
        let ex = Reference::Ex1 { alpha };
        assert!(max_error(&split, &ex, &op, &times).unwrap() < 4.0 * tol);
        assert!(max_error(&shift, &ex, &op, &times).unwrap() < 4.0 * tol);
        assert!(hrep.max_barrier_ratio() < 1.0 && srep.max_barrier_ratio() < 1.0);
    }

    #[test]
    fn splitting_weights() {
        let spec = make_problem(ProblemId::Ex1, 0.4, None)
            .unwrap()
            .with_spatial_cells(4)
            .unwrap();
        let op = assemble(&spec.spatial).unwrap();
        let rule = CollocationRule::new(4).unwrap();
        let params = AdaptiveParams::default().with_tol(1e-2);
        let w = [1.0, 0.5, 0.25, 0.125];
        let (_, rep) = solve_by_splitting_weighted(&spec, &rule, &op, &params, &w).unwrap();
        assert!((rep.error_bound() - 1.875e-2).abs() < 1e-15);
        assert!(solve_by_splitting_weighted(&spec, &rule, &op, &params, &w[..2]).is_err());
        assert!(
            solve_by_splitting_weighted(&spec, &rule, &op, &params, &[1.0, 0.0, 1.0, 1.0]).is_err()
        );
    }

    #[test]
    fn subproblem_errors_are_tagged() {
        let spec = make_problem(ProblemId::Ex1, 0.4, None)
            .unwrap()
            .with_spatial_cells(4)
            .unwrap();
        let op = assemble(&spec.spatial).unwrap();
        let rule = CollocationRule::new(4).unwrap();
        let params = AdaptiveParams {
            max_forced_steps: 0,
            tau_min: 1e-3,
            tau_init: Some(1e-3),
            ..Default::default()
        };
        match solve_by_splitting(&spec, &rule, &op, &params) {
            Err(Error::Subproblem { index, .. }) => assert!(index < 4),
            other => panic!("expected a subproblem error, got {:?}", other.map(|_| ())),
        }
    }
}
