//! Adaptive time stepping: grow/shrink cells until every residual sample
//! lies below `TOL·B(t)`, cutting cells at the known singular positions.

use crate::barrier::{extend_for_negative_lambda, BarrierSpec, DEFAULT_RHO};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::spatial::{assemble, AssembledOperator};
use crate::stepper::{CellBlock, CollocationRule, Frame, PiecewiseSolution, SemiDiscreteSystem};

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveParams {
    pub tol: f64,
    pub q: f64,
    /// Initial cell width; `None` means `1e-2·T`.
    pub tau_init: Option<f64>,
    pub tau_min: f64,
    pub detect: bool,
    pub detect_step_threshold: f64,
    pub detect_min_distance: f64,
    /// Consecutive forced cells tolerated before reporting locking.
    pub max_forced_steps: usize,
    pub max_restarts: usize,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            q: 1.2,
            tau_init: None,
            tau_min: 1e-14,
            detect: false,
            detect_step_threshold: 1e-13,
            detect_min_distance: 1e-4,
            max_forced_steps: 64,
            max_restarts: 32,
        }
    }
}

impl AdaptiveParams {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_detection(mut self, on: bool) -> Self {
        self.detect = on;
        self
    }

    pub fn tau_init_for(&self, horizon: f64) -> f64 {
        self.tau_init.unwrap_or(1e-2 * horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return bad(format!("Q must exceed 1, got {}", self.q));
        }
        if !(self.tau_min > 0.0) {
            return bad(format!("tau_min must be positive, got {}", self.tau_min));
        }
        if let Some(t) = self.tau_init {
            if !(t >= self.tau_min && t.is_finite()) {
                return bad(format!("tau_init must be at least tau_min, got {t}"));
            }
        }
        if !(self.detect_step_threshold > 0.0 && self.detect_min_distance > 0.0) {
            return bad("detection thresholds must be positive".into());
        }
        Ok(())
    }
}

/// Flag of the inner loop: fresh cell, growing after a pass, shrinking after a fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    Fresh = 0,
    Growing = 1,
    Shrinking = 2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Grow,
    Shrink,
    /// Passed at the cut point `T_cmp`.
    AcceptAtCut,
    /// Passed after shrinking.
    Accept,
    /// Failed after growing; the stored cell is taken.
    AcceptRestored,
    /// Width fell below `tau_min`.
    Forced,
}

#[derive(Clone, Debug)]
pub struct ResidualSample {
    pub t: f64,
    pub residual: f64,
    pub barrier: f64,
}

#[derive(Clone, Debug)]
pub struct CellRecord {
    /// Global end points.
    pub left: f64,
    pub right: f64,
    pub forced: bool,
    pub actions: Vec<Action>,
    pub samples: Vec<ResidualSample>,
}

impl CellRecord {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub cells: Vec<CellRecord>,
    pub detected_onsets: Vec<f64>,
    pub restarts: usize,
    pub solves: usize,
    /// Sum of barrier weights of the final barrier.
    pub weight_total: f64,
    /// Onsets of the final barrier.
    pub barrier_onsets: Vec<f64>,
    pub tol: f64,
}

impl RunReport {
    pub fn step_count(&self) -> usize {
        self.cells.len()
    }

    pub fn forced_count(&self) -> usize {
        self.cells.iter().filter(|c| c.forced).count()
    }

    pub fn first_width(&self) -> Option<f64> {
        self.cells.first().map(CellRecord::width)
    }

    pub fn min_width(&self) -> Option<f64> {
        self.cells
            .iter()
            .map(CellRecord::width)
            .min_by(f64::total_cmp)
    }

    /// Guaranteed error bound `TOL·W`.
    pub fn error_bound(&self) -> f64 {
        self.tol * self.weight_total
    }

    /// Largest `‖Res‖ / (TOL·B)` over the samples of unforced cells.
    pub fn max_barrier_ratio(&self) -> f64 {
        self.cells
            .iter()
            .filter(|c| !c.forced)
            .flat_map(|c| &c.samples)
            .map(|s| s.residual / (self.tol * s.barrier))
            .fold(0.0, f64::max)
    }

    /// Global mesh nodes.
    pub fn mesh(&self) -> Vec<f64> {
        let mut nodes: Vec<f64> = self.cells.first().map(|c| c.left).into_iter().collect();
        nodes.extend(self.cells.iter().map(|c| c.right));
        nodes
    }

    pub fn absorb(&mut self, other: RunReport) {
        self.cells.extend(other.cells);
        self.detected_onsets.extend(other.detected_onsets);
        self.restarts += other.restarts;
        self.solves += other.solves;
    }
}

/// Whether a cell's action trace is a legal run of the grow/shrink automaton:
/// grows or shrinks (never both), then exactly one closing action.
pub fn is_valid_trace(actions: &[Action]) -> bool {
    let Some((last, moves)) = actions.split_last() else {
        return false;
    };
    let grew = moves.contains(&Action::Grow);
    let shrank = moves.contains(&Action::Shrink);
    if moves
        .iter()
        .any(|a| !matches!(a, Action::Grow | Action::Shrink))
        || (grew && shrank)
    {
        return false;
    }
    match last {
        Action::AcceptAtCut => true,
        Action::Accept => shrank,
        Action::AcceptRestored => grew,
        Action::Forced => !grew,
        Action::Grow | Action::Shrink => false,
    }
}

/// Onset candidate from a collapsing step: the left node of the failing cell,
/// if the width is below the threshold and the node is far enough from the
/// last known onset.
pub fn detect_singularity(
    onsets: &[f64],
    width: f64,
    node: f64,
    params: &AdaptiveParams,
) -> Option<f64> {
    let last = onsets
        .iter()
        .copied()
        .filter(|&s| s <= node)
        .fold(f64::NEG_INFINITY, f64::max);
    (width < params.detect_step_threshold && node - last > params.detect_min_distance)
        .then_some(node)
}

enum Outcome {
    Done,
    Detected(f64),
}

/// `node - prev >= tau_min`, allowing for the rounding of `node` itself so a
/// cell proposed with width `tau_min` far from zero is still tried.
fn reaches_min(prev: f64, node: f64, tau_min: f64) -> bool {
    node - prev + 2.0 * f64::EPSILON * node.abs() >= tau_min
}

struct Segment<'a> {
    sys: &'a SemiDiscreteSystem,
    history: &'a [PiecewiseSolution],
    horizon: f64,
    params: &'a AdaptiveParams,
}

impl Segment<'_> {
    fn samples(
        &self,
        origin: f64,
        block: &CellBlock,
        res: &[(f64, f64)],
        bspec: &BarrierSpec,
    ) -> (bool, Vec<ResidualSample>) {
        let mut pass = true;
        let samples = res
            .iter()
            .map(|&(off, r)| {
                let b = bspec.value_at(origin, block.left, off);
                if !(r < self.params.tol * b) {
                    pass = false;
                }
                ResidualSample {
                    t: (origin + block.left) + off,
                    residual: r,
                    barrier: b,
                }
            })
            .collect();
        (pass, samples)
    }

    /// Advance `sol` to the horizon, or stop at a detected onset.
    fn run(
        &self,
        sol: &mut PiecewiseSolution,
        bspec: &BarrierSpec,
        report: &mut RunReport,
    ) -> Result<Outcome> {
        let p = self.params;
        let origin = sol.origin();
        let cut = |t: f64| -> f64 {
            let local = bspec.onsets().iter().map(|s| s - origin).find(|&s| s > t);
            local.map_or(self.horizon, |s| s.min(self.horizon))
        };
        let mut proposal = p.tau_init_for(self.horizon);
        let mut forced_run = 0usize;

        while sol.end() < self.horizon {
            let prev = sol.end();
            let t_cmp = cut(prev);
            let mut node = if prev + proposal >= t_cmp {
                t_cmp
            } else {
                prev + proposal
            };
            let mut flag = Flag::Fresh;
            let mut stash: Option<(CellBlock, Vec<ResidualSample>)> = None;
            let mut actions = Vec::new();
            let mut accepted: Option<(CellBlock, Vec<ResidualSample>)> = None;

            while reaches_min(prev, node, p.tau_min) {
                let width = node - prev;
                if p.detect {
                    if let Some(s) = detect_singularity(bspec.onsets(), width, origin + prev, p) {
                        return Ok(Outcome::Detected(s));
                    }
                }
                let frame = Frame::new(self.history, sol);
                let (block, res) = self.sys.step(frame, node)?;
                report.solves += 1;
                let (pass, samples) = self.samples(origin, &block, &res, bspec);
                if pass {
                    if node >= t_cmp {
                        actions.push(Action::AcceptAtCut);
                        proposal = width;
                        accepted = Some((block, samples));
                        break;
                    }
                    if flag == Flag::Shrinking {
                        actions.push(Action::Accept);
                        proposal = width;
                        accepted = Some((block, samples));
                        break;
                    }
                    stash = Some((block, samples));
                    node = (prev + p.q * width).min(t_cmp);
                    flag = Flag::Growing;
                    actions.push(Action::Grow);
                } else if flag == Flag::Growing {
                    let (block, samples) = stash.take().expect("growing implies a stored cell");
                    actions.push(Action::AcceptRestored);
                    proposal = block.width();
                    accepted = Some((block, samples));
                    break;
                } else {
                    node = prev + width / p.q;
                    flag = Flag::Shrinking;
                    actions.push(Action::Shrink);
                }
            }

            let forced = accepted.is_none();
            let (block, samples) = match accepted {
                Some(a) => {
                    forced_run = 0;
                    a
                }
                None => {
                    forced_run += 1;
                    let node = (prev + p.tau_min).min(t_cmp);
                    if forced_run > p.max_forced_steps || !(node > prev) {
                        return Err(Error::Locking {
                            t: origin + prev,
                            forced: forced_run,
                        });
                    }
                    log::debug!(
                        "forced cell of width {} at t = {}",
                        node - prev,
                        origin + prev
                    );

                    let frame = Frame::new(self.history, sol);
                    let (block, res) = self.sys.step(frame, node)?;
                    report.solves += 1;
                    let (_, samples) = self.samples(origin, &block, &res, bspec);
                    actions.push(Action::Forced);
                    proposal = p.tau_min;
                    (block, samples)
                }
            };
            report.cells.push(CellRecord {
                left: origin + block.left,
                right: origin + block.right,
                forced,
                actions,
                samples,
            });
            sol.push(block)?;
        }
        Ok(Outcome::Done)
    }
}

/// Run the controller for one solution segment with a prebuilt system.
///
/// `history` holds frozen earlier segments (shifted operator); `horizon` is
/// local to `origin`.
pub fn run_segment(
    sys: &SemiDiscreteSystem,
    history: &[PiecewiseSolution],
    start: PiecewiseSolution,
    horizon: f64,
    bspec: &BarrierSpec,
    params: &AdaptiveParams,
) -> Result<(PiecewiseSolution, RunReport)> {
    params.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidParams(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let seg = Segment {
        sys,
        history,
        horizon,
        params,
    };
    let mut sol = start;
    let mut bspec = bspec.clone();
    let mut report = RunReport {
        tol: params.tol,
        ..RunReport::default()
    };
    let origin = sol.origin();
    loop {
        match seg.run(&mut sol, &bspec, &mut report)? {
            Outcome::Done => break,
            Outcome::Detected(s) => {
                report.restarts += 1;
                if report.restarts > params.max_restarts {
                    return Err(Error::RestartBudget(params.max_restarts));
                }
                let restart = bspec
                    .onsets()
                    .iter()
                    .copied()
                    .filter(|&x| x <= s)
                    .fold(0.0, f64::max);
                log::info!("singularity detected at t = {s}; restarting from {restart}");
                bspec.insert_onset(s, 1.0)?;
                report.detected_onsets.push(s);
                let local = (restart - origin).max(0.0);
                sol.truncate_at(local);
                report.cells.retain(|c| c.left < restart);
            }
        }
    }
    report.weight_total = bspec.total_weight();
    report.barrier_onsets = bspec.onsets().to_vec();
    Ok((sol, report))
}

/// Adaptive solve of the whole problem with the given barrier.
pub fn run_adaptive(
    spec: &ProblemSpec,
    bspec: &BarrierSpec,
    rule: &CollocationRule,
    op: &AssembledOperator,
    params: &AdaptiveParams,
) -> Result<(PiecewiseSolution, RunReport)> {
    let sys = SemiDiscreteSystem::new(spec, op, rule)?;
    run_segment(&sys, &[], sys.start(0.0), spec.horizon, bspec, params)
}

/// [`run_adaptive`] with singularity detection switched on.
pub fn run_with_detection(
    spec: &ProblemSpec,
    bspec: &BarrierSpec,
    rule: &CollocationRule,
    op: &AssembledOperator,
    params: &AdaptiveParams,
) -> Result<(PiecewiseSolution, RunReport)> {
    let params = params.clone().with_detection(true);
    run_adaptive(spec, bspec, rule, op, &params)
}

/// Which barrier a problem is solved with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BarrierKind {
    /// `S = {0}`.
    Plain,
    /// Unit weights at every (shifted) onset of the right-hand side, extended
    /// with [`DEFAULT_RHO`] when `λ < 0`.
    Generalized,
}

pub fn barrier_for(spec: &ProblemSpec, kind: BarrierKind) -> Result<BarrierSpec> {
    let lambda = spec.lambda();
    match kind {
        BarrierKind::Plain => BarrierSpec::plain(spec.alpha, lambda),
        BarrierKind::Generalized => {
            let b = BarrierSpec::unit(spec.alpha, lambda, spec.effective_onsets())?;
            Ok(extend_for_negative_lambda(&b, spec.horizon, DEFAULT_RHO))
        }
    }
}

/// Assemble the operator and run with the default order-4 rule.
pub fn solve(
    spec: &ProblemSpec,
    kind: BarrierKind,
    params: &AdaptiveParams,
) -> Result<(PiecewiseSolution, RunReport)> {
    let op = assemble(&spec.spatial)?;
    let rule = CollocationRule::new(4)?;
    run_adaptive(spec, &barrier_for(spec, kind)?, &rule, &op, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_problem, ProblemId, EX_ONSETS};

    #[test]
    fn detection_examples() {
        let p = AdaptiveParams::default().with_detection(true);
        assert_eq!(detect_singularity(&[0.0], 5e-14, 0.3333, &p), Some(0.3333));
        assert_eq!(
            detect_singularity(&[0.0, 0.3333], 5e-14, 0.3333 + 1e-5, &p),
            None
        );
        assert_eq!(detect_singularity(&[0.0], 1e-6, 0.3333, &p), None);
    }

    #[test]
    fn trace_automaton() {
        use Action::*;
        assert!(is_valid_trace(&[AcceptAtCut]));
        assert!(is_valid_trace(&[Grow, Grow, AcceptRestored]));
        assert!(is_valid_trace(&[Shrink, Accept]));
        assert!(is_valid_trace(&[Shrink, Shrink, Forced]));
        assert!(!is_valid_trace(&[Shrink, Grow, AcceptRestored]));
        assert!(!is_valid_trace(&[Grow, Shrink, Accept]));
        assert!(!is_valid_trace(&[Accept]));
        assert!(!is_valid_trace(&[Grow]));
        assert!(!is_valid_trace(&[]));
    }

    #[test]
    fn params_validation() {
        assert!(AdaptiveParams::default().validate().is_ok());
        assert!(AdaptiveParams {
            q: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(AdaptiveParams::default().with_tol(0.0).validate().is_err());
        assert!(AdaptiveParams {
            tau_init: Some(1e-16),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(AdaptiveParams::default().tau_init_for(2.0), 2e-2);
    }

    #[test]
    fn min_width_check_tolerates_rounding() {
        let prev = 1.0 / 3.0 + 1e-12;
        let node = prev + 1e-14;
        assert!(reaches_min(prev, node, 1e-14));
        assert!(!reaches_min(prev, prev + 0.5e-14, 1e-14));
    }

    #[test]
    fn ex1_run_properties() {
        let spec = make_problem(ProblemId::Ex1, 0.4, None)
            .unwrap()
            .with_spatial_cells(8)
            .unwrap();
        let params = AdaptiveParams::default().with_tol(1e-3);
        let (sol, rep) = solve(&spec, BarrierKind::Generalized, &params).unwrap();
        let mesh = rep.mesh();
        assert_eq!(mesh, sol.mesh());
        assert_eq!(mesh[0], 0.0);
        assert_eq!(*mesh.last().unwrap(), 1.0);
        assert!(mesh.windows(2).all(|w| w[0] < w[1]));
        for s in &EX_ONSETS[1..] {
            let near = mesh
                .iter()
                .map(|m| (m - s).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(near < 1e-15, "no node at {s}");
        }
        assert!(rep.cells.iter().all(|c| is_valid_trace(&c.actions)));
        assert_eq!(rep.forced_count(), 0);
        assert!(rep.max_barrier_ratio() < 1.0);
        assert_eq!(rep.error_bound(), 4e-3);

        let (_, again) = solve(&spec, BarrierKind::Generalized, &params).unwrap();
        assert_eq!(again.mesh(), mesh);
    }

    #[test]
    fn detection_recovers_onsets() {
        let spec = make_problem(ProblemId::Ex1, 0.4, None)
            .unwrap()
            .with_spatial_cells(8)
            .unwrap();
        let params = AdaptiveParams::default()
            .with_tol(1e-3)
            .with_detection(true);
        let (sol, rep) = solve(&spec, BarrierKind::Plain, &params).unwrap();
        assert_eq!(rep.detected_onsets.len(), 3);
        for (d, s) in rep.detected_onsets.iter().zip(&EX_ONSETS[1..]) {
            assert!((d - s).abs() < 1e-3, "{d} vs {s}");
        }
        assert_eq!(rep.restarts, 3);
        assert_eq!(rep.mesh(), sol.mesh());
        assert_eq!(rep.weight_total, 4.0);
    }

    #[test]
    fn restart_budget() {
        let spec = make_problem(ProblemId::Ex1, 0.4, None)
            .unwrap()
            .with_spatial_cells(4)
            .unwrap();
        let params = AdaptiveParams {
            max_restarts: 1,
            ..AdaptiveParams::default()
                .with_tol(1e-3)
                .with_detection(true)
        };
        assert!(matches!(
            solve(&spec, BarrierKind::Plain, &params),
            Err(Error::RestartBudget(1))
        ));
    }

    #[test]
    fn locking_reported() {
        let spec = make_problem(ProblemId::Ex1, 0.4, None)
            .unwrap()
            .with_spatial_cells(4)
            .unwrap();
        let params = AdaptiveParams {
            max_forced_steps: 0,
            ..AdaptiveParams::default().with_tol(1e-3)
        };
        match solve(&spec, BarrierKind::Plain, &params) {
            Err(Error::Locking { t, forced }) => {
                assert!((t - 1.0 / 3.0).abs() < 1e-12, "{t}");
                assert_eq!(forced, 1);
            }
            other => panic!("expected locking, got {other:?}"),
        }
    }

    #[test]
    fn negative_lambda_barrier_is_extended() {
        let spec = make_problem(ProblemId::NegLambdaScalar, 0.4, None).unwrap();
        let b = barrier_for(&spec, BarrierKind::Generalized).unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(barrier_for(&spec, BarrierKind::Plain).unwrap().len(), 1);
    }
}
