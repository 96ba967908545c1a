//! Continuous collocation in time for `∂_t^α U + K U = G(t)`, `K = M⁻¹A`.
//!
//! When the operator is symmetric the system is diagonalised once
//! (`A v = μ M v`) and each mode is an `m × m` solve; otherwise a dense
//! `(m·ndof)²` system is factored per distinct step width.

mod kernel;
mod rule;
mod solution;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, LU};

pub use kernel::KernelMoments;
pub use rule::{gauss_lobatto, CollocationRule};
pub use solution::{CellBlock, PiecewiseSolution};

use crate::error::{Error, Result};
use crate::function::ScalarFn;
use crate::problem::ProblemSpec;
use crate::spatial::AssembledOperator;
use crate::special::gamma_pos;

#[derive(Debug)]
enum Basis {
    Modal {
        v: DMatrix<f64>,
        vinv: DMatrix<f64>,
        mu: DVector<f64>,
    },
    Dense {
        k: DMatrix<f64>,
    },
}

impl Basis {
    fn to_work(&self, phys: &DVector<f64>) -> DVector<f64> {
        match self {
            Basis::Modal { vinv, .. } => vinv * phys,
            Basis::Dense { .. } => phys.clone(),
        }
    }

    fn apply_k(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Basis::Modal { mu, .. } => mu.component_mul(z),
            Basis::Dense { k } => k * z,
        }
    }
}

#[derive(Clone, Debug)]
struct Piece {
    onset: f64,
    temporal: ScalarFn,
    profile: DVector<f64>,
}

/// Where a new cell sits: earlier frozen segments plus the current one.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub history: &'a [PiecewiseSolution],
    pub current: &'a PiecewiseSolution,
}

impl<'a> Frame<'a> {
    pub fn new(history: &'a [PiecewiseSolution], current: &'a PiecewiseSolution) -> Self {
        Self { history, current }
    }

    pub fn single(current: &'a PiecewiseSolution) -> Self {
        Self {
            history: &[],
            current,
        }
    }
}

type DenseCache = Mutex<HashMap<u64, Arc<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>>>;

#[derive(Debug)]
pub struct SemiDiscreteSystem {
    alpha: f64,
    inv_gamma: f64,
    rule: CollocationRule,
    kernel: KernelMoments,
    /// `dhat[(i, l)] = Σ_n W_n(c_i) · [σ^n] ℓ_l'`.
    dhat: DMatrix<f64>,
    basis: Basis,
    ndof: usize,
    pieces: Vec<Piece>,
    u0_work: DVector<f64>,
    u0_phys: DVector<f64>,
    /// Maps working coefficients to values at the spatial sample points.
    sample_map: DMatrix<f64>,
    /// Maps working coefficients to physical dofs.
    to_phys: DMatrix<f64>,
    dense_cache: DenseCache,
}

const DENSE_CACHE_LIMIT: usize = 64;

impl SemiDiscreteSystem {
    pub fn new(
        problem: &ProblemSpec,
        op: &AssembledOperator,
        rule: &CollocationRule,
    ) -> Result<Self> {
        Self::build(problem, op, rule, !op.is_symmetric())
    }

    /// Same system solved through the dense collocation matrix even when a
    /// modal decomposition is available.
    pub fn new_dense(
        problem: &ProblemSpec,
        op: &AssembledOperator,
        rule: &CollocationRule,
    ) -> Result<Self> {
        Self::build(problem, op, rule, true)
    }

    fn build(
        problem: &ProblemSpec,
        op: &AssembledOperator,
        rule: &CollocationRule,
        dense: bool,
    ) -> Result<Self> {
        problem.validate()?;
        let alpha = problem.alpha;
        let m = rule.order();
        let ndof = op.ndof();
        let kernel = KernelMoments::new(alpha, m);
        let inv_gamma = 1.0 / gamma_pos(1.0 - alpha);

        let mut dhat = DMatrix::zeros(m + 1, m + 1);
        let mut w = vec![0.0; m];
        for (i, &c) in rule.nodes().iter().enumerate() {
            kernel.inside(c, &mut w);
            for l in 0..=m {
                dhat[(i, l)] = rule
                    .deriv_coeffs(l)
                    .iter()
                    .zip(&w)
                    .map(|(d, wn)| d * wn)
                    .sum();
            }
        }

        let chol =
            op.mass.clone().cholesky().ok_or_else(|| {
                Error::InvalidSpatial("mass matrix is not positive definite".into())
            })?;
        let basis = if !dense {
            let l = chol.l();
            let x = l
                .solve_lower_triangular(&op.operator)
                .ok_or_else(|| Error::InvalidSpatial("singular mass factor".into()))?;
            let c = l
                .solve_lower_triangular(&x.transpose())
                .ok_or_else(|| Error::InvalidSpatial("singular mass factor".into()))?;
            let c = (&c + c.transpose()) * 0.5;
            let eig = c.symmetric_eigen();
            let v = l
                .transpose()
                .solve_upper_triangular(&eig.eigenvectors)
                .ok_or_else(|| Error::InvalidSpatial("singular mass factor".into()))?;
            let vinv = eig.eigenvectors.transpose() * l.transpose();
            Basis::Modal {
                v,
                vinv,
                mu: eig.eigenvalues,
            }
        } else {
            Basis::Dense {
                k: chol.solve(&op.operator),
            }
        };

        let to_phys = match &basis {
            Basis::Modal { v, .. } => v.clone(),
            Basis::Dense { .. } => DMatrix::identity(ndof, ndof),
        };
        let sample_map = op.sample_matrix() * &to_phys;

        let pieces = problem
            .pieces
            .iter()
            .enumerate()
            .map(|(k, p)| Piece {
                onset: problem.effective_onset(k),
                temporal: p.temporal.clone(),
                profile: basis.to_work(&op.project(|x| p.spatial.eval(x))),
            })
            .collect();
        let u0_phys = op.interpolate(|x| problem.u0.eval(x));
        let u0_work = basis.to_work(&u0_phys);

        Ok(Self {
            alpha,
            inv_gamma,
            rule: rule.clone(),
            kernel,
            dhat,
            basis,
            ndof,
            pieces,
            u0_work,
            u0_phys,
            sample_map,
            to_phys,
            dense_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn rule(&self) -> &CollocationRule {
        &self.rule
    }

    pub fn is_modal(&self) -> bool {
        matches!(self.basis, Basis::Modal { .. })
    }

    /// Empty solution at `origin` holding the initial data.
    pub fn start(&self, origin: f64) -> PiecewiseSolution {
        PiecewiseSolution::new(
            origin,
            self.rule.clone(),
            self.u0_work.as_slice().to_vec(),
            self.u0_phys.as_slice().to_vec(),
        )
    }

    /// Empty solution at `origin` continuing from the last value of `prev`.
    pub fn continue_from(&self, origin: f64, prev: &PiecewiseSolution) -> PiecewiseSolution {
        let work = DVector::from_column_slice(prev.last_work());
        let phys = &self.to_phys * &work;
        PiecewiseSolution::new(
            origin,
            self.rule.clone(),
            work.as_slice().to_vec(),
            phys.as_slice().to_vec(),
        )
    }

    pub fn to_physical(&self, work: &[f64]) -> DVector<f64> {
        &self.to_phys * DVector::from_column_slice(work)
    }

    /// Cell through the given physical values at the collocation nodes.
    pub fn block_from_phys(
        &self,
        left: f64,
        right: f64,
        nodal: &[DVector<f64>],
    ) -> Result<CellBlock> {
        let m = self.rule.order();
        if nodal.len() != m + 1 {
            return Err(Error::DimensionMismatch {
                expected: m + 1,
                got: nodal.len(),
            });
        }
        let n = self.ndof;
        let mut z = DMatrix::zeros(n, m + 1);
        let mut phys = DMatrix::zeros(n, m + 1);
        for (j, v) in nodal.iter().enumerate() {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            z.column_mut(j).copy_from(&self.basis.to_work(v));
            phys.column_mut(j).copy_from(v);
        }
        Ok(self.finish_block(left, right, z, phys))
    }

    fn finish_block(
        &self,
        left: f64,
        right: f64,
        z: DMatrix<f64>,
        phys: DMatrix<f64>,
    ) -> CellBlock {
        let m = self.rule.order();
        // Σ_l ℓ_l' = 0, so differences to the first node give the same
        // polynomial and make constants exact.
        let mut deriv = DMatrix::zeros(self.ndof, m);
        for l in 1..=m {
            let diff = z.column(l) - z.column(0);
            for (k, d) in self.rule.deriv_coeffs(l).iter().enumerate() {
                deriv.column_mut(k).axpy(*d, &diff, 1.0);
            }
        }
        CellBlock {
            left,
            right,
            work: z.as_slice().to_vec(),
            deriv: deriv.as_slice().to_vec(),
            phys: phys.as_slice().to_vec(),
        }
    }

    /// Caputo history of all listed cells at the points `a + offs[e]` of the
    /// current frame, accumulated into the columns of `out`.
    fn add_history(
        &self,
        segs: &[(&PiecewiseSolution, usize)],
        origin: f64,
        a: f64,
        offs: &[f64],
        out: &mut DMatrix<f64>,
    ) {
        let m = self.rule.order();
        let mut buf = vec![0.0; m];
        for &(seg, ncells) in segs {
            if ncells == 0 {
                continue;
            }
            let od = origin - seg.origin();
            let mut wt = DMatrix::zeros(ncells * m, offs.len());
            for c in 0..ncells {
                let (l, r) = seg.cell(c);
                let hh = r - l;
                let base_l = (od - l) + a;
                let base_r = (od - r) + a;
                let scale = hh.powf(-self.alpha) * self.inv_gamma;
                for (e, &off) in offs.iter().enumerate() {
                    let theta = (base_l + off) / hh;
                    let gap = ((base_r + off) / hh).max(0.0);
                    self.kernel.beyond(theta, gap, &mut buf);
                    for n in 0..m {
                        wt[(c * m + n, e)] = scale * buf[n];
                    }
                }
            }
            let d = seg.deriv_matrix();
            let d = d.columns(0, ncells * m);
            out.gemm(1.0, &d, &wt, 1.0);
        }
    }

    fn frame_segments<'a>(
        frame: &Frame<'a>,
        current_cells: usize,
    ) -> Vec<(&'a PiecewiseSolution, usize)> {
        frame
            .history
            .iter()
            .map(|s| (s, s.ncells()))
            .chain(std::iter::once((frame.current, current_cells)))
            .collect()
    }

    /// `G` in working coordinates at local time `a + off`.
    fn rhs_work(&self, origin: f64, a: f64, off: f64, right: Option<f64>, out: &mut [f64]) {
        out.fill(0.0);
        for p in &self.pieces {
            let base = (origin - p.onset) + a;
            let arg = base + off;
            let active = match right {
                Some(r) if base < 0.0 && self.rule.left_limit() => r > p.onset - origin,
                _ => base >= 0.0 || arg >= 0.0,
            };
            if active {
                let v = p.temporal.eval(arg.max(0.0));
                if v != 0.0 {
                    for (o, g) in out.iter_mut().zip(p.profile.iter()) {
                        *o += v * g;
                    }
                }
            }
        }
    }

    fn dense_lu(&self, cc: f64) -> Result<Arc<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>> {
        let Basis::Dense { k } = &self.basis else {
            unreachable!()
        };
        let key = cc.to_bits();
        if let Some(lu) = self.dense_cache.lock().unwrap().get(&key) {
            return Ok(lu.clone());
        }
        let m = self.rule.order();
        let n = self.ndof;
        let mut big = DMatrix::zeros(m * n, m * n);
        for i in 0..m {
            for l in 0..m {
                let d = cc * self.dhat[(i + 1, l + 1)];
                for r in 0..n {
                    big[(i * n + r, l * n + r)] += d;
                }
                if i == l {
                    let mut blk = big.view_mut((i * n, l * n), (n, n));
                    blk += k;
                }
            }
        }
        let lu = Arc::new(big.lu());
        let mut cache = self.dense_cache.lock().unwrap();
        if cache.len() >= DENSE_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, lu.clone());
        Ok(lu)
    }

    /// Solve the collocation conditions on `[frame.current.end(), right]`.
    pub fn solve_cell(&self, frame: Frame<'_>, right: f64) -> Result<CellBlock> {
        let m = self.rule.order();
        let n = self.ndof;
        let sol = frame.current;
        let a = sol.end();
        let h = right - a;
        if !(h > 0.0) {
            return Err(Error::SingularSystem { width: h });
        }
        let origin = sol.origin();
        let nodes = self.rule.nodes();
        let offs: Vec<f64> = nodes[1..].iter().map(|c| c * h).collect();

        let mut rhs = DMatrix::zeros(n, m);
        let mut g = vec![0.0; n];
        for i in 0..m {
            let at_end = if i + 1 == m { Some(right) } else { None };
            self.rhs_work(origin, a, offs[i], at_end, &mut g);
            rhs.column_mut(i).copy_from_slice(&g);
        }
        let mut hist = DMatrix::zeros(n, m);
        self.add_history(
            &Self::frame_segments(&frame, sol.ncells()),
            origin,
            a,
            &offs,
            &mut hist,
        );
        rhs -= hist;

        let z0 = DVector::from_column_slice(sol.last_work());
        let cc = h.powf(-self.alpha) * self.inv_gamma;
        for i in 0..m {
            rhs.column_mut(i)
                .axpy(-cc * self.dhat[(i + 1, 0)], &z0, 1.0);
        }

        let mut z = DMatrix::zeros(n, m + 1);
        z.column_mut(0).copy_from(&z0);
        match &self.basis {
            Basis::Modal { mu, .. } => {
                let dd = self.dhat.view((1, 1), (m, m)) * cc;
                for d in 0..n {
                    let mut mat = dd.clone_owned();
                    for i in 0..m {
                        mat[(i, i)] += mu[d];
                    }
                    let b = DVector::from_iterator(m, (0..m).map(|i| rhs[(d, i)]));
                    let x = mat
                        .lu()
                        .solve(&b)
                        .ok_or(Error::SingularSystem { width: h })?;
                    if !x.iter().all(|v| v.is_finite()) {
                        return Err(Error::SingularSystem { width: h });
                    }
                    for i in 0..m {
                        z[(d, i + 1)] = x[i];
                    }
                }
            }
            Basis::Dense { .. } => {
                let lu = self.dense_lu(cc)?;
                let b = DVector::from_column_slice(rhs.as_slice());
                let x = lu.solve(&b).ok_or(Error::SingularSystem { width: h })?;
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(Error::SingularSystem { width: h });
                }
                z.view_mut((0, 1), (n, m)).copy_from_slice(x.as_slice());
            }
        }

        let phys = &self.to_phys * &z;
        Ok(self.finish_block(a, right, z, phys))
    }

    /// Sup-norm residual `G - ∂^α U - K U` at local offsets `offs` of `block`.
    fn residual_offsets(
        &self,
        frame: Frame<'_>,
        prefix: usize,
        block: &CellBlock,
        offs: &[f64],
        at_end: &[bool],
    ) -> Vec<f64> {
        let m = self.rule.order();
        let n = self.ndof;
        let origin = frame.current.origin();
        let a = block.left;
        let h = block.width();
        let mut r = DMatrix::zeros(n, offs.len());
        self.add_history(
            &Self::frame_segments(&frame, prefix),
            origin,
            a,
            offs,
            &mut r,
        );
        r.neg_mut();

        let z = DMatrix::from_column_slice(n, m + 1, &block.work);
        let deriv = DMatrix::from_column_slice(n, m, &block.deriv);
        let cc = h.powf(-self.alpha) * self.inv_gamma;
        let mut w = vec![0.0; m];
        let mut g = vec![0.0; n];
        for (e, &off) in offs.iter().enumerate() {
            let sigma = (off / h).clamp(0.0, 1.0);
            self.kernel.inside(sigma, &mut w);
            let mut col = r.column_mut(e);
            for (k, wk) in w.iter().enumerate() {
                col.axpy(-cc * wk, &deriv.column(k), 1.0);
            }
            let u = &z * DVector::from_vec(self.rule.basis_values(sigma));
            col -= self.basis.apply_k(&u);
            self.rhs_work(
                origin,
                a,
                off,
                if at_end[e] { Some(block.right) } else { None },
                &mut g,
            );
            for (c, gi) in col.iter_mut().zip(&g) {
                *c += gi;
            }
        }
        let vals = &self.sample_map * r;
        vals.column_iter().map(|c| c.amax()).collect()
    }

    /// Residual sup norms at the rule's sample points of a freshly solved
    /// cell, as `(offset from the cell's left end, ‖Res‖)` pairs.
    pub fn residual_samples(&self, frame: Frame<'_>, block: &CellBlock) -> Vec<(f64, f64)> {
        let h = block.width();
        let offs: Vec<f64> = self.rule.samples().iter().map(|s| s * h).collect();
        let flags = vec![false; offs.len()];
        let vals = self.residual_offsets(frame, frame.current.ncells(), block, &offs, &flags);
        offs.into_iter().zip(vals).collect()
    }

    /// Residual sup norm at local time `t` inside the solved span of
    /// `frame.current`.
    pub fn residual_at(&self, frame: Frame<'_>, t: f64) -> Result<f64> {
        let sol = frame.current;
        let k = sol.locate(t)?;
        let block = self.stored_block(sol, k);
        let off = t - block.left;
        let at_end = t == block.right;
        Ok(self.residual_offsets(frame, k, &block, &[off], &[at_end])[0])
    }

    fn stored_block(&self, sol: &PiecewiseSolution, k: usize) -> CellBlock {
        let (left, right) = sol.cell(k);
        let wm = sol.work_slice(k);
        let dm = sol.deriv_slice(k);
        CellBlock {
            left,
            right,
            work: wm.to_vec(),
            deriv: dm.to_vec(),
            phys: Vec::new(),
        }
    }

    /// Physical Caputo derivative of `frame.current` (with history) at local
    /// time `t`.
    pub fn caputo_eval(&self, frame: Frame<'_>, t: f64) -> Result<DVector<f64>> {
        let sol = frame.current;
        let m = self.rule.order();
        let n = self.ndof;
        let k = sol.locate(t)?;
        let (a, b) = sol.cell(k);
        let h = b - a;
        let off = t - a;
        let mut out = DMatrix::zeros(n, 1);
        self.add_history(
            &Self::frame_segments(&frame, k),
            sol.origin(),
            a,
            &[off],
            &mut out,
        );
        let block = self.stored_block(sol, k);
        let deriv = DMatrix::from_column_slice(n, m, &block.deriv);
        let mut w = vec![0.0; m];
        self.kernel.inside((off / h).clamp(0.0, 1.0), &mut w);
        let cc = h.powf(-self.alpha) * self.inv_gamma;
        for (j, wj) in w.iter().enumerate() {
            out.column_mut(0).axpy(cc * wj, &deriv.column(j), 1.0);
        }
        Ok(&self.to_phys * out.column(0))
    }

    /// Solve the next cell and sample its residual.
    pub fn step(&self, frame: Frame<'_>, right: f64) -> Result<(CellBlock, Vec<(f64, f64)>)> {
        let block = self.solve_cell(frame, right)?;
        let res = self.residual_samples(frame, &block);
        Ok((block, res))
    }
}
