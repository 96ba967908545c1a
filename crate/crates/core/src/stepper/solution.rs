use nalgebra::{DMatrixView, DVector};

use super::rule::CollocationRule;
use crate::error::{Error, Result};

/// One solved cell: nodal values at `c_0..c_m` and the monomial coefficients
/// of `dp/dσ`, both in the working basis of the system.
#[derive(Clone, Debug)]
pub struct CellBlock {
    pub left: f64,
    pub right: f64,
    /// `(m+1) × ndof`, node-major.
    pub work: Vec<f64>,
    /// `m × ndof`, coefficient-major.
    pub deriv: Vec<f64>,
    /// Physical nodal values, same layout as `work`.
    pub phys: Vec<f64>,
}

impl CellBlock {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

/// Continuous piecewise polynomial in time with values in the dof space.
///
/// Times are local: the solution lives on `origin + [0, mesh.last()]`.
#[derive(Clone, Debug)]
pub struct PiecewiseSolution {
    origin: f64,
    ndof: usize,
    rule: CollocationRule,
    mesh: Vec<f64>,
    initial_work: Vec<f64>,
    initial_phys: Vec<f64>,
    work: Vec<f64>,
    deriv: Vec<f64>,
    phys: Vec<f64>,
}

impl PiecewiseSolution {
    pub fn new(
        origin: f64,
        rule: CollocationRule,
        initial_work: Vec<f64>,
        initial_phys: Vec<f64>,
    ) -> Self {
        assert_eq!(initial_work.len(), initial_phys.len());
        Self {
            origin,
            ndof: initial_work.len(),
            rule,
            mesh: vec![0.0],
            initial_work,
            initial_phys,
            work: Vec::new(),
            deriv: Vec::new(),
            phys: Vec::new(),
        }
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn rule(&self) -> &CollocationRule {
        &self.rule
    }

    /// Local mesh nodes, starting at 0.
    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn ncells(&self) -> usize {
        self.mesh.len() - 1
    }

    pub fn end(&self) -> f64 {
        *self.mesh.last().unwrap()
    }

    pub fn cell(&self, k: usize) -> (f64, f64) {
        (self.mesh[k], self.mesh[k + 1])
    }

    /// Working-basis values at the last node.
    pub fn last_work(&self) -> &[f64] {
        let n = self.ndof;
        if self.ncells() == 0 {
            &self.initial_work
        } else {
            let stride = (self.rule.order() + 1) * n;
            let start = self.ncells() * stride - n;
            &self.work[start..start + n]
        }
    }

    pub fn initial_phys(&self) -> &[f64] {
        &self.initial_phys
    }

    /// Derivative coefficients of all cells as an `ndof × (ncells·m)` matrix.
    pub fn deriv_matrix(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.deriv, self.ndof, self.ncells() * self.rule.order())
    }

    /// Working values of cell `k` at all nodes.
    pub fn work_slice(&self, k: usize) -> &[f64] {
        let stride = (self.rule.order() + 1) * self.ndof;
        &self.work[k * stride..(k + 1) * stride]
    }

    /// Working derivative coefficients of cell `k`.
    pub fn deriv_slice(&self, k: usize) -> &[f64] {
        let stride = self.rule.order() * self.ndof;
        &self.deriv[k * stride..(k + 1) * stride]
    }

    /// Physical values of cell `k` at collocation node `j`.
    pub fn nodal_values(&self, k: usize, j: usize) -> &[f64] {
        let n = self.ndof;
        let start = (k * (self.rule.order() + 1) + j) * n;
        &self.phys[start..start + n]
    }

    pub fn push(&mut self, block: CellBlock) -> Result<()> {
        let m = self.rule.order();
        let n = self.ndof;
        if block.left != self.end() || !(block.right > block.left) {
            return Err(Error::InvalidParams(format!(
                "cell [{}, {}] does not extend the mesh ending at {}",
                block.left,
                block.right,
                self.end()
            )));
        }
        if block.work.len() != (m + 1) * n
            || block.deriv.len() != m * n
            || block.phys.len() != (m + 1) * n
        {
            return Err(Error::DimensionMismatch {
                expected: (m + 1) * n,
                got: block.work.len(),
            });
        }
        self.mesh.push(block.right);
        self.work.extend_from_slice(&block.work);
        self.deriv.extend_from_slice(&block.deriv);
        self.phys.extend_from_slice(&block.phys);
        Ok(())
    }

    /// Drop every cell that starts at or after local time `t`.
    pub fn truncate_at(&mut self, t: f64) {
        let keep = self.mesh[..self.ncells()].partition_point(|&x| x < t);
        let m = self.rule.order();
        let n = self.ndof;
        self.mesh.truncate(keep + 1);
        self.work.truncate(keep * (m + 1) * n);
        self.phys.truncate(keep * (m + 1) * n);
        self.deriv.truncate(keep * m * n);
    }

    /// Index of the cell owning local time `t` (left-closed, last cell closed).
    pub fn locate(&self, t: f64) -> Result<usize> {
        let end = self.end();
        if self.ncells() == 0 || !(t >= 0.0 && t <= end) {
            return Err(Error::OutOfSpan {
                t,
                lo: 0.0,
                hi: end,
            });
        }
        let k = self.mesh.partition_point(|&x| x <= t);
        Ok((k.max(1) - 1).min(self.ncells() - 1))
    }

    /// Physical dof vector at local time `t`.
    pub fn evaluate(&self, t: f64) -> Result<DVector<f64>> {
        if self.ncells() == 0 && t == 0.0 {
            return Ok(DVector::from_column_slice(&self.initial_phys));
        }
        let k = self.locate(t)?;
        let (a, b) = self.cell(k);
        let sigma = ((t - a) / (b - a)).clamp(0.0, 1.0);
        let nodes = self.rule.nodes();
        let hit = if t == a {
            Some(0)
        } else if t == b {
            Some(nodes.len() - 1)
        } else {
            nodes.iter().position(|&c| a + c * (b - a) == t)
        };
        if let Some(j) = hit {
            return Ok(DVector::from_column_slice(self.nodal_values(k, j)));
        }
        let ell = self.rule.basis_values(sigma);
        let mut out = DVector::zeros(self.ndof);
        for (j, l) in ell.iter().enumerate() {
            out.axpy(
                *l,
                &DVector::from_column_slice(self.nodal_values(k, j)),
                1.0,
            );
        }
        Ok(out)
    }

    /// Physical dof vector at global time `t`.
    pub fn evaluate_global(&self, t: f64) -> Result<DVector<f64>> {
        self.evaluate(t - self.origin)
    }
}
