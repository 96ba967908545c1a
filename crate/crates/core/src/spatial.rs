//! Continuous cubic finite elements for `L[u] = -(a u')' + b u' + c u` on an
//! interval with homogeneous Dirichlet conditions.
//!
//! The scalar mode (`a ≡ 0`, one cell, `b ≡ 0`) bypasses the finite element
//! machinery: a single degree of freedom with unit mass and `A = c`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::function::ScalarFn;

/// Gauss-Legendre points and weights on [0, 1].
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

const REF_NODES: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

/// Spatially varying coefficient of the elliptic operator.
#[derive(Clone, Debug)]
pub enum Coefficient {
    Constant(f64),
    Function(ScalarFn),
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Function(f) => f.eval(x),
        }
    }

    /// True only for a literal zero constant.
    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
    }

    pub fn shifted(&self, by: f64) -> Coefficient {
        match self {
            Coefficient::Constant(c) => Coefficient::Constant(c + by),
            Coefficient::Function(f) => {
                let f = f.clone();
                Coefficient::Function(ScalarFn::new(move |x| f.eval(x) + by))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpatialOperatorSpec {
    pub domain: (f64, f64),
    pub ncells: usize,
    /// `a(x)`
    pub diffusion: Coefficient,
    /// `b(x)`
    pub convection: Coefficient,
    /// `c(x)`
    pub reaction: Coefficient,
    /// Interior sample points per cell for the sup norm.
    pub samples_per_cell: usize,
}

impl SpatialOperatorSpec {
    pub fn new(
        domain: (f64, f64),
        ncells: usize,
        diffusion: Coefficient,
        convection: Coefficient,
        reaction: Coefficient,
    ) -> Self {
        Self {
            domain,
            ncells,
            diffusion,
            convection,
            reaction,
            samples_per_cell: 4,
        }
    }

    /// `-u''` on `domain`.
    pub fn laplacian(domain: (f64, f64), ncells: usize) -> Self {
        Self::new(
            domain,
            ncells,
            Coefficient::Constant(1.0),
            Coefficient::Constant(0.0),
            Coefficient::Constant(0.0),
        )
    }

    /// `L[u] = c u` without spatial structure.
    pub fn scalar(reaction: f64) -> Self {
        Self::new(
            (0.0, 1.0),
            1,
            Coefficient::Constant(0.0),
            Coefficient::Constant(0.0),
            Coefficient::Constant(reaction),
        )
    }

    pub fn is_scalar(&self) -> bool {
        self.diffusion.is_zero()
    }

    pub fn validate(&self) -> Result<()> {
        let (xl, xr) = self.domain;
        if !(xl < xr) || !xl.is_finite() || !xr.is_finite() {
            return Err(Error::InvalidSpatial(format!(
                "empty or non-finite domain [{xl}, {xr}]"
            )));
        }
        if self.ncells == 0 {
            return Err(Error::InvalidSpatial(
                "at least one cell is required".into(),
            ));
        }
        if self.is_scalar() {
            if self.ncells != 1 || !self.convection.is_zero() {
                return Err(Error::InvalidSpatial(
                    "zero diffusion is only allowed in scalar mode (one cell, no convection)"
                        .into(),
                ));
            }
            return Ok(());
        }
        for x in self.dense_grid() {
            let a = self.diffusion.eval(x);
            if !(a > 0.0) {
                return Err(Error::InvalidSpatial(format!(
                    "diffusion must be positive, a({x}) = {a}"
                )));
            }
        }
        Ok(())
    }

    fn dense_grid(&self) -> impl Iterator<Item = f64> + '_ {
        let (xl, xr) = self.domain;
        let n = 10 * self.ncells;
        (0..=n).map(move |i| xl + (xr - xl) * i as f64 / n as f64)
    }
}

/// `λ = inf_Ω L[1] = inf c`, sampled on a grid with 10 points per cell.
pub fn compute_lambda(spec: &SpatialOperatorSpec) -> f64 {
    spec.dense_grid()
        .map(|x| spec.reaction.eval(x))
        .fold(f64::INFINITY, f64::min)
}

/// Matrices of the semi-discrete system `M u' + A u = F`.
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    pub mass: DMatrix<f64>,
    pub operator: DMatrix<f64>,
    pub dof_coords: Vec<f64>,
    sample_points: Vec<f64>,
    /// Basis values at the sample points, one row per sample.
    sample_matrix: DMatrix<f64>,
    symmetric: bool,
    scalar: bool,
    domain: (f64, f64),
    ncells: usize,
}

fn cubic_basis(xi: f64) -> ([f64; 4], [f64; 4]) {
    let mut vals = [0.0; 4];
    let mut ders = [0.0; 4];
    for j in 0..4 {
        let mut v = 1.0;
        let mut d = 0.0;
        for k in 0..4 {
            if k == j {
                continue;
            }
            let den = REF_NODES[j] - REF_NODES[k];
            d = d * (xi - REF_NODES[k]) / den + v / den;
            v *= (xi - REF_NODES[k]) / den;
        }
        vals[j] = v;
        ders[j] = d;
    }
    (vals, ders)
}

/// Interior dof index of local node `j` of cell `e`, if not on the boundary.
fn dof_index(e: usize, j: usize, ncells: usize) -> Option<usize> {
    let global = 3 * e + j;
    if global == 0 || global == 3 * ncells {
        None
    } else {
        Some(global - 1)
    }
}

pub fn assemble(spec: &SpatialOperatorSpec) -> Result<AssembledOperator> {
    spec.validate()?;
    let (xl, xr) = spec.domain;
    if spec.is_scalar() {
        let mid = 0.5 * (xl + xr);
        return Ok(AssembledOperator {
            mass: DMatrix::identity(1, 1),
            operator: DMatrix::from_element(1, 1, spec.reaction.eval(mid)),
            dof_coords: vec![mid],
            sample_points: vec![mid],
            sample_matrix: DMatrix::identity(1, 1),
            symmetric: true,
            scalar: true,
            domain: spec.domain,
            ncells: 1,
        });
    }

    let n = spec.ncells;
    let ndof = 3 * n - 1;
    let h = (xr - xl) / n as f64;
    let mut mass = DMatrix::zeros(ndof, ndof);
    let mut op = DMatrix::zeros(ndof, ndof);
    let quad: Vec<_> = GAUSS4
        .iter()
        .map(|&(xi, w)| (xi, w, cubic_basis(xi)))
        .collect();

    for e in 0..n {
        let x0 = xl + e as f64 * h;
        for (xi, w, (vals, ders)) in &quad {
            let x = x0 + xi * h;
            let a = spec.diffusion.eval(x);
            let b = spec.convection.eval(x);
            let c = spec.reaction.eval(x);
            for i in 0..4 {
                let Some(gi) = dof_index(e, i, n) else {
                    continue;
                };
                for j in 0..4 {
                    let Some(gj) = dof_index(e, j, n) else {
                        continue;
                    };
                    let phi_i = vals[i];
                    let phi_j = vals[j];
                    let dphi_i = ders[i] / h;
                    let dphi_j = ders[j] / h;
                    mass[(gi, gj)] += w * h * phi_i * phi_j;
                    op[(gi, gj)] +=
                        w * h * (a * dphi_i * dphi_j + b * dphi_j * phi_i + c * phi_i * phi_j);
                }
            }
        }
    }

    let dof_coords = (1..3 * n).map(|g| xl + g as f64 * h / 3.0).collect();

    let per_cell = spec.samples_per_cell;
    let mut sample_points = Vec::with_capacity(n * (per_cell + 1) + 1);
    let mut rows: Vec<(usize, [f64; 4])> = Vec::new();
    for e in 0..n {
        let x0 = xl + e as f64 * h;
        for s in 0..=per_cell {
            let xi = s as f64 / (per_cell + 1) as f64;
            sample_points.push(x0 + xi * h);
            rows.push((e, cubic_basis(xi).0));
        }
    }
    sample_points.push(xr);
    rows.push((n - 1, cubic_basis(1.0).0));
    let mut sample_matrix = DMatrix::zeros(sample_points.len(), ndof);
    for (r, (e, vals)) in rows.iter().enumerate() {
        for (j, v) in vals.iter().enumerate() {
            if let Some(g) = dof_index(*e, j, n) {
                sample_matrix[(r, g)] += v;
            }
        }
    }

    Ok(AssembledOperator {
        mass,
        operator: op,
        dof_coords,
        sample_points,
        sample_matrix,
        symmetric: spec.convection.is_zero(),
        scalar: false,
        domain: spec.domain,
        ncells: n,
    })
}

impl AssembledOperator {
    pub fn ndof(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_scalar(&self) -> bool {
        self.scalar
    }

    pub fn sample_points(&self) -> &[f64] {
        &self.sample_points
    }

    pub fn sample_matrix(&self) -> &DMatrix<f64> {
        &self.sample_matrix
    }

    /// Nodal interpolant of `f` at the interior dofs.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.ndof(), self.dof_coords.iter().map(|&x| f(x)))
    }

    /// Load vector `(f, φ_i)`.
    pub fn load_vector(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        if self.scalar {
            return DVector::from_element(1, f(self.dof_coords[0]));
        }
        let n = self.ncells;
        let (xl, xr) = self.domain;
        let h = (xr - xl) / n as f64;
        let mut load = DVector::zeros(self.ndof());
        for e in 0..n {
            let x0 = xl + e as f64 * h;
            for &(xi, w) in &GAUSS4 {
                let fx = f(x0 + xi * h);
                let (vals, _) = cubic_basis(xi);
                for (j, v) in vals.iter().enumerate() {
                    if let Some(g) = dof_index(e, j, n) {
                        load[g] += w * h * fx * v;
                    }
                }
            }
        }
        load
    }

    /// L2 projection of `f` onto the discrete space.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        let load = self.load_vector(f);
        self.mass
            .clone()
            .cholesky()
            .expect("mass matrix is symmetric positive definite")
            .solve(&load)
    }

    /// Values of the finite element function at every sample point.
    pub fn sample_values(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.sample_matrix * coeffs
    }

    /// Value of the finite element function at `x`.
    pub fn eval(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        if coeffs.len() != self.ndof() {
            return Err(Error::DimensionMismatch {
                expected: self.ndof(),
                got: coeffs.len(),
            });
        }
        if self.scalar {
            return Ok(coeffs[0]);
        }
        let (xl, xr) = self.domain;
        let h = (xr - xl) / self.ncells as f64;
        let e = (((x - xl) / h).floor().max(0.0) as usize).min(self.ncells - 1);
        let xi = (x - xl - e as f64 * h) / h;
        let (vals, _) = cubic_basis(xi);
        Ok(vals
            .iter()
            .enumerate()
            .filter_map(|(j, v)| dof_index(e, j, self.ncells).map(|g| v * coeffs[g]))
            .sum())
    }
}

/// Sup norm over the sample table: nodal points plus interior samples per cell.
pub fn linf_norm(op: &AssembledOperator, coeffs: &[f64]) -> Result<f64> {
    if coeffs.len() != op.ndof() {
        return Err(Error::DimensionMismatch {
            expected: op.ndof(),
            got: coeffs.len(),
        });
    }
    let v = DVector::from_column_slice(coeffs);
    Ok(op.sample_values(&v).amax())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn single_cell_laplacian_is_symmetric() {
        let op = assemble(&SpatialOperatorSpec::laplacian((0.0, PI), 1)).unwrap();
        assert_eq!(op.operator.shape(), (2, 2));
        assert_eq!(op.mass.shape(), (2, 2));
        assert!((&op.operator - op.operator.transpose()).amax() < 1e-14);
    }

    #[test]
    fn one_cell_has_two_interior_dofs_and_three_per_extra_cell() {
        for n in 1..6 {
            let op = assemble(&SpatialOperatorSpec::laplacian((0.0, 1.0), n)).unwrap();
            assert_eq!(op.ndof(), 3 * n - 1);
        }
    }

    #[test]
    fn rayleigh_quotient_of_sine() {
        let op = assemble(&SpatialOperatorSpec::laplacian((0.0, PI), 30)).unwrap();
        let v = op.interpolate(f64::sin);
        let num = v.dot(&(&op.operator * &v));
        let den = v.dot(&(&op.mass * &v));
        assert!((num / den - 1.0).abs() < 1e-6, "{}", num / den);
    }

    #[test]
    fn scalar_mode_is_reaction_times_identity() {
        let op = assemble(&SpatialOperatorSpec::scalar(-1.0)).unwrap();
        assert_eq!(op.ndof(), 1);
        assert_eq!(op.operator[(0, 0)], -op.mass[(0, 0)]);
        assert_eq!(linf_norm(&op, &[-0.25]).unwrap(), 0.25);
    }

    #[test]
    fn lambda_values() {
        assert_eq!(
            compute_lambda(&SpatialOperatorSpec::laplacian((0.0, PI), 30)),
            0.0
        );
        assert_eq!(compute_lambda(&SpatialOperatorSpec::scalar(-1.0)), -1.0);
        let mut spec = SpatialOperatorSpec::laplacian((0.0, PI), 30);
        spec.reaction = Coefficient::Constant(-1.0);
        assert_eq!(compute_lambda(&spec), -1.0);
        spec.reaction = Coefficient::Function(ScalarFn::new(|x| 2.0 + x.sin()));
        assert!((compute_lambda(&spec) - 2.0).abs() < 1e-15);
        let shifted = SpatialOperatorSpec {
            reaction: spec.reaction.shifted(0.75),
            ..spec.clone()
        };
        assert!((compute_lambda(&shifted) - compute_lambda(&spec) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn linf_norm_cases() {
        let op = assemble(&SpatialOperatorSpec::laplacian((0.0, PI), 30)).unwrap();
        assert_eq!(linf_norm(&op, &vec![0.0; op.ndof()]).unwrap(), 0.0);
        let s = op.interpolate(f64::sin);
        assert!((linf_norm(&op, s.as_slice()).unwrap() - 1.0).abs() < 1e-4);
        let mut unit = vec![0.0; op.ndof()];
        unit[17] = 1.0;
        assert!(linf_norm(&op, &unit).unwrap() >= 1.0);
        assert!(matches!(
            linf_norm(&op, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SpatialOperatorSpec::laplacian((1.0, 0.0), 3);
        assert!(assemble(&spec).is_err());
        spec.domain = (0.0, 1.0);
        spec.ncells = 0;
        assert!(assemble(&spec).is_err());
        let mut scalar = SpatialOperatorSpec::scalar(1.0);
        scalar.ncells = 2;
        assert!(assemble(&scalar).is_err());
        let mut negative = SpatialOperatorSpec::laplacian((0.0, 1.0), 3);
        negative.diffusion = Coefficient::Function(ScalarFn::new(|x| x - 0.5));
        assert!(assemble(&negative).is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let mut spec = SpatialOperatorSpec::laplacian((0.0, 2.0), 7);
        spec.convection = Coefficient::Function(ScalarFn::new(|x| 0.3 * x));
        spec.reaction = Coefficient::Function(ScalarFn::new(|x| 1.0 + x * x));
        let a = assemble(&spec).unwrap();
        let b = assemble(&spec).unwrap();
        assert_eq!(a.operator.as_slice(), b.operator.as_slice());
        assert_eq!(a.mass.as_slice(), b.mass.as_slice());
        assert!(!a.is_symmetric());
    }

    #[test]
    fn mass_matrix_integrates_constants() {
        // 1ᵀ M 1 over interior dofs equals ∫ φ_sum² which approaches the length for fine meshes;
        // with the exact interpolant of x(1-x) the mass norm matches ∫ x²(1-x)² = 1/30.
        let op = assemble(&SpatialOperatorSpec::laplacian((0.0, 1.0), 4)).unwrap();
        let v = op.interpolate(|x| x * (1.0 - x));
        assert!((v.dot(&(&op.mass * &v)) - 1.0 / 30.0).abs() < 1e-14);
        // and its energy ∫ (1-2x)² = 1/3.
        assert!((v.dot(&(&op.operator * &v)) - 1.0 / 3.0).abs() < 1e-14);
    }
}
