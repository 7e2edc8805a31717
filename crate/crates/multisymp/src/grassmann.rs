//! Decomposable n-vectors over the graph chart: the lift of a velocity
//! matrix, tangent spaces to the normalized and scaled Grassmannians, their
//! annihilators (pseudofiber directions), and the degree-2 Plücker test.
//!
//! Axis convention throughout the crate: the fiber has dimension `n + k`
//! with base axes `x^mu = mu` for `mu = 1..n` and fiber axes `y^i = n + i`
//! for `i = 1..k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exterior::{binomial, multi_indices, ExteriorElement, MultiIndex, Variance};
use crate::linalg;

#[derive(Debug, Error)]
pub enum GrassmannError {
    #[error("annihilator needs a nonempty basis")]
    EmptyBasis,
    #[error("basis elements must share dimension {expected} and degree {degree}")]
    InconsistentBasis { expected: usize, degree: usize },
    #[error("decomposability test implemented for degree 2 only, got degree {0}")]
    UnsupportedDegree(usize),
    #[error("internal error: tangent basis rank {rank} < expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
}

/// Base dimension `n` and fiber dimension `k` of a first-order variational
/// problem on maps `R^n -> R^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemShape {
    pub n: usize,
    pub k: usize,
}

impl ProblemShape {
    pub fn new(n: usize, k: usize) -> Self {
        assert!(n >= 1 && k >= 1, "need n >= 1 and k >= 1");
        ProblemShape { n, k }
    }

    /// Total dimension of the configuration fiber.
    pub fn total_dim(&self) -> usize {
        self.n + self.k
    }

    /// Dimension of `Λ^n` over the fiber: C(n+k, n).
    pub fn lambda_dim(&self) -> usize {
        binomial(self.total_dim(), self.n)
    }

    pub fn x_axis(&self, mu: usize) -> u8 {
        debug_assert!((1..=self.n).contains(&mu));
        mu as u8
    }

    pub fn y_axis(&self, i: usize) -> u8 {
        debug_assert!((1..=self.k).contains(&i));
        (self.n + i) as u8
    }

    /// The volume form `dx^1 ∧ ... ∧ dx^n`.
    pub fn omega(&self) -> ExteriorElement {
        let idx: Vec<u8> = (1..=self.n as u8).collect();
        ExteriorElement::basis(self.total_dim(), Variance::Covector, &idx).unwrap()
    }
}

/// The coordinates `v^i_mu` of a linear map `T_x X -> T_y Y` in the graph
/// chart; row index `i` runs over fiber components, column `mu` over base
/// directions.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMatrix {
    pub shape: ProblemShape,
    entries: Vec<f64>,
}

impl VelocityMatrix {
    pub fn zeros(shape: ProblemShape) -> Self {
        VelocityMatrix {
            shape,
            entries: vec![0.0; shape.n * shape.k],
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(shape: ProblemShape, mut f: F) -> Self {
        let mut m = Self::zeros(shape);
        for i in 1..=shape.k {
            for mu in 1..=shape.n {
                m.set(i, mu, f(i, mu));
            }
        }
        m
    }

    /// Row-major `k x n` entries, `(i-1)*n + (mu-1)`.
    pub fn from_entries(shape: ProblemShape, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), shape.n * shape.k);
        assert!(entries.iter().all(|e| e.is_finite()), "velocity entries must be finite");
        VelocityMatrix { shape, entries }
    }

    pub fn get(&self, i: usize, mu: usize) -> f64 {
        self.entries[(i - 1) * self.shape.n + (mu - 1)]
    }

    pub fn set(&mut self, i: usize, mu: usize, value: f64) {
        assert!(value.is_finite());
        self.entries[(i - 1) * self.shape.n + (mu - 1)] = value;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Index pairs `(i, mu)` in the row-major order used for gradients and
    /// tangent bases.
    pub fn index_pairs(shape: ProblemShape) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(shape.n * shape.k);
        for i in 1..=shape.k {
            for mu in 1..=shape.n {
                out.push((i, mu));
            }
        }
        out
    }
}

/// The wedge factor `∂/∂x^mu + Σ_i v^i_mu ∂/∂y^i`.
fn graph_factor(v: &VelocityMatrix, mu: usize) -> ExteriorElement {
    let shape = v.shape;
    let mut f = ExteriorElement::zero(shape.total_dim(), 1, Variance::Vector);
    f.add_term(MultiIndex::new(&[shape.x_axis(mu)]).unwrap(), 1.0);
    for i in 1..=shape.k {
        let c = v.get(i, mu);
        if c != 0.0 {
            f.add_term(MultiIndex::new(&[shape.y_axis(i)]).unwrap(), c);
        }
    }
    f
}

/// The decomposable n-vector `z = ∧_mu (∂x^mu + Σ_i v^i_mu ∂y^i)`,
/// normalized so that `<z, ω> = 1`.
pub fn lift(v: &VelocityMatrix) -> ExteriorElement {
    let shape = v.shape;
    let mut z = ExteriorElement::scalar(shape.total_dim(), Variance::Vector, 1.0);
    for mu in 1..=shape.n {
        z = z.wedge(&graph_factor(v, mu)).expect("same fiber");
    }
    z
}

/// Wedge with one slot replaced, the product-rule derivative of `lift`.
fn lift_with_slot(v: &VelocityMatrix, slot: usize, replacement: &ExteriorElement) -> ExteriorElement {
    let shape = v.shape;
    let mut z = ExteriorElement::scalar(shape.total_dim(), Variance::Vector, 1.0);
    for mu in 1..=shape.n {
        let factor = if mu == slot {
            replacement.clone()
        } else {
            graph_factor(v, mu)
        };
        z = z.wedge(&factor).expect("same fiber");
    }
    z
}

/// `∂²z/∂v^i_mu ∂v^j_nu`: zero when the two slots coincide, otherwise the
/// wedge with slots `mu` and `nu` replaced by the fiber directions.
pub fn lift_second_derivative(
    v: &VelocityMatrix,
    (i, mu): (usize, usize),
    (j, nu): (usize, usize),
) -> ExteriorElement {
    let shape = v.shape;
    if mu == nu {
        return ExteriorElement::zero(shape.total_dim(), shape.n, Variance::Vector);
    }
    let mut z = ExteriorElement::scalar(shape.total_dim(), Variance::Vector, 1.0);
    for slot in 1..=shape.n {
        let factor = if slot == mu {
            ExteriorElement::basis(shape.total_dim(), Variance::Vector, &[shape.y_axis(i)]).unwrap()
        } else if slot == nu {
            ExteriorElement::basis(shape.total_dim(), Variance::Vector, &[shape.y_axis(j)]).unwrap()
        } else {
            graph_factor(v, slot)
        };
        z = z.wedge(&factor).expect("same fiber");
    }
    z
}

/// `∂z/∂v^i_mu` for all `(i, mu)` in row-major order: the tangent space to
/// the normalized decomposables `D^ω_q` at `lift(v)`, dimension `n*k`.
pub fn tangent_basis_omega(v: &VelocityMatrix) -> Result<Vec<ExteriorElement>, GrassmannError> {
    let shape = v.shape;
    let mut basis = Vec::with_capacity(shape.n * shape.k);
    for (i, mu) in VelocityMatrix::index_pairs(shape) {
        let dy = ExteriorElement::basis(shape.total_dim(), Variance::Vector, &[shape.y_axis(i)]).unwrap();
        basis.push(lift_with_slot(v, mu, &dy));
    }
    check_rank(&basis, shape)?;
    Ok(basis)
}

/// `tangent_basis_omega` plus the scaling direction `z` itself: the tangent
/// space to all decomposables `D^n_q` at `lift(v)`, dimension `n*k + 1`.
pub fn tangent_basis_full(v: &VelocityMatrix) -> Result<Vec<ExteriorElement>, GrassmannError> {
    let mut basis = tangent_basis_omega(v)?;
    basis.push(lift(v));
    check_rank(&basis, v.shape)?;
    Ok(basis)
}

fn check_rank(basis: &[ExteriorElement], shape: ProblemShape) -> Result<(), GrassmannError> {
    let m = coefficient_matrix(basis, shape.total_dim(), shape.n);
    let rank = linalg::rank(&m);
    if rank < basis.len() {
        return Err(GrassmannError::RankDeficient {
            rank,
            expected: basis.len(),
        });
    }
    Ok(())
}

fn coefficient_matrix(basis: &[ExteriorElement], dimension: usize, degree: usize) -> nalgebra::DMatrix<f64> {
    let cols = multi_indices(dimension, degree);
    nalgebra::DMatrix::from_fn(basis.len(), cols.len(), |r, c| basis[r].coefficient(&cols[c]))
}

/// Orthonormal basis of `{p : <zeta, p> = 0 for all zeta in span(basis)}`,
/// computed from the SVD null space of the coefficient matrix. Cardinality
/// is `C(n+k, n) - rank(basis)`.
pub fn annihilator(basis: &[ExteriorElement]) -> Result<Vec<ExteriorElement>, GrassmannError> {
    let first = basis.first().ok_or(GrassmannError::EmptyBasis)?;
    let dimension = first.dimension();
    let degree = first.degree();
    if basis.iter().any(|b| b.dimension() != dimension || b.degree() != degree) {
        return Err(GrassmannError::InconsistentBasis { expected: dimension, degree });
    }
    let cols = multi_indices(dimension, degree);
    let m = nalgebra::DMatrix::from_fn(basis.len(), cols.len(), |r, c| basis[r].coefficient(&cols[c]));
    let null = linalg::null_space(&m);
    Ok(null
        .into_iter()
        .map(|row| {
            let mut p = ExteriorElement::zero(dimension, degree, Variance::Covector);
            for (mi, c) in cols.iter().zip(row) {
                p.add_term(mi.clone(), c);
            }
            p
        })
        .collect())
}

/// Outcome of the Plücker decomposability test.
#[derive(Debug, Clone, Copy)]
pub struct DecomposabilityReport {
    pub decomposable: bool,
    /// Largest raw Plücker residual `X^{ab}X^{cd} - X^{ac}X^{bd} + X^{ad}X^{bc}`.
    pub max_residual: f64,
}

/// Evaluates all Plücker relations of a degree-2 multivector. Decomposable
/// iff the largest residual is below `1e-10 * max|X|^2`.
pub fn is_decomposable_2(x: &ExteriorElement) -> Result<DecomposabilityReport, GrassmannError> {
    if x.degree() != 2 {
        return Err(GrassmannError::UnsupportedDegree(x.degree()));
    }
    let coeff = |a: u8, b: u8| x.coefficient(&MultiIndex::new(&[a, b]).unwrap());
    let dim = x.dimension() as u8;
    let mut max_residual = 0.0f64;
    for a in 1..=dim {
        for b in (a + 1)..=dim {
            for c in (b + 1)..=dim {
                for d in (c + 1)..=dim {
                    let r = coeff(a, b) * coeff(c, d) - coeff(a, c) * coeff(b, d)
                        + coeff(a, d) * coeff(b, c);
                    max_residual = max_residual.max(r.abs());
                }
            }
        }
    }
    let scale = x.max_abs();
    Ok(DecomposabilityReport {
        decomposable: max_residual <= 1e-10 * scale * scale,
        max_residual,
    })
}

/// Closed-form generator of `(T_z D^2)^⊥` for the `n = k = 2` chart:
/// `det(v) dx^1∧dx^2 - ε_ij v^j_ν dy^i∧dx^ν + dy^1∧dy^2`.
pub fn pseudofiber_generator_22(v: &VelocityMatrix) -> ExteriorElement {
    let shape = v.shape;
    assert_eq!((shape.n, shape.k), (2, 2));
    let det = v.get(1, 1) * v.get(2, 2) - v.get(1, 2) * v.get(2, 1);
    let mut g = ExteriorElement::zero(4, 2, Variance::Covector);
    g.add_term(MultiIndex::new(&[1, 2]).unwrap(), det);
    g.add_term(MultiIndex::new(&[3, 4]).unwrap(), 1.0);
    // -ε_ij v^j_ν dy^i ∧ dx^ν in sorted coordinates: +ε_ij v^j_ν on (ν, 2+i)
    for nu in 1..=2u8 {
        g.add_term(MultiIndex::new(&[nu, 3]).unwrap(), v.get(2, nu as usize));
        g.add_term(MultiIndex::new(&[nu, 4]).unwrap(), -v.get(1, nu as usize));
    }
    g
}
