//! The Legendre correspondence on `Λ^n T*N`: momentum coordinates and their
//! submanifold choices, the de Donder-Weyl and full Dedecker transforms,
//! Hamiltonian evaluation by Newton inversion of the correspondence,
//! enlarged and level pseudofibers, and degeneracy diagnosis.
//!
//! Momentum coordinate conventions (`e`, `p^mu_i`, higher components with
//! two or more fiber indices) follow the canonical basis
//! `dq^{a1} ∧ ... ∧ dq^{an}`, `a1 < ... < an`, with
//! `p^mu_i = (-1)^{n-mu} p_{sorted}` where `sorted` is the increasing
//! rearrangement of `(1, ..., mu-1, n+i, mu+1, ..., n)`.

use thiserror::Error;

use crate::exterior::{multi_indices, ExteriorElement, MultiIndex, Variance};
use crate::grassmann::{
    self, lift, lift_second_derivative, tangent_basis_full, tangent_basis_omega, GrassmannError,
    ProblemShape, VelocityMatrix,
};
use crate::lagrangian::{self, Density};
use crate::linalg;

#[derive(Debug, Error)]
pub enum LegendreError {
    #[error("shape mismatch: density expects {expected:?}")]
    ShapeMismatch { expected: ProblemShape },
    #[error("dDW momentum point must pin higher components to zero (got {0} on {1})")]
    HigherNotPinned(f64, String),
    #[error("higher component list has length {got}, layout expects {expected}")]
    HigherLength { got: usize, expected: usize },
    #[error("Newton diverged after {iterations} iterations, residual {residual:.3e}: outside correspondence domain{hint}")]
    OutsideCorrespondence {
        iterations: usize,
        residual: f64,
        hint: String,
    },
    #[error("degenerate point: singular correspondence Jacobian{hint}")]
    DegeneratePoint { hint: String },
    #[error(transparent)]
    Grassmann(#[from] GrassmannError),
}

/// Which submanifold of `Λ^n T*N` the momenta live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmanifoldChoice {
    /// De Donder-Weyl: every component with two or more fiber indices is
    /// pinned to zero.
    Ddw,
    /// Full Lepage-Dedecker: nothing pinned.
    Full,
}

/// How a degree-n multi-index sits in the (e, p^mu_i, higher) split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndexClass {
    /// The pure-base index `(1, ..., n)` carrying `e`.
    Volume,
    /// Exactly one fiber index: carries `p^mu_i` up to `sign`.
    Mixed { i: usize, mu: usize, sign: f64 },
    /// Two or more fiber indices.
    Higher,
}

/// Lexicographic enumeration of the momentum axes over a shape, with the
/// classification and sign bookkeeping the rest of the crate relies on.
#[derive(Debug, Clone)]
pub struct MomentumLayout {
    pub shape: ProblemShape,
    indices: Vec<MultiIndex>,
    classes: Vec<IndexClass>,
    volume_pos: usize,
    mixed_pos: Vec<usize>, // row-major (i, mu) -> position
}

impl MomentumLayout {
    pub fn new(shape: ProblemShape) -> Self {
        let n = shape.n;
        let indices = multi_indices(shape.total_dim(), n);
        let mut classes = Vec::with_capacity(indices.len());
        let mut volume_pos = 0;
        let mut mixed_pos = vec![usize::MAX; shape.n * shape.k];
        for (pos, mi) in indices.iter().enumerate() {
            let fiber: Vec<u8> = mi.indices().iter().copied().filter(|&a| a as usize > n).collect();
            let class = match fiber.len() {
                0 => {
                    volume_pos = pos;
                    IndexClass::Volume
                }
                1 => {
                    let i = fiber[0] as usize - n;
                    let mu = (1..=n)
                        .find(|&m| !mi.contains(m as u8))
                        .expect("one base index missing");
                    let sign = if (n - mu).is_multiple_of(2) { 1.0 } else { -1.0 };
                    mixed_pos[(i - 1) * n + (mu - 1)] = pos;
                    IndexClass::Mixed { i, mu, sign }
                }
                _ => IndexClass::Higher,
            };
            classes.push(class);
        }
        MomentumLayout {
            shape,
            indices,
            classes,
            volume_pos,
            mixed_pos,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn multi_index(&self, pos: usize) -> &MultiIndex {
        &self.indices[pos]
    }

    pub fn class(&self, pos: usize) -> IndexClass {
        self.classes[pos]
    }

    pub fn volume_position(&self) -> usize {
        self.volume_pos
    }

    /// Position and sign of `p^mu_i` in canonical coordinates.
    pub fn mixed_position(&self, i: usize, mu: usize) -> (usize, f64) {
        let pos = self.mixed_pos[(i - 1) * self.shape.n + (mu - 1)];
        match self.classes[pos] {
            IndexClass::Mixed { sign, .. } => (pos, sign),
            _ => unreachable!("mixed_pos table points at a mixed index"),
        }
    }

    /// Positions with two or more fiber indices, in layout order.
    pub fn higher_positions(&self) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, IndexClass::Higher))
            .map(|(pos, _)| pos)
            .collect()
    }

    /// Positions present on the chosen submanifold, in layout order.
    pub fn present_positions(&self, choice: SubmanifoldChoice) -> Vec<usize> {
        match choice {
            SubmanifoldChoice::Full => (0..self.len()).collect(),
            SubmanifoldChoice::Ddw => self
                .classes
                .iter()
                .enumerate()
                .filter(|(_, c)| !matches!(c, IndexClass::Higher))
                .map(|(pos, _)| pos)
                .collect(),
        }
    }

    /// Dense coefficient vector of a degree-n covector, in layout order.
    pub fn dense(&self, p: &ExteriorElement) -> Vec<f64> {
        self.indices.iter().map(|mi| p.coefficient(mi)).collect()
    }

    /// Covector from a dense coefficient vector in layout order.
    pub fn element(&self, coeffs: &[f64]) -> ExteriorElement {
        debug_assert_eq!(coeffs.len(), self.len());
        let mut p = ExteriorElement::zero(self.shape.total_dim(), self.shape.n, Variance::Covector);
        for (mi, &c) in self.indices.iter().zip(coeffs) {
            p.add_term(mi.clone(), c);
        }
        p
    }
}

/// A point of the chosen momentum submanifold over `q = (x, y)`.
#[derive(Debug, Clone)]
pub struct MomentumPoint {
    pub shape: ProblemShape,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: ExteriorElement,
    pub choice: SubmanifoldChoice,
}

impl MomentumPoint {
    pub fn new(
        shape: ProblemShape,
        x: Vec<f64>,
        y: Vec<f64>,
        p: ExteriorElement,
        choice: SubmanifoldChoice,
    ) -> Result<Self, LegendreError> {
        assert_eq!(x.len(), shape.n);
        assert_eq!(y.len(), shape.k);
        assert_eq!(p.dimension(), shape.total_dim());
        assert_eq!(p.degree(), shape.n);
        if choice == SubmanifoldChoice::Ddw {
            let layout = MomentumLayout::new(shape);
            for pos in layout.higher_positions() {
                let c = p.coefficient(layout.multi_index(pos));
                if c != 0.0 {
                    return Err(LegendreError::HigherNotPinned(c, layout.multi_index(pos).to_string()));
                }
            }
        }
        Ok(MomentumPoint {
            shape,
            x,
            y,
            p,
            choice,
        })
    }

    /// Builds from the coordinate split: `e`, row-major `p^mu_i`, and the
    /// higher components in layout order.
    pub fn from_components(
        shape: ProblemShape,
        x: Vec<f64>,
        y: Vec<f64>,
        choice: SubmanifoldChoice,
        e: f64,
        mixed: &[f64],
        higher: &[f64],
    ) -> Result<Self, LegendreError> {
        let layout = MomentumLayout::new(shape);
        let higher_positions = layout.higher_positions();
        if higher.len() != higher_positions.len() {
            return Err(LegendreError::HigherLength {
                got: higher.len(),
                expected: higher_positions.len(),
            });
        }
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[layout.volume_position()] = e;
        for (i, mu) in VelocityMatrix::index_pairs(shape) {
            let (pos, sign) = layout.mixed_position(i, mu);
            coeffs[pos] = sign * mixed[(i - 1) * shape.n + (mu - 1)];
        }
        for (&pos, &c) in higher_positions.iter().zip(higher) {
            coeffs[pos] = c;
        }
        MomentumPoint::new(shape, x, y, layout.element(&coeffs), choice)
    }

    pub fn e(&self) -> f64 {
        let layout = MomentumLayout::new(self.shape);
        self.p.coefficient(layout.multi_index(layout.volume_position()))
    }

    /// The component `p^mu_i` (fiber index first, matching the row-major
    /// velocity layout).
    pub fn mixed(&self, i: usize, mu: usize) -> f64 {
        let layout = MomentumLayout::new(self.shape);
        let (pos, sign) = layout.mixed_position(i, mu);
        sign * self.p.coefficient(layout.multi_index(pos))
    }

    pub fn higher(&self) -> Vec<f64> {
        let layout = MomentumLayout::new(self.shape);
        layout
            .higher_positions()
            .iter()
            .map(|&pos| self.p.coefficient(layout.multi_index(pos)))
            .collect()
    }
}

/// Diagnosis of a Legendre solve: rank and conditioning of the linear
/// system, kernel directions when it degenerates.
#[derive(Debug, Clone)]
pub struct LegendreReport {
    pub solvable: bool,
    pub rank: usize,
    pub condition: f64,
    pub kernel_basis: Vec<Vec<f64>>,
    pub message: String,
}

/// Condition-number threshold past which a correspondence is reported as
/// degenerate.
pub const DEGENERACY_CONDITION_LIMIT: f64 = 1e12;

/// Named singular loci of the built-in densities, for error messages.
fn singular_locus_hint(name: &str) -> String {
    match name {
        "trivial" => " (trivial density: correspondence degenerates on r = 0)".to_string(),
        "dirichlet" => " (dirichlet density: correspondence degenerates on r - B = ±1)".to_string(),
        "maxwell2d" => " (maxwell2d density: correspondence degenerates on r ∈ {0, -2})".to_string(),
        _ => String::new(),
    }
}

fn check_shape<D: Density>(density: &D, x: &[f64], y: &[f64], v: &VelocityMatrix) -> Result<(), LegendreError> {
    let shape = density.shape();
    if x.len() != shape.n || y.len() != shape.k || v.shape != shape {
        return Err(LegendreError::ShapeMismatch { expected: shape });
    }
    Ok(())
}

/// `W(q, z, p) = <z, p> - L(q, z)` with `z = lift(v)`.
pub fn w_eval<D: Density>(density: &D, x: &[f64], y: &[f64], v: &VelocityMatrix, p: &ExteriorElement) -> f64 {
    lift(v).pair(p).expect("momentum over the same fiber") - lagrangian::eval(density, x, y, v)
}

/// De Donder-Weyl transform: `p^mu_i = ∂l/∂v^i_mu`, higher pinned, `e = 0`.
pub fn ddw_transform<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
) -> Result<MomentumPoint, LegendreError> {
    check_shape(density, x, y, v)?;
    let shape = density.shape();
    let grad = lagrangian::grad_v(density, x, y, v);
    let higher = vec![0.0; MomentumLayout::new(shape).higher_positions().len()];
    MomentumPoint::from_components(
        shape,
        x.to_vec(),
        y.to_vec(),
        SubmanifoldChoice::Ddw,
        0.0,
        &grad,
        &higher,
    )
}

/// Full Dedecker transform at fixed higher components: solves the `nk`
/// linear equations `<ζ^i_mu, p> = ∂l/∂v^i_mu` for the mixed components.
/// `e` does not enter (ω annihilates `T_z D^ω`) and is returned as 0.
pub fn dedecker_transform<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
    higher: &[f64],
) -> Result<(MomentumPoint, LegendreReport), LegendreError> {
    check_shape(density, x, y, v)?;
    let shape = density.shape();
    let layout = MomentumLayout::new(shape);
    let higher_positions = layout.higher_positions();
    if higher.len() != higher_positions.len() {
        return Err(LegendreError::HigherLength {
            got: higher.len(),
            expected: higher_positions.len(),
        });
    }

    let mut higher_part = ExteriorElement::zero(shape.total_dim(), shape.n, Variance::Covector);
    for (&pos, &c) in higher_positions.iter().zip(higher) {
        higher_part.add_term(layout.multi_index(pos).clone(), c);
    }

    let basis = tangent_basis_omega(v)?;
    let grad = lagrangian::grad_v(density, x, y, v);
    let pairs = VelocityMatrix::index_pairs(shape);
    let unknown_positions: Vec<usize> = pairs
        .iter()
        .map(|&(i, mu)| layout.mixed_position(i, mu).0)
        .collect();

    let a = nalgebra::DMatrix::from_fn(basis.len(), unknown_positions.len(), |r, c| {
        basis[r].coefficient(layout.multi_index(unknown_positions[c]))
    });
    let rhs: Vec<f64> = basis
        .iter()
        .zip(&grad)
        .map(|(zeta, g)| g - zeta.pair(&higher_part).expect("same fiber"))
        .collect();

    let rank = linalg::rank(&a);
    let condition = linalg::condition(&a);
    let solvable = rank == a.ncols() && condition < DEGENERACY_CONDITION_LIMIT;
    let solution = linalg::lstsq(&a, &rhs);
    let report = LegendreReport {
        solvable,
        rank,
        condition,
        kernel_basis: if solvable { Vec::new() } else { linalg::null_space(&a) },
        message: if solvable {
            format!("correspondence system rank {rank}, condition {condition:.3e}")
        } else {
            format!(
                "correspondence system singular: rank {rank} of {}{}",
                a.ncols(),
                singular_locus_hint(density.name())
            )
        },
    };

    let mut coeffs = vec![0.0; layout.len()];
    for (&pos, &u) in unknown_positions.iter().zip(&solution) {
        coeffs[pos] = u;
    }
    for (&pos, &c) in higher_positions.iter().zip(higher) {
        coeffs[pos] = c;
    }
    let point = MomentumPoint::new(
        shape,
        x.to_vec(),
        y.to_vec(),
        layout.element(&coeffs),
        SubmanifoldChoice::Full,
    )?;
    Ok((point, report))
}

/// Result of inverting the correspondence at a momentum point.
#[derive(Debug, Clone)]
pub struct HamiltonianValue {
    pub value: f64,
    pub velocity: VelocityMatrix,
    pub iterations: usize,
    pub residual: f64,
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-11;

fn correspondence_residual<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
    p: &ExteriorElement,
) -> Vec<f64> {
    let basis = tangent_basis_omega(v).expect("graph-chart tangent basis");
    let grad = lagrangian::grad_v(density, x, y, v);
    basis
        .iter()
        .zip(&grad)
        .map(|(zeta, g)| zeta.pair(p).expect("same fiber") - g)
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Evaluates the Legendre image Hamiltonian `H(q, p) = W(q, z, p)` by
/// Newton-solving `∂W/∂z = 0` for the velocity. The initial guess is zero
/// unless a warm start is supplied; steps are halved while the residual
/// does not decrease.
pub fn hamiltonian_eval<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    p: &ExteriorElement,
    warm_start: Option<&VelocityMatrix>,
) -> Result<HamiltonianValue, LegendreError> {
    let shape = density.shape();
    let mut v = warm_start.cloned().unwrap_or_else(|| VelocityMatrix::zeros(shape));
    check_shape(density, x, y, &v)?;
    let pairs = VelocityMatrix::index_pairs(shape);
    let nk = pairs.len();

    let mut residual = correspondence_residual(density, x, y, &v, p);
    let mut rnorm = inf_norm(&residual);
    for iter in 0..NEWTON_MAX_ITER {
        if rnorm <= NEWTON_TOL {
            return Ok(HamiltonianValue {
                value: w_eval(density, x, y, &v, p),
                velocity: v,
                iterations: iter,
                residual: rnorm,
            });
        }
        // J[r][s] = <∂²z/∂v_r∂v_s, p> - ∂²l/∂v_r∂v_s
        let hess = lagrangian::hessian_vv(density, x, y, &v);
        let jac = nalgebra::DMatrix::from_fn(nk, nk, |r, s| {
            lift_second_derivative(&v, pairs[r], pairs[s])
                .pair(p)
                .expect("same fiber")
                - hess[(r, s)]
        });
        let neg_f: Vec<f64> = residual.iter().map(|r| -r).collect();
        let delta = linalg::solve(&jac, &neg_f).ok_or_else(|| LegendreError::DegeneratePoint {
            hint: singular_locus_hint(density.name()),
        })?;

        let mut t = 1.0;
        loop {
            let trial = VelocityMatrix::from_entries(
                shape,
                v.entries()
                    .iter()
                    .zip(&delta)
                    .map(|(a, d)| a + t * d)
                    .collect(),
            );
            let trial_residual = correspondence_residual(density, x, y, &trial, p);
            let trial_norm = inf_norm(&trial_residual);
            if trial_norm < rnorm || t < 1e-6 {
                v = trial;
                residual = trial_residual;
                rnorm = trial_norm;
                break;
            }
            t /= 2.0;
        }
    }
    if rnorm <= NEWTON_TOL {
        return Ok(HamiltonianValue {
            value: w_eval(density, x, y, &v, p),
            velocity: v,
            iterations: NEWTON_MAX_ITER,
            residual: rnorm,
        });
    }
    Err(LegendreError::OutsideCorrespondence {
        iterations: NEWTON_MAX_ITER,
        residual: rnorm,
        hint: singular_locus_hint(density.name()),
    })
}

/// An affine subspace of momenta: a base point plus direction covectors.
#[derive(Debug, Clone)]
pub struct Pseudofiber {
    pub base: MomentumPoint,
    pub directions: Vec<ExteriorElement>,
}

impl Pseudofiber {
    pub fn dim(&self) -> usize {
        self.directions.len()
    }
}

/// The enlarged pseudofiber `P_q(z)`: all momenta corresponding to `v`.
/// Base point from the Dedecker solve with vanishing higher components;
/// directions span `(T_z D^ω_q)^⊥`, dimension `C(n+k,n) - nk`.
pub fn enlarged_pseudofiber<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
) -> Result<Pseudofiber, LegendreError> {
    check_shape(density, x, y, v)?;
    let layout = MomentumLayout::new(density.shape());
    let higher = vec![0.0; layout.higher_positions().len()];
    let (base, _) = dedecker_transform(density, x, y, v, &higher)?;
    let directions = grassmann::annihilator(&tangent_basis_omega(v)?)?;
    Ok(Pseudofiber { base, directions })
}

/// The level pseudofiber `P^h_q(z)`: the slice of `P_q(z)` where `H = h`.
/// The base point is shifted by `λ ω` with `λ = h - H(q, p0)`; directions
/// span `(T_z D^n_q)^⊥`, dimension `C(n+k,n) - nk - 1`.
pub fn pseudofiber_level<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
    h: f64,
) -> Result<Pseudofiber, LegendreError> {
    let enlarged = enlarged_pseudofiber(density, x, y, v)?;
    let shape = density.shape();
    // p0 lies in P_q(z) by construction, so H(q, p0) = W(q, z, p0) directly
    let w0 = w_eval(density, x, y, v, &enlarged.base.p);
    let lambda = h - w0;
    let p = enlarged
        .base
        .p
        .add(&shape.omega().scaled(lambda))
        .expect("same fiber");
    let base = MomentumPoint::new(shape, x.to_vec(), y.to_vec(), p, SubmanifoldChoice::Full)?;
    let directions = grassmann::annihilator(&tangent_basis_full(v)?)?;
    Ok(Pseudofiber { base, directions })
}

/// Diagnoses the invertibility of the Legendre map at `(q, v)`: the rank
/// and conditioning of `∂p_mixed/∂v`, which is the velocity Hessian of `l`
/// for the dDW choice and acquires the higher-component curvature terms in
/// the full Dedecker setting.
pub fn degeneracy_report<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
    choice: SubmanifoldChoice,
    higher: &[f64],
) -> Result<LegendreReport, LegendreError> {
    check_shape(density, x, y, v)?;
    let shape = density.shape();
    let layout = MomentumLayout::new(shape);
    let higher_positions = layout.higher_positions();
    let mut higher_part = ExteriorElement::zero(shape.total_dim(), shape.n, Variance::Covector);
    if choice == SubmanifoldChoice::Full {
        if higher.len() != higher_positions.len() {
            return Err(LegendreError::HigherLength {
                got: higher.len(),
                expected: higher_positions.len(),
            });
        }
        for (&pos, &c) in higher_positions.iter().zip(higher) {
            higher_part.add_term(layout.multi_index(pos).clone(), c);
        }
    }

    let hess = lagrangian::hessian_vv(density, x, y, v);
    let pairs = VelocityMatrix::index_pairs(shape);
    let nk = pairs.len();
    let k_matrix = nalgebra::DMatrix::from_fn(nk, nk, |r, s| {
        hess[(r, s)]
            - lift_second_derivative(v, pairs[r], pairs[s])
                .pair(&higher_part)
                .expect("same fiber")
    });
    let rank = linalg::rank(&k_matrix);
    let condition = linalg::condition(&k_matrix);
    let solvable = rank == nk && condition < DEGENERACY_CONDITION_LIMIT;
    Ok(LegendreReport {
        solvable,
        rank,
        condition,
        kernel_basis: if solvable {
            Vec::new()
        } else {
            linalg::null_space(&k_matrix)
        },
        message: if solvable {
            format!("invertible: rank {rank} of {nk}, condition {condition:.3e}")
        } else {
            format!(
                "degenerate: rank {rank} of {nk}{}",
                singular_locus_hint(density.name())
            )
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::LagrangianDensity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape22() -> ProblemShape {
        ProblemShape::new(2, 2)
    }

    /// Closed-form oracles from the three n = k = 2 examples, written in the
    /// (e, p^mu_i, r) coordinates. Independent of the Newton path.
    fn closed_form_trivial(point: &MomentumPoint) -> f64 {
        let det = point.mixed(1, 1) * point.mixed(2, 2) - point.mixed(1, 2) * point.mixed(2, 1);
        let r = point.higher()[0];
        point.e() - det / r
    }

    fn closed_form_dirichlet(point: &MomentumPoint, b: f64) -> f64 {
        let det = point.mixed(1, 1) * point.mixed(2, 2) - point.mixed(1, 2) * point.mixed(2, 1);
        let norm2: f64 = [(1, 1), (1, 2), (2, 1), (2, 2)]
            .iter()
            .map(|&(i, mu)| point.mixed(i, mu).powi(2))
            .sum();
        let c = point.higher()[0] - b;
        point.e() + (0.5 * norm2 + c * det) / (1.0 - c * c)
    }

    fn closed_form_maxwell(point: &MomentumPoint) -> f64 {
        let r = point.higher()[0];
        let plus = point.mixed(1, 2) + point.mixed(2, 1); // p^2_1 + p^1_2
        let minus = point.mixed(1, 2) - point.mixed(2, 1);
        let p11 = point.mixed(1, 1);
        let p22 = point.mixed(2, 2);
        point.e() + (plus * plus - 4.0 * p11 * p22) / (4.0 * r) - 0.25 * minus * minus / (2.0 + r)
    }

    fn random_velocity(shape: ProblemShape, rng: &mut ChaCha8Rng) -> VelocityMatrix {
        VelocityMatrix::from_fn(shape, |_, _| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn layout_classification_22() {
        let layout = MomentumLayout::new(shape22());
        assert_eq!(layout.len(), 6);
        assert_eq!(layout.volume_position(), 0); // (1,2)
        // p^1_1 = -p_{23}: position of (2,3) with sign -1
        let (pos, sign) = layout.mixed_position(1, 1);
        assert_eq!(layout.multi_index(pos).indices(), &[2, 3]);
        assert_eq!(sign, -1.0);
        let (pos, sign) = layout.mixed_position(1, 2);
        assert_eq!(layout.multi_index(pos).indices(), &[1, 3]);
        assert_eq!(sign, 1.0);
        assert_eq!(layout.higher_positions().len(), 1);
        assert_eq!(layout.multi_index(layout.higher_positions()[0]).indices(), &[3, 4]);
    }

    #[test]
    fn layout_counts_across_shapes() {
        for (n, k) in [(1, 1), (2, 1), (1, 2), (2, 2), (2, 3), (3, 2)] {
            let shape = ProblemShape::new(n, k);
            let layout = MomentumLayout::new(shape);
            assert_eq!(layout.len(), shape.lambda_dim());
            assert_eq!(
                layout.higher_positions().len(),
                shape.lambda_dim() - n * k - 1
            );
            assert_eq!(
                layout.present_positions(SubmanifoldChoice::Ddw).len(),
                n * k + 1
            );
        }
    }

    #[test]
    fn momentum_point_component_roundtrip() {
        let shape = shape22();
        let mixed = [0.5, -1.0, 2.0, 0.25];
        let point = MomentumPoint::from_components(
            shape,
            vec![0.0; 2],
            vec![0.0; 2],
            SubmanifoldChoice::Full,
            3.0,
            &mixed,
            &[1.5],
        )
        .unwrap();
        assert_eq!(point.e(), 3.0);
        assert_eq!(point.mixed(1, 1), 0.5);
        assert_eq!(point.mixed(1, 2), -1.0);
        assert_eq!(point.mixed(2, 1), 2.0);
        assert_eq!(point.mixed(2, 2), 0.25);
        assert_eq!(point.higher(), vec![1.5]);
    }

    #[test]
    fn ddw_point_rejects_higher_components() {
        let shape = shape22();
        let err = MomentumPoint::from_components(
            shape,
            vec![0.0; 2],
            vec![0.0; 2],
            SubmanifoldChoice::Ddw,
            0.0,
            &[0.0; 4],
            &[1.0],
        );
        assert!(matches!(err, Err(LegendreError::HigherNotPinned(..))));
    }

    #[test]
    fn w_eval_trivial_density() {
        let shape = shape22();
        let density = LagrangianDensity::Trivial;
        let v = VelocityMatrix::zeros(shape);
        let zero_p = ExteriorElement::zero(4, 2, Variance::Covector);
        assert_eq!(w_eval(&density, &[0.0; 2], &[0.0; 2], &v, &zero_p), 0.0);

        let e_omega = shape.omega().scaled(2.5);
        assert_eq!(w_eval(&density, &[0.0; 2], &[0.0; 2], &v, &e_omega), 2.5);
    }

    #[test]
    fn w_eval_dirichlet_identity() {
        // v = id, p with p^1_1 = p^2_2 = 1: <z,p> = 2, l = 1, W = 1
        let shape = shape22();
        let density = LagrangianDensity::Dirichlet { b: 0.0 };
        let v = VelocityMatrix::from_fn(shape, |i, mu| if i == mu { 1.0 } else { 0.0 });
        let p = MomentumPoint::from_components(
            shape,
            vec![0.0; 2],
            vec![0.0; 2],
            SubmanifoldChoice::Full,
            0.0,
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0],
        )
        .unwrap();
        assert_eq!(w_eval(&density, &[0.0; 2], &[0.0; 2], &v, &p.p), 1.0);
    }

    #[test]
    fn ddw_transform_examples() {
        let shape = shape22();
        let q = (vec![0.0; 2], vec![0.0; 2]);

        let identity = VelocityMatrix::from_fn(shape, |i, mu| if i == mu { 1.0 } else { 0.0 });
        let p = ddw_transform(&LagrangianDensity::Dirichlet { b: 0.0 }, &q.0, &q.1, &identity).unwrap();
        assert_eq!(p.mixed(1, 1), 1.0);
        assert_eq!(p.mixed(2, 2), 1.0);
        assert_eq!(p.mixed(1, 2), 0.0);
        assert_eq!(p.mixed(2, 1), 0.0);

        let p = ddw_transform(&LagrangianDensity::Trivial, &q.0, &q.1, &identity).unwrap();
        assert!(VelocityMatrix::index_pairs(shape)
            .iter()
            .all(|&(i, mu)| p.mixed(i, mu) == 0.0));

        // Maxwell with v^1_2 = 1: p^mu_i = ∂l/∂v^i_mu gives
        // p^2_1 = ∂l/∂v^1_2 = -(v^1_2 - v^2_1) = -1 and p^1_2 = +1
        let mut v = VelocityMatrix::zeros(shape);
        v.set(1, 2, 1.0);
        let p = ddw_transform(&LagrangianDensity::Maxwell2D, &q.0, &q.1, &v).unwrap();
        assert_eq!(p.mixed(1, 2), -1.0); // p^2_1: (i, mu) = (1, 2) accessor order below
        assert_eq!(p.mixed(2, 1), 1.0);
        assert_eq!(p.mixed(1, 1), 0.0);
        assert_eq!(p.mixed(2, 2), 0.0);
    }

    #[test]
    fn dedecker_matches_closed_form_family_and_pins() {
        let shape = shape22();
        let q = (vec![0.0; 2], vec![0.0; 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let v = random_velocity(shape, &mut rng);
            let r = rng.gen_range(0.3..2.0);
            let (p, report) =
                dedecker_transform(&LagrangianDensity::Trivial, &q.0, &q.1, &v, &[r]).unwrap();
            assert!(report.solvable);
            // p^mu_i = -r ε_ij ε^{μν} v^j_ν
            let eps = |a: usize, b: usize| -> f64 {
                match (a, b) {
                    (1, 2) => 1.0,
                    (2, 1) => -1.0,
                    _ => 0.0,
                }
            };
            for (i, mu) in VelocityMatrix::index_pairs(shape) {
                let mut expect = 0.0;
                for j in 1..=2 {
                    for nu in 1..=2 {
                        expect -= r * eps(i, j) * eps(mu, nu) * v.get(j, nu);
                    }
                }
                assert!((p.mixed(i, mu) - expect).abs() <= 1e-12);
            }
        }

        // r = 0 forces p^mu_i = 0 regardless of v
        let v = random_velocity(shape, &mut rng);
        let (p, _) = dedecker_transform(&LagrangianDensity::Trivial, &q.0, &q.1, &v, &[0.0]).unwrap();
        for (i, mu) in VelocityMatrix::index_pairs(shape) {
            assert_eq!(p.mixed(i, mu), 0.0);
        }

        // higher = 0 reproduces the dDW transform
        let density = LagrangianDensity::Dirichlet { b: 0.4 };
        let v = random_velocity(shape, &mut rng);
        let (full, _) = dedecker_transform(&density, &q.0, &q.1, &v, &[0.0]).unwrap();
        let ddw = ddw_transform(&density, &q.0, &q.1, &v).unwrap();
        for (i, mu) in VelocityMatrix::index_pairs(shape) {
            assert!((full.mixed(i, mu) - ddw.mixed(i, mu)).abs() <= 1e-12);
        }
    }

    #[test]
    fn hamiltonian_matches_trivial_oracle() {
        let shape = shape22();
        let density = LagrangianDensity::Trivial;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mixed: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e = rng.gen_range(-2.0..2.0);
            let r = rng.gen_range(0.2..2.0);
            let point = MomentumPoint::from_components(
                shape,
                x.clone(),
                y.clone(),
                SubmanifoldChoice::Full,
                e,
                &mixed,
                &[r],
            )
            .unwrap();
            let got = hamiltonian_eval(&density, &x, &y, &point.p, None).unwrap();
            let expect = closed_form_trivial(&point);
            assert!(
                (got.value - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                "H mismatch: {} vs {expect}",
                got.value
            );
        }
    }

    #[test]
    fn hamiltonian_matches_dirichlet_and_maxwell_oracles() {
        let shape = shape22();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for b in [0.0, 0.5, 2.0] {
            let density = LagrangianDensity::Dirichlet { b };
            for _ in 0..30 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mixed: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let e = rng.gen_range(-2.0..2.0);
                // keep |r - b ± 1| away from 0
                let r = loop {
                    let r = rng.gen_range(-3.0..3.0);
                    if (r - b - 1.0).abs() >= 0.1 && (r - b + 1.0).abs() >= 0.1 {
                        break r;
                    }
                };
                let point = MomentumPoint::from_components(
                    shape,
                    x.clone(),
                    y.clone(),
                    SubmanifoldChoice::Full,
                    e,
                    &mixed,
                    &[r],
                )
                .unwrap();
                let got = hamiltonian_eval(&density, &x, &y, &point.p, None).unwrap();
                let expect = closed_form_dirichlet(&point, b);
                assert!(
                    (got.value - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                    "B={b}: {} vs {expect}",
                    got.value
                );
            }
        }

        let density = LagrangianDensity::Maxwell2D;
        for _ in 0..30 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mixed: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e = rng.gen_range(-2.0..2.0);
            let r = loop {
                let r: f64 = rng.gen_range(-3.0..3.0);
                if r.abs() >= 0.1 && (r + 2.0).abs() >= 0.1 {
                    break r;
                }
            };
            let point = MomentumPoint::from_components(
                shape,
                x.clone(),
                y.clone(),
                SubmanifoldChoice::Full,
                e,
                &mixed,
                &[r],
            )
            .unwrap();
            let got = hamiltonian_eval(&density, &x, &y, &point.p, None).unwrap();
            let expect = closed_form_maxwell(&point);
            assert!(
                (got.value - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                "{} vs {expect}",
                got.value
            );
        }
    }

    #[test]
    fn round_trip_velocity_recovery() {
        let shape = shape22();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let densities: Vec<LagrangianDensity> = vec![
            LagrangianDensity::Trivial,
            LagrangianDensity::Dirichlet { b: 0.5 },
            LagrangianDensity::Maxwell2D,
        ];
        for density in &densities {
            for _ in 0..30 {
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v = random_velocity(shape, &mut rng);
                let r = loop {
                    let r = rng.gen_range(-3.0..3.0);
                    let sings: &[f64] = match density {
                        LagrangianDensity::Trivial => &[0.0],
                        LagrangianDensity::Dirichlet { b } => &[b - 1.0, b + 1.0],
                        LagrangianDensity::Maxwell2D => &[0.0, -2.0],
                        _ => unreachable!(),
                    };
                    if sings.iter().all(|s| (r - s).abs() >= 0.1) {
                        break r;
                    }
                };
                let (p, report) = dedecker_transform(density, &x, &y, &v, &[r]).unwrap();
                assert!(report.solvable);
                let got = hamiltonian_eval(density, &x, &y, &p.p, None).unwrap();
                for (a, b) in got.velocity.entries().iter().zip(v.entries()) {
                    assert!((a - b).abs() <= 1e-8, "{:?} vs {:?}", got.velocity, v);
                }
            }
        }
    }

    #[test]
    fn newton_reports_degenerate_point_on_singular_locus() {
        // trivial density at r = 0: the Jacobian vanishes identically
        let shape = shape22();
        let point = MomentumPoint::from_components(
            shape,
            vec![0.0; 2],
            vec![0.0; 2],
            SubmanifoldChoice::Full,
            1.0,
            &[0.3, 0.0, 0.0, 0.0],
            &[0.0],
        )
        .unwrap();
        let err = hamiltonian_eval(&LagrangianDensity::Trivial, &[0.0; 2], &[0.0; 2], &point.p, None);
        match err {
            Err(LegendreError::DegeneratePoint { hint }) => assert!(hint.contains("r = 0")),
            other => panic!("expected DegeneratePoint, got {other:?}"),
        }
    }

    #[test]
    fn level_shift_identity_exact() {
        let shape = shape22();
        let density = LagrangianDensity::Dirichlet { b: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = random_velocity(shape, &mut rng);
            let (p, _) = dedecker_transform(&density, &x, &y, &v, &[1.7]).unwrap();
            let h0 = hamiltonian_eval(&density, &x, &y, &p.p, None).unwrap().value;
            let lambda = rng.gen_range(-10.0..10.0);
            let shifted = p.p.add(&shape.omega().scaled(lambda)).unwrap();
            let h1 = hamiltonian_eval(&density, &x, &y, &shifted, None).unwrap().value;
            assert!((h1 - h0 - lambda).abs() <= 1e-12 * h0.abs().max(lambda.abs()).max(1.0));
        }
    }

    #[test]
    fn dh_dp_equals_lifted_velocity_components() {
        // ∂H/∂p against a momentum direction equals the pairing of z
        // with that direction; in particular ∂H/∂e = 1.
        let shape = shape22();
        let density = LagrangianDensity::Dirichlet { b: 0.0 };
        let layout = MomentumLayout::new(shape);
        let x = vec![0.1, -0.2];
        let y = vec![0.3, 0.4];
        let v = VelocityMatrix::from_entries(shape, vec![0.5, -0.7, 0.2, 1.1]);
        let (p, _) = dedecker_transform(&density, &x, &y, &v, &[0.8]).unwrap();
        let z = lift(&v);
        let h_at = |pp: &ExteriorElement| {
            hamiltonian_eval(&density, &x, &y, pp, Some(&v)).unwrap().value
        };
        let step = 1e-6;
        for pos in 0..layout.len() {
            let dir = {
                let mut coeffs = vec![0.0; layout.len()];
                coeffs[pos] = 1.0;
                layout.element(&coeffs)
            };
            let plus = p.p.add(&dir.scaled(step)).unwrap();
            let minus = p.p.add(&dir.scaled(-step)).unwrap();
            let fd = (h_at(&plus) - h_at(&minus)) / (2.0 * step);
            let expect = z.pair(&dir).unwrap();
            assert!(
                (fd - expect).abs() <= 1e-6 * expect.abs().max(1.0),
                "axis {}: {fd} vs {expect}",
                layout.multi_index(pos)
            );
        }
        // exact linearity in e
        let omega_dir = shape.omega();
        let h0 = h_at(&p.p);
        let h1 = h_at(&p.p.add(&omega_dir.scaled(5.0)).unwrap());
        assert!((h1 - h0 - 5.0).abs() <= 1e-10);
    }

    #[test]
    fn enlarged_and_level_pseudofiber_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        // n = 1 mechanics: enlarged is one-dimensional (free energy slot)
        let mech = LagrangianDensity::Mechanics { potential: vec![1.0] };
        let v1 = VelocityMatrix::from_entries(ProblemShape::new(1, 1), vec![0.4]);
        let fiber = enlarged_pseudofiber(&mech, &[0.0], &[0.2], &v1).unwrap();
        assert_eq!(fiber.dim(), 1);
        let level = pseudofiber_level(&mech, &[0.0], &[0.2], &v1, 2.0).unwrap();
        assert_eq!(level.dim(), 0);

        // n = k = 2: enlarged has dimension 2, level dimension 1 with the
        // closed-form generator inside
        let shape = shape22();
        let density = LagrangianDensity::Dirichlet { b: 0.3 };
        let v = random_velocity(shape, &mut rng);
        let fiber = enlarged_pseudofiber(&density, &[0.0; 2], &[0.0; 2], &v).unwrap();
        assert_eq!(fiber.dim(), shape.lambda_dim() - 4);
        let level = pseudofiber_level(&density, &[0.0; 2], &[0.0; 2], &v, 1.0).unwrap();
        assert_eq!(level.dim(), 1);
        let cols = multi_indices(4, 2);
        let generator = grassmann::pseudofiber_generator_22(&v);
        let gen_vec: Vec<f64> = cols.iter().map(|mi| generator.coefficient(mi)).collect();
        let dirs: Vec<Vec<f64>> = level
            .directions
            .iter()
            .map(|d| cols.iter().map(|mi| d.coefficient(mi)).collect())
            .collect();
        assert!(linalg::projection_residual(&gen_vec, &dirs) <= 1e-10);

        // the level value is attained at the base point
        let w = w_eval(&density, &[0.0; 2], &[0.0; 2], &v, &level.base.p);
        assert!((w - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pseudofiber_membership_recovers_velocity() {
        // every p in the enlarged pseudofiber maps back to the same v
        let shape = shape22();
        let density = LagrangianDensity::Dirichlet { b: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = random_velocity(shape, &mut rng);
        let fiber = enlarged_pseudofiber(&density, &[0.0; 2], &[0.0; 2], &v).unwrap();
        for dir in &fiber.directions {
            let p = fiber.base.p.add(&dir.scaled(0.7)).unwrap();
            // stay off the degenerate locus r - B = ±1
            let r = p.coefficient(&MultiIndex::new(&[3, 4]).unwrap());
            if (r - 1.0).abs() < 0.1 || (r + 1.0).abs() < 0.1 {
                continue;
            }
            let got = hamiltonian_eval(&density, &[0.0; 2], &[0.0; 2], &p, None).unwrap();
            for (a, b) in got.velocity.entries().iter().zip(v.entries()) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn degeneracy_reports() {
        let shape = shape22();
        let q = (vec![0.0; 2], vec![0.0; 2]);
        let v = VelocityMatrix::zeros(shape);

        // Maxwell dDW: rank 1 of 4
        let report = degeneracy_report(
            &LagrangianDensity::Maxwell2D,
            &q.0,
            &q.1,
            &v,
            SubmanifoldChoice::Ddw,
            &[],
        )
        .unwrap();
        assert!(!report.solvable);
        assert_eq!(report.rank, 1);
        assert_eq!(report.kernel_basis.len(), 3);

        // Maxwell full Dedecker: solvable away from r ∈ {0, -2}
        for r in [0.5, 1.0, -1.0, 3.0] {
            let report = degeneracy_report(
                &LagrangianDensity::Maxwell2D,
                &q.0,
                &q.1,
                &v,
                SubmanifoldChoice::Full,
                &[r],
            )
            .unwrap();
            assert!(report.solvable, "r = {r}: {}", report.message);
        }
        for r in [0.0, -2.0] {
            let report = degeneracy_report(
                &LagrangianDensity::Maxwell2D,
                &q.0,
                &q.1,
                &v,
                SubmanifoldChoice::Full,
                &[r],
            )
            .unwrap();
            assert!(!report.solvable, "r = {r} should be degenerate");
        }

        // Dirichlet dDW: full rank unless B = ±1
        for b in [0.0, 0.5, 2.0, -3.0] {
            let report = degeneracy_report(
                &LagrangianDensity::Dirichlet { b },
                &q.0,
                &q.1,
                &v,
                SubmanifoldChoice::Ddw,
                &[],
            )
            .unwrap();
            assert!(report.solvable, "B = {b}");
            assert_eq!(report.rank, 4);
        }
        for b in [1.0, -1.0] {
            let report = degeneracy_report(
                &LagrangianDensity::Dirichlet { b },
                &q.0,
                &q.1,
                &v,
                SubmanifoldChoice::Ddw,
                &[],
            )
            .unwrap();
            assert!(!report.solvable, "B = {b} should degenerate");
            assert_eq!(report.rank, 2);
        }
    }
}
