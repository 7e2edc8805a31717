//! Hamiltonian n-curves as discrete grid objects: the phase-space layout
//! and multisymplectic form for a submanifold choice, closed-form and
//! Legendre-derived Hamiltonians with gradients, lifted curves and their
//! Hamilton-equation residuals, a mechanics integrator, and the
//! coordinate-adapted solution family of the Hamilton equation.

pub mod curve;
pub mod family;
pub mod grid;
pub mod integrate;

use thiserror::Error;

use crate::dual::Dual;
use crate::exterior::{ExteriorElement, MultiIndex, Variance};
use crate::grassmann::{lift, ProblemShape};
use crate::lagrangian::{self, Density};
use crate::legendre::{hamiltonian_eval, LegendreError, MomentumLayout, SubmanifoldChoice};

pub use curve::{
    deform_along_pseudofiber, euler_lagrange_residual, hamilton_residual, legendre_lift,
    tangent_n_vector, DiscreteCurve, ResidualReport,
};
pub use family::NVectorFamily;
pub use grid::{Grid, GridField};
pub use integrate::integrate_mechanics;

#[derive(Debug, Error)]
pub enum HamiltonError {
    #[error("operation requires n = 1 (point mechanics), shape has n = {0}")]
    RequiresMechanics(usize),
    #[error("curve/Hamiltonian mismatch: {0}")]
    Mismatch(String),
    #[error("degenerate Legendre transform at node {node:?}: {message}")]
    DegenerateNode { node: Vec<usize>, message: String },
    #[error("integration produced non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("deformation direction outside the pseudofiber span at node {node:?} (projection residual {residual:.3e})")]
    OutsidePseudofiber { node: Vec<usize>, residual: f64 },
    #[error("coordinates not adapted at this point: {0}")]
    NotAdapted(String),
    #[error(transparent)]
    Legendre(#[from] LegendreError),
    #[error(transparent)]
    Grassmann(#[from] crate::grassmann::GrassmannError),
}

/// A Hamiltonian function on the chosen momentum submanifold, with enough
/// derivative structure to drive residuals and integrators. Momenta are
/// passed as dense coefficient vectors over the full canonical layout
/// (pinned components simply stay zero for the dDW choice).
pub trait Hamiltonian {
    fn shape(&self) -> ProblemShape;
    fn choice(&self) -> SubmanifoldChoice;
    fn eval(&self, q: &[f64], p: &[f64]) -> Result<f64, HamiltonError>;
    /// `(d_q H, d_p H)`: `n+k` base components and one per momentum axis.
    fn grad(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>), HamiltonError>;
}

/// Phase-space coordinates for a submanifold choice: the `n+k` base axes
/// first, then one axis per present momentum multi-index in layout order.
#[derive(Debug, Clone)]
pub struct AmbientLayout {
    pub shape: ProblemShape,
    pub choice: SubmanifoldChoice,
    momentum: MomentumLayout,
    present: Vec<usize>,
}

impl AmbientLayout {
    pub fn new(shape: ProblemShape, choice: SubmanifoldChoice) -> Self {
        let momentum = MomentumLayout::new(shape);
        let present = momentum.present_positions(choice);
        AmbientLayout {
            shape,
            choice,
            momentum,
            present,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.total_dim() + self.present.len()
    }

    pub fn momentum(&self) -> &MomentumLayout {
        &self.momentum
    }

    /// Layout positions of the momentum axes present on the submanifold.
    pub fn present(&self) -> &[usize] {
        &self.present
    }

    pub fn q_axis(&self, alpha: usize) -> u8 {
        debug_assert!((1..=self.shape.total_dim()).contains(&alpha));
        alpha as u8
    }

    pub fn p_axis(&self, slot: usize) -> u8 {
        (self.shape.total_dim() + slot + 1) as u8
    }

    /// The multisymplectic form `Σ_A dp_A ∧ dq^{a_1} ∧ ... ∧ dq^{a_n}` over
    /// the present axes.
    pub fn multisymplectic_form(&self) -> ExteriorElement {
        let n = self.shape.n;
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut omega = ExteriorElement::zero(self.dim(), n + 1, Variance::Covector);
        for (slot, &pos) in self.present.iter().enumerate() {
            let mut axes: Vec<u8> = self.momentum.multi_index(pos).indices().to_vec();
            axes.push(self.p_axis(slot));
            omega.add_term(MultiIndex::new(&axes).unwrap(), sign);
        }
        omega
    }

    /// Assembles `dH` as a 1-form on the ambient axes from base and
    /// momentum gradients (the latter over the full layout; pinned axes are
    /// dropped).
    pub fn one_form(&self, grad_q: &[f64], grad_p: &[f64]) -> ExteriorElement {
        let mut form = ExteriorElement::zero(self.dim(), 1, Variance::Covector);
        for (alpha, &g) in grad_q.iter().enumerate() {
            form.add_term(MultiIndex::new(&[self.q_axis(alpha + 1)]).unwrap(), g);
        }
        for (slot, &pos) in self.present.iter().enumerate() {
            form.add_term(MultiIndex::new(&[self.p_axis(slot)]).unwrap(), grad_p[pos]);
        }
        form
    }

    /// A tangent vector from base components (`n+k`) and per-slot momentum
    /// components.
    pub fn vector(&self, q_comps: &[f64], p_comps: &[f64]) -> ExteriorElement {
        let mut v = ExteriorElement::zero(self.dim(), 1, Variance::Vector);
        for (alpha, &c) in q_comps.iter().enumerate() {
            v.add_term(MultiIndex::new(&[self.q_axis(alpha + 1)]).unwrap(), c);
        }
        for (slot, &c) in p_comps.iter().enumerate() {
            v.add_term(MultiIndex::new(&[self.p_axis(slot)]).unwrap(), c);
        }
        v
    }
}

/// The closed-form Hamiltonians of the built-in examples, in the
/// `(e, p^mu_i, higher)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormHamiltonian {
    /// `H = e - (p^1_1 p^2_2 - p^1_2 p^2_1)/r` on maps `R^2 -> R^2`,
    /// defined for `r != 0`.
    Trivial,
    /// `H = e + (½|p|² + (r-B)(p^1_1 p^2_2 - p^1_2 p^2_1)) / (1-(r-B)²)`.
    Dirichlet { b: f64 },
    /// `H = e + ((p^1_2+p^2_1)² - 4 p^1_1 p^2_2)/(4r) - ¼(p^1_2-p^2_1)²/(2+r)`.
    Maxwell2D,
    /// `H = e + ½|p|² + V(y)`, `V(y) = ½ Σ c_i y_i²`, on the dDW manifold.
    Mechanics { potential: Vec<f64> },
    /// `H = e + ½ Σ_mu (p^mu)²` on the dDW manifold.
    ScalarField { n: usize },
}

impl ClosedFormHamiltonian {
    /// The Legendre partner density of this Hamiltonian.
    pub fn density(&self) -> lagrangian::LagrangianDensity {
        match self {
            ClosedFormHamiltonian::Trivial => lagrangian::LagrangianDensity::Trivial,
            ClosedFormHamiltonian::Dirichlet { b } => lagrangian::LagrangianDensity::Dirichlet { b: *b },
            ClosedFormHamiltonian::Maxwell2D => lagrangian::LagrangianDensity::Maxwell2D,
            ClosedFormHamiltonian::Mechanics { potential } => {
                lagrangian::LagrangianDensity::Mechanics {
                    potential: potential.clone(),
                }
            }
            ClosedFormHamiltonian::ScalarField { n } => {
                lagrangian::LagrangianDensity::ScalarField { n: *n }
            }
        }
    }

    /// Evaluates the closed form over any scalar type, so duals give exact
    /// derivatives. `q` carries the `n+k` base coordinates, `p` the dense
    /// momentum coefficients in layout order.
    pub fn eval_scalar<T: crate::dual::Scalar>(&self, q: &[T], p: &[T]) -> T {
        let layout = MomentumLayout::new(self.shape());
        let e = p[layout.volume_position()].clone();
        let mixed = |i: usize, mu: usize| -> T {
            let (pos, sign) = layout.mixed_position(i, mu);
            T::from_f64(sign) * p[pos].clone()
        };
        match self {
            ClosedFormHamiltonian::Trivial => {
                let r = p[layout.higher_positions()[0]].clone();
                let det = mixed(1, 1) * mixed(2, 2) - mixed(2, 1) * mixed(1, 2);
                e - det / r
            }
            ClosedFormHamiltonian::Dirichlet { b } => {
                let r = p[layout.higher_positions()[0]].clone();
                let c = r - T::from_f64(*b);
                let det = mixed(1, 1) * mixed(2, 2) - mixed(2, 1) * mixed(1, 2);
                let mut norm2 = T::zero();
                for i in 1..=2 {
                    for mu in 1..=2 {
                        let v = mixed(i, mu);
                        norm2 = norm2 + v.clone() * v;
                    }
                }
                let denom = T::one() - c.clone() * c.clone();
                e + (T::from_f64(0.5) * norm2 + c * det) / denom
            }
            ClosedFormHamiltonian::Maxwell2D => {
                let r = p[layout.higher_positions()[0]].clone();
                let plus = mixed(2, 1) + mixed(1, 2); // p^1_2 + p^2_1
                let minus = mixed(2, 1) - mixed(1, 2);
                let four = T::from_f64(4.0);
                e + (plus.clone() * plus - four.clone() * mixed(1, 1) * mixed(2, 2))
                    / (four * r.clone())
                    - T::from_f64(0.25) * minus.clone() * minus / (T::from_f64(2.0) + r)
            }
            ClosedFormHamiltonian::Mechanics { potential } => {
                let mut acc = e;
                let half = T::from_f64(0.5);
                for i in 1..=potential.len() {
                    let pi = mixed(i, 1);
                    acc = acc + half.clone() * pi.clone() * pi;
                    let yi = q[i].clone(); // q = (t, y_1, ..., y_k)
                    acc = acc + half.clone() * T::from_f64(potential[i - 1]) * yi.clone() * yi;
                }
                acc
            }
            ClosedFormHamiltonian::ScalarField { n } => {
                let mut acc = e;
                let half = T::from_f64(0.5);
                for mu in 1..=*n {
                    let pm = mixed(1, mu);
                    acc = acc + half.clone() * pm.clone() * pm;
                }
                acc
            }
        }
    }
}

impl Hamiltonian for ClosedFormHamiltonian {
    fn shape(&self) -> ProblemShape {
        self.density().shape()
    }

    fn choice(&self) -> SubmanifoldChoice {
        match self {
            ClosedFormHamiltonian::Trivial
            | ClosedFormHamiltonian::Dirichlet { .. }
            | ClosedFormHamiltonian::Maxwell2D => SubmanifoldChoice::Full,
            ClosedFormHamiltonian::Mechanics { .. } | ClosedFormHamiltonian::ScalarField { .. } => {
                SubmanifoldChoice::Ddw
            }
        }
    }

    fn eval(&self, q: &[f64], p: &[f64]) -> Result<f64, HamiltonError> {
        Ok(self.eval_scalar(q, p))
    }

    fn grad(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>), HamiltonError> {
        let nq = q.len();
        let seeds = nq + p.len();
        let qs: Vec<Dual> = q
            .iter()
            .enumerate()
            .map(|(j, &c)| Dual::seeded(c, j, seeds))
            .collect();
        let ps: Vec<Dual> = p
            .iter()
            .enumerate()
            .map(|(j, &c)| Dual::seeded(c, nq + j, seeds))
            .collect();
        let out = self.eval_scalar(&qs, &ps);
        let grab = |j: usize| out.d.get(j).copied().unwrap_or(0.0);
        Ok(((0..nq).map(grab).collect(), (nq..seeds).map(grab).collect()))
    }
}

/// A Hamiltonian obtained from a Lagrangian density through the Legendre
/// correspondence: values by Newton inversion, momentum gradients from the
/// recovered velocity (`∂H/∂p_A` is the `A`-component of the lifted
/// n-vector), base gradients from `∂H/∂q = -∂l/∂q` in the flat chart.
#[derive(Debug, Clone)]
pub struct LegendreHamiltonian<D: Density> {
    pub density: D,
    pub choice: SubmanifoldChoice,
}

impl<D: Density> LegendreHamiltonian<D> {
    pub fn new(density: D, choice: SubmanifoldChoice) -> Self {
        LegendreHamiltonian { density, choice }
    }

    fn split_q<'a>(&self, q: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        q.split_at(self.density.shape().n)
    }
}

impl<D: Density> Hamiltonian for LegendreHamiltonian<D> {
    fn shape(&self) -> ProblemShape {
        self.density.shape()
    }

    fn choice(&self) -> SubmanifoldChoice {
        self.choice
    }

    fn eval(&self, q: &[f64], p: &[f64]) -> Result<f64, HamiltonError> {
        let layout = MomentumLayout::new(self.shape());
        let (x, y) = self.split_q(q);
        let value = hamiltonian_eval(&self.density, x, y, &layout.element(p), None)?;
        Ok(value.value)
    }

    fn grad(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>), HamiltonError> {
        let layout = MomentumLayout::new(self.shape());
        let (x, y) = self.split_q(q);
        let solved = hamiltonian_eval(&self.density, x, y, &layout.element(p), None)?;
        let z = lift(&solved.velocity);
        let grad_p: Vec<f64> = (0..layout.len())
            .map(|pos| z.coefficient(layout.multi_index(pos)))
            .collect();
        let (gx, gy) = lagrangian::grad_xy(&self.density, x, y, &solved.velocity);
        let grad_q: Vec<f64> = gx.iter().chain(gy.iter()).map(|g| -g).collect();
        Ok((grad_q, grad_p))
    }
}

/// Momentum coordinates at a node, with the `e` slot adjusted so that the
/// Hamiltonian takes the value `h` there; relies on `∂H/∂e = 1`.
pub(crate) fn set_level(
    layout: &MomentumLayout,
    hamiltonian_at_zero_e: f64,
    h: f64,
    coeffs: &mut [f64],
) {
    coeffs[layout.volume_position()] = h - hamiltonian_at_zero_e;
}

/// Empirical convergence order between residuals at spacing `h` and `h/2`.
pub fn order_estimate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Classification helper for the adapted-coordinate check: true when
/// `d_p H` equals `dp_{1..n}` to within `tol`.
pub(crate) fn is_adapted(layout: &MomentumLayout, grad_p: &[f64], tol: f64) -> bool {
    grad_p.iter().enumerate().all(|(pos, &g)| {
        if pos == layout.volume_position() {
            (g - 1.0).abs() <= tol
        } else {
            g.abs() <= tol
        }
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_point(
        shape: ProblemShape,
        rng: &mut ChaCha8Rng,
        r_range: Option<(f64, &[f64])>,
    ) -> (Vec<f64>, Vec<f64>) {
        let layout = MomentumLayout::new(shape);
        let q: Vec<f64> = (0..shape.total_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut p: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if let Some((margin, singular)) = r_range {
            for &pos in &layout.higher_positions() {
                let r = loop {
                    let r: f64 = rng.gen_range(-3.0..3.0);
                    if singular.iter().all(|s| (r - s).abs() >= margin) {
                        break r;
                    }
                };
                p[pos] = r;
            }
        }
        (q, p)
    }

    #[test]
    fn closed_form_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let hams: Vec<(ClosedFormHamiltonian, Vec<f64>)> = vec![
            (ClosedFormHamiltonian::Trivial, vec![0.0]),
            (ClosedFormHamiltonian::Dirichlet { b: 0.5 }, vec![-0.5, 1.5]),
            (ClosedFormHamiltonian::Maxwell2D, vec![0.0, -2.0]),
            (ClosedFormHamiltonian::Mechanics { potential: vec![1.0, 2.0] }, vec![]),
            (ClosedFormHamiltonian::ScalarField { n: 2 }, vec![]),
        ];
        for (ham, singular) in &hams {
            let shape = ham.shape();
            for _ in 0..20 {
                let (q, p) = dense_point(shape, &mut rng, Some((0.2, singular)));
                let (gq, gp) = ham.grad(&q, &p).unwrap();
                let step = 1e-6;
                for j in 0..q.len() {
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    qp[j] += step;
                    qm[j] -= step;
                    let fd = (ham.eval(&qp, &p).unwrap() - ham.eval(&qm, &p).unwrap()) / (2.0 * step);
                    assert!((fd - gq[j]).abs() <= 1e-6 * fd.abs().max(1.0));
                }
                for j in 0..p.len() {
                    let mut pp = p.clone();
                    let mut pm = p.clone();
                    pp[j] += step;
                    pm[j] -= step;
                    let fd = (ham.eval(&q, &pp).unwrap() - ham.eval(&q, &pm).unwrap()) / (2.0 * step);
                    assert!(
                        (fd - gp[j]).abs() <= 1e-5 * fd.abs().max(1.0),
                        "{ham:?} axis {j}: {fd} vs {}",
                        gp[j]
                    );
                }
            }
        }
    }

    #[test]
    fn legendre_hamiltonian_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let cases: Vec<(ClosedFormHamiltonian, Vec<f64>)> = vec![
            (ClosedFormHamiltonian::Trivial, vec![0.0]),
            (ClosedFormHamiltonian::Dirichlet { b: 2.0 }, vec![1.0, 3.0]),
            (ClosedFormHamiltonian::Maxwell2D, vec![0.0, -2.0]),
        ];
        for (closed, singular) in &cases {
            let derived = LegendreHamiltonian::new(closed.density(), SubmanifoldChoice::Full);
            for _ in 0..20 {
                let (q, p) = dense_point(closed.shape(), &mut rng, Some((0.15, singular)));
                let expect = closed.eval(&q, &p).unwrap();
                let got = derived.eval(&q, &p).unwrap();
                assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0));
                let (gq_c, gp_c) = closed.grad(&q, &p).unwrap();
                let (gq_d, gp_d) = derived.grad(&q, &p).unwrap();
                for (a, b) in gq_c.iter().zip(&gq_d) {
                    assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0));
                }
                for (a, b) in gp_c.iter().zip(&gp_d) {
                    assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn ambient_layout_and_multisymplectic_form() {
        let shape = ProblemShape::new(1, 1);
        let ambient = AmbientLayout::new(shape, SubmanifoldChoice::Full);
        assert_eq!(ambient.dim(), 4);
        // Ω = de∧dt + dp∧dy has coefficient -1 on sorted keys (1,3), (2,4)
        let omega = ambient.multisymplectic_form();
        assert_eq!(omega.coefficient(&MultiIndex::new(&[1, 3]).unwrap()), -1.0);
        assert_eq!(omega.coefficient(&MultiIndex::new(&[2, 4]).unwrap()), -1.0);
        assert_eq!(omega.num_terms(), 2);

        let ddw22 = AmbientLayout::new(ProblemShape::new(2, 2), SubmanifoldChoice::Ddw);
        assert_eq!(ddw22.dim(), 4 + 5);
        assert_eq!(ddw22.multisymplectic_form().num_terms(), 5);
        let full22 = AmbientLayout::new(ProblemShape::new(2, 2), SubmanifoldChoice::Full);
        assert_eq!(full22.dim(), 10);
        assert_eq!(full22.multisymplectic_form().num_terms(), 6);
    }

    #[test]
    fn order_estimate_of_quadratic_convergence() {
        assert!((order_estimate(4.0, 1.0) - 2.0).abs() < 1e-12);
    }
}
