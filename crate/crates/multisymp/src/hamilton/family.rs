//! The coordinate-adapted family of decomposable solutions of the Hamilton
//! equation at a point with `d_p H = dp_{1..n}`:
//!
//! ```text
//! X_mu = ∂/∂q^mu - (∂H/∂q^mu) ∂/∂p_{1..n} + M_mu + R_mu,
//! ```
//!
//! where `R_mu` ranges freely over the axes with two or more fiber indices
//! and the `M_mu` components on the single-fiber-index axes satisfy the
//! trace constraint `Σ_mu M^mu_{mu,beta} = -∂H/∂q^beta`.

use rand::Rng;

use crate::exterior::ExteriorElement;
use crate::grassmann::ProblemShape;
use crate::legendre::SubmanifoldChoice;

use super::{is_adapted, AmbientLayout, HamiltonError, Hamiltonian};

/// Sampler for `[X]^H_m` at an adapted point `m`. The ambient space is the
/// full Lepage-Dedecker phase space.
#[derive(Debug, Clone)]
pub struct NVectorFamily {
    pub shape: ProblemShape,
    pub ambient: AmbientLayout,
    grad_q: Vec<f64>,
    grad_p: Vec<f64>,
}

/// Free coefficients of one family member: the `M^nu_{mu,beta}` components
/// (the trace part is overwritten by the constraint) and the `R` components
/// per higher axis.
#[derive(Debug, Clone)]
pub struct FamilyCoefficients {
    /// `m[mu-1][nu-1][beta-n-1]` = `M^nu_{mu,beta}`.
    pub m: Vec<Vec<Vec<f64>>>,
    /// `r[mu-1][slot]` over the higher-axis slots in layout order.
    pub r: Vec<Vec<f64>>,
}

impl NVectorFamily {
    /// Builds the family at `(q, p)`, rejecting points where the momentum
    /// gradient is not `dp_{1..n}` (those would require a genuine change of
    /// coordinates on the base).
    pub fn at<H: Hamiltonian>(hamiltonian: &H, q: &[f64], p: &[f64]) -> Result<Self, HamiltonError> {
        let shape = hamiltonian.shape();
        let ambient = AmbientLayout::new(shape, SubmanifoldChoice::Full);
        let (grad_q, grad_p) = hamiltonian.grad(q, p)?;
        if !is_adapted(ambient.momentum(), &grad_p, 1e-9) {
            return Err(HamiltonError::NotAdapted(format!(
                "d_p H = {grad_p:?}, expected 1 on the volume axis and 0 elsewhere"
            )));
        }
        Ok(NVectorFamily {
            shape,
            ambient,
            grad_q,
            grad_p,
        })
    }

    /// Zero free coefficients.
    pub fn zero_coefficients(&self) -> FamilyCoefficients {
        let (n, k) = (self.shape.n, self.shape.k);
        let higher = self.ambient.momentum().higher_positions().len();
        FamilyCoefficients {
            m: vec![vec![vec![0.0; k]; n]; n],
            r: vec![vec![0.0; higher]; n],
        }
    }

    /// The special solution from the pseudofiber-direction analysis:
    /// `M^1_{1,beta} = -∂H/∂q^beta`, everything else zero.
    pub fn special_coefficients(&self) -> FamilyCoefficients {
        let mut coeffs = self.zero_coefficients();
        for beta in 0..self.shape.k {
            coeffs.m[0][0][beta] = -self.grad_q[self.shape.n + beta];
        }
        coeffs
    }

    /// Random admissible coefficients: everything uniform in `[-1, 1]`,
    /// then the diagonal trace entries `M^n_{n,beta}` adjusted to satisfy
    /// the constraint.
    pub fn sample_coefficients<R: Rng>(&self, rng: &mut R) -> FamilyCoefficients {
        let (n, k) = (self.shape.n, self.shape.k);
        let mut coeffs = self.zero_coefficients();
        for mu in 0..n {
            for nu in 0..n {
                for beta in 0..k {
                    coeffs.m[mu][nu][beta] = rng.gen_range(-1.0..1.0);
                }
            }
            for slot in 0..coeffs.r[mu].len() {
                coeffs.r[mu][slot] = rng.gen_range(-1.0..1.0);
            }
        }
        for beta in 0..k {
            let partial: f64 = (0..n - 1).map(|mu| coeffs.m[mu][mu][beta]).sum();
            coeffs.m[n - 1][n - 1][beta] = -self.grad_q[self.shape.n + beta] - partial;
        }
        coeffs
    }

    /// The `n` tangent vectors `X_mu` for the given free coefficients.
    pub fn vectors(&self, coeffs: &FamilyCoefficients) -> Vec<ExteriorElement> {
        let (n, k) = (self.shape.n, self.shape.k);
        let layout = self.ambient.momentum();
        let higher_positions = layout.higher_positions();
        let present = self.ambient.present();
        let slot_of = |pos: usize| present.iter().position(|&p| p == pos).expect("full ambient");
        (0..n)
            .map(|mu| {
                let mut q_comps = vec![0.0; self.shape.total_dim()];
                q_comps[mu] = 1.0;
                let mut p_comps = vec![0.0; present.len()];
                p_comps[slot_of(layout.volume_position())] = -self.grad_q[mu];
                for nu in 0..n {
                    for beta in 0..k {
                        // X_{mu, (1..nu-hat..n, n+beta)} = (-1)^{n+nu} M^nu_{mu,beta}
                        let (pos, _) = layout.mixed_position(beta + 1, nu + 1);
                        let sign = if (n + nu + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
                        p_comps[slot_of(pos)] += sign * coeffs.m[mu][nu][beta];
                    }
                }
                for (slot, &pos) in higher_positions.iter().enumerate() {
                    p_comps[slot_of(pos)] += coeffs.r[mu][slot];
                }
                self.ambient.vector(&q_comps, &p_comps)
            })
            .collect()
    }

    /// Wedges the `n` family vectors into the decomposable solution.
    pub fn assemble(&self, vectors: &[ExteriorElement]) -> ExteriorElement {
        let mut x = ExteriorElement::scalar(self.ambient.dim(), crate::exterior::Variance::Vector, 1.0);
        for v in vectors {
            x = x.wedge(v).expect("ambient dimensions agree");
        }
        x
    }

    /// Sup-norm of `X ⌟ Ω - (-1)^n dH` over the ambient axes.
    pub fn hamilton_defect(&self, x: &ExteriorElement) -> f64 {
        let omega = self.ambient.multisymplectic_form();
        let sign = if self.shape.n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let dh = self.ambient.one_form(&self.grad_q, &self.grad_p);
        x.interior_left(&omega)
            .expect("degree n against n+1")
            .add(&dh.scaled(-sign))
            .expect("same ambient axes")
            .max_abs()
    }
}
