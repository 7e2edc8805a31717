//! Lagrangian densities `l(x, y, v)` evaluated generically over plain or
//! dual scalars, so first and second derivatives come from the same
//! evaluator via forward-mode seeding.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dual::{Dual, Dual2, DualOf, Scalar};
use crate::grassmann::{ProblemShape, VelocityMatrix};

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("unknown density '{0}'")]
    UnknownDensity(String),
    #[error("density '{name}' does not accept parameter '{param}'")]
    UnknownParameter { name: String, param: String },
}

/// A first-order Lagrangian density, generic over the scalar type so that
/// the same evaluator yields values, gradients and Hessians.
///
/// The velocity slice is the row-major `k x n` layout of
/// [`VelocityMatrix`]: entry `(i, mu)` sits at `(i-1)*n + (mu-1)`.
pub trait Density {
    fn shape(&self) -> ProblemShape;
    fn name(&self) -> &'static str;
    fn evaluate<T: Scalar>(&self, x: &[T], y: &[T], v: &[T]) -> T;
}

/// The built-in densities: classical point mechanics, the trivial density,
/// the Dirichlet integral with a determinant coupling, two-dimensional
/// Maxwell theory, and the scalar field.
#[derive(Debug, Clone, PartialEq)]
pub enum LagrangianDensity {
    /// `l = 0` on maps `R^2 -> R^2`; every map is a critical point.
    Trivial,
    /// `l = ½|v|^2 + B (v^1_1 v^2_2 - v^1_2 v^2_1)` on maps `R^2 -> R^2`.
    Dirichlet { b: f64 },
    /// `l = -½ (v^1_2 - v^2_1)^2` on maps `R^2 -> R^2` (potential components).
    Maxwell2D,
    /// `l = ½|v|^2 - V(y)` with quadratic `V(y) = ½ Σ c_i y_i^2`, `n = 1`.
    Mechanics { potential: Vec<f64> },
    /// `l = ½ Σ_mu (v^1_mu)^2` on maps `R^n -> R`.
    ScalarField { n: usize },
}

impl LagrangianDensity {
    /// Looks a density up by its registry name, applying `params`.
    /// Recognized parameters: `b` (dirichlet), `c1..c9` (mechanics potential
    /// coefficients), `n` (scalar_field base dimension).
    pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, DensityError> {
        let reject_params = |density: &str| -> Result<(), DensityError> {
            if let Some(p) = params.keys().next() {
                return Err(DensityError::UnknownParameter {
                    name: density.to_string(),
                    param: p.clone(),
                });
            }
            Ok(())
        };
        match name {
            "trivial" => {
                reject_params("trivial")?;
                Ok(LagrangianDensity::Trivial)
            }
            "dirichlet" => {
                let b = params.get("b").copied().unwrap_or(0.0);
                if let Some(p) = params.keys().find(|p| p.as_str() != "b") {
                    return Err(DensityError::UnknownParameter {
                        name: name.to_string(),
                        param: p.clone(),
                    });
                }
                Ok(LagrangianDensity::Dirichlet { b })
            }
            "maxwell2d" => {
                reject_params("maxwell2d")?;
                Ok(LagrangianDensity::Maxwell2D)
            }
            "mechanics" => {
                let mut potential = Vec::new();
                for i in 1..=9 {
                    if let Some(&c) = params.get(&format!("c{i}")) {
                        potential.resize(i, 0.0);
                        potential[i - 1] = c;
                    }
                }
                if potential.is_empty() {
                    potential.push(1.0);
                }
                if let Some(p) = params.keys().find(|p| !p.starts_with('c')) {
                    return Err(DensityError::UnknownParameter {
                        name: name.to_string(),
                        param: p.clone(),
                    });
                }
                Ok(LagrangianDensity::Mechanics { potential })
            }
            "scalar_field" => {
                let n = params.get("n").copied().unwrap_or(2.0) as usize;
                if let Some(p) = params.keys().find(|p| p.as_str() != "n") {
                    return Err(DensityError::UnknownParameter {
                        name: name.to_string(),
                        param: p.clone(),
                    });
                }
                Ok(LagrangianDensity::ScalarField { n: n.max(1) })
            }
            other => Err(DensityError::UnknownDensity(other.to_string())),
        }
    }
}

impl Density for LagrangianDensity {
    fn shape(&self) -> ProblemShape {
        match self {
            LagrangianDensity::Trivial
            | LagrangianDensity::Dirichlet { .. }
            | LagrangianDensity::Maxwell2D => ProblemShape::new(2, 2),
            LagrangianDensity::Mechanics { potential } => ProblemShape::new(1, potential.len()),
            LagrangianDensity::ScalarField { n } => ProblemShape::new(*n, 1),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            LagrangianDensity::Trivial => "trivial",
            LagrangianDensity::Dirichlet { .. } => "dirichlet",
            LagrangianDensity::Maxwell2D => "maxwell2d",
            LagrangianDensity::Mechanics { .. } => "mechanics",
            LagrangianDensity::ScalarField { .. } => "scalar_field",
        }
    }

    fn evaluate<T: Scalar>(&self, _x: &[T], y: &[T], v: &[T]) -> T {
        let half = T::from_f64(0.5);
        match self {
            LagrangianDensity::Trivial => T::zero(),
            LagrangianDensity::Dirichlet { b } => {
                // row-major (2,2): v[0]=v^1_1, v[1]=v^1_2, v[2]=v^2_1, v[3]=v^2_2
                let norm2 = v.iter().fold(T::zero(), |acc, c| acc + c.clone() * c.clone());
                let det = v[0].clone() * v[3].clone() - v[1].clone() * v[2].clone();
                half * norm2 + T::from_f64(*b) * det
            }
            LagrangianDensity::Maxwell2D => {
                let f = v[1].clone() - v[2].clone();
                -(half * f.clone() * f)
            }
            LagrangianDensity::Mechanics { potential } => {
                let kinetic = v.iter().fold(T::zero(), |acc, c| acc + c.clone() * c.clone());
                let pot = potential
                    .iter()
                    .zip(y)
                    .fold(T::zero(), |acc, (&c, yi)| {
                        acc + T::from_f64(c) * yi.clone() * yi.clone()
                    });
                half.clone() * kinetic - half * pot
            }
            LagrangianDensity::ScalarField { .. } => {
                half * v.iter().fold(T::zero(), |acc, c| acc + c.clone() * c.clone())
            }
        }
    }
}

fn constants<T: Scalar>(values: &[f64]) -> Vec<T> {
    values.iter().map(|&c| T::from_f64(c)).collect()
}

pub fn eval<D: Density>(density: &D, x: &[f64], y: &[f64], v: &VelocityMatrix) -> f64 {
    density.evaluate(x, y, v.entries())
}

/// `∂l/∂v^i_mu` in row-major `k x n` order, one forward pass with `n*k` seeds.
pub fn grad_v<D: Density>(density: &D, x: &[f64], y: &[f64], v: &VelocityMatrix) -> Vec<f64> {
    let nk = v.entries().len();
    let xs: Vec<Dual> = constants(x);
    let ys: Vec<Dual> = constants(y);
    let vs: Vec<Dual> = v
        .entries()
        .iter()
        .enumerate()
        .map(|(j, &c)| Dual::seeded(c, j, nk))
        .collect();
    let out = density.evaluate(&xs, &ys, &vs);
    (0..nk).map(|j| out.d.get(j).copied().unwrap_or(0.0)).collect()
}

/// `(∂l/∂x^mu, ∂l/∂y^i)` at fixed velocity, for assembling `∂H/∂q`.
pub fn grad_xy<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let seeds = n + y.len();
    let xs: Vec<Dual> = x
        .iter()
        .enumerate()
        .map(|(j, &c)| Dual::seeded(c, j, seeds))
        .collect();
    let ys: Vec<Dual> = y
        .iter()
        .enumerate()
        .map(|(j, &c)| Dual::seeded(c, n + j, seeds))
        .collect();
    let vs: Vec<Dual> = constants(v.entries());
    let out = density.evaluate(&xs, &ys, &vs);
    let grab = |j: usize| out.d.get(j).copied().unwrap_or(0.0);
    ((0..n).map(grab).collect(), (n..seeds).map(grab).collect())
}

/// `∂L/∂z` expressed against `tangent_basis_omega`: in the graph chart
/// `L(q, z(v)) = l(x, y, v)`, so these are exactly the `grad_v` entries in
/// the same row-major order.
pub fn grad_z<D: Density>(density: &D, x: &[f64], y: &[f64], v: &VelocityMatrix) -> Vec<f64> {
    grad_v(density, x, y, v)
}

/// Second derivatives `∂²l/∂v^i_mu ∂v^j_nu` as an `nk x nk` matrix in the
/// row-major velocity order, via nested duals.
pub fn hessian_vv<D: Density>(
    density: &D,
    x: &[f64],
    y: &[f64],
    v: &VelocityMatrix,
) -> nalgebra::DMatrix<f64> {
    let nk = v.entries().len();
    let xs: Vec<Dual2> = constants(x);
    let ys: Vec<Dual2> = constants(y);
    let vs: Vec<Dual2> = v
        .entries()
        .iter()
        .enumerate()
        .map(|(j, &c)| DualOf::seeded(Dual::seeded(c, j, nk), j, nk))
        .collect();
    let out = density.evaluate(&xs, &ys, &vs);
    nalgebra::DMatrix::from_fn(nk, nk, |a, b| {
        out.d
            .get(a)
            .and_then(|row| row.d.get(b))
            .copied()
            .unwrap_or(0.0)
    })
}
