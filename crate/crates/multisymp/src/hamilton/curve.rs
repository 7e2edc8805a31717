//! Discrete Hamiltonian n-curves: Legendre lifts of grid fields, tangent
//! n-vectors, Hamilton-equation residuals, pseudofiber deformations, and
//! the Euler-Lagrange oracle.

use crate::exterior::ExteriorElement;
use crate::grassmann::{annihilator, tangent_basis_omega, ProblemShape, VelocityMatrix};
use crate::lagrangian::{self, Density};
use crate::legendre::{
    ddw_transform, dedecker_transform, degeneracy_report, w_eval, MomentumLayout,
    SubmanifoldChoice,
};
use crate::linalg;

use super::grid::{Grid, GridField};
use super::{AmbientLayout, HamiltonError, Hamiltonian};

/// A grid-sampled section of the momentum bundle over a graph: per node the
/// field values `u^i` and the dense momentum coefficients (full canonical
/// layout; pinned axes stay zero under the dDW choice).
#[derive(Debug, Clone)]
pub struct DiscreteCurve {
    pub shape: ProblemShape,
    pub choice: SubmanifoldChoice,
    pub grid: Grid,
    pub u: GridField,
    pub p: GridField,
    pub level: Option<f64>,
}

impl DiscreteCurve {
    pub fn from_fields(
        shape: ProblemShape,
        choice: SubmanifoldChoice,
        grid: Grid,
        u: GridField,
        p: GridField,
        level: Option<f64>,
    ) -> Result<Self, HamiltonError> {
        let layout = MomentumLayout::new(shape);
        if grid.ndim() != shape.n || u.comps != shape.k || p.comps != layout.len() {
            return Err(HamiltonError::Mismatch(format!(
                "expected grid dim {}, u comps {}, p comps {}",
                shape.n,
                shape.k,
                layout.len()
            )));
        }
        Ok(DiscreteCurve {
            shape,
            choice,
            grid,
            u,
            p,
            level,
        })
    }

    /// Finite-difference velocity `v^i_mu = ∂u^i/∂x^mu` at a node.
    pub fn velocity_at(&self, multi: &[usize]) -> VelocityMatrix {
        velocity_from_field(&self.u, self.shape, multi)
    }

    /// `(q, p)` coordinates at a node: base point `(x, u(x))` and the dense
    /// momentum coefficients.
    pub fn state_at(&self, multi: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut q = self.grid.coords(multi);
        for i in 0..self.shape.k {
            q.push(self.u.get(multi, i));
        }
        let layout_len = self.p.comps;
        let p = (0..layout_len).map(|c| self.p.get(multi, c)).collect();
        (q, p)
    }
}

pub(crate) fn velocity_from_field(u: &GridField, shape: ProblemShape, multi: &[usize]) -> VelocityMatrix {
    VelocityMatrix::from_fn(shape, |i, mu| u.derivative(multi, i - 1, mu - 1))
}

/// Lifts a grid field to a Hamiltonian n-curve candidate: velocities by
/// finite differences, momenta through the chosen Legendre transform, and
/// the energy slot set so the Hamiltonian equals `h` at every node.
pub fn legendre_lift<D: Density>(
    density: &D,
    grid: &Grid,
    u: &GridField,
    choice: SubmanifoldChoice,
    higher: Option<&GridField>,
    h: f64,
) -> Result<DiscreteCurve, HamiltonError> {
    let shape = density.shape();
    let layout = MomentumLayout::new(shape);
    if grid.ndim() != shape.n || u.comps != shape.k {
        return Err(HamiltonError::Mismatch(format!(
            "lift needs an n = {} grid carrying k = {} components",
            shape.n, shape.k
        )));
    }
    if grid.npts.iter().any(|&m| m < 3) {
        return Err(HamiltonError::Mismatch(
            "need at least 3 nodes per axis for central differences".into(),
        ));
    }
    let n_higher = layout.higher_positions().len();
    if let Some(hf) = higher {
        if hf.comps != n_higher {
            return Err(HamiltonError::Mismatch(format!(
                "higher field must carry {n_higher} components"
            )));
        }
    }

    let mut p = GridField::zeros(grid.clone(), layout.len());
    for multi in grid.nodes() {
        let coords = grid.coords(&multi);
        let yvals: Vec<f64> = (0..shape.k).map(|i| u.get(&multi, i)).collect();
        let v = velocity_from_field(u, shape, &multi);
        let hvals: Vec<f64> = match higher {
            Some(hf) => (0..n_higher).map(|c| hf.get(&multi, c)).collect(),
            None => vec![0.0; n_higher],
        };
        // the curve must determine v from p: reject nodes where the
        // correspondence degenerates for this submanifold choice
        let degeneracy = degeneracy_report(density, &coords, &yvals, &v, choice, &hvals)?;
        if !degeneracy.solvable {
            return Err(HamiltonError::DegenerateNode {
                node: multi.clone(),
                message: degeneracy.message,
            });
        }
        let point = match choice {
            SubmanifoldChoice::Ddw => ddw_transform(density, &coords, &yvals, &v)?,
            SubmanifoldChoice::Full => dedecker_transform(density, &coords, &yvals, &v, &hvals)?.0,
        };
        // H(q, p) = W(q, z, p) on the pseudofiber; e enters linearly
        let w0 = w_eval(density, &coords, &yvals, &v, &point.p);
        let mut coeffs = layout.dense(&point.p);
        super::set_level(&layout, w0, h, &mut coeffs);
        for (c, &value) in coeffs.iter().enumerate() {
            p.set(&multi, c, value);
        }
    }
    DiscreteCurve::from_fields(shape, choice, grid.clone(), u.clone(), p, Some(h))
}

/// The decomposable tangent n-vector of the curve at a node, computed from
/// finite-difference tangents in the full `(q, p)` space and normalized by
/// construction to `<X, ω> = 1`.
pub fn tangent_n_vector(
    curve: &DiscreteCurve,
    multi: &[usize],
    ambient: &AmbientLayout,
) -> ExteriorElement {
    let shape = curve.shape;
    let mut x = crate::exterior::ExteriorElement::scalar(
        ambient.dim(),
        crate::exterior::Variance::Vector,
        1.0,
    );
    for mu in 0..shape.n {
        let mut q_comps = vec![0.0; shape.total_dim()];
        q_comps[mu] = 1.0;
        for i in 0..shape.k {
            q_comps[shape.n + i] = curve.u.derivative(multi, i, mu);
        }
        let p_comps: Vec<f64> = ambient
            .present()
            .iter()
            .map(|&pos| curve.p.derivative(multi, pos, mu))
            .collect();
        let t_mu = ambient.vector(&q_comps, &p_comps);
        x = x.wedge(&t_mu).expect("ambient dimensions agree");
    }
    x
}

/// Per-node norms of the Hamilton-equation defect `X ⌟ Ω - (-1)^n dH`,
/// with statistics over interior nodes (boundary stencils are one-sided
/// and would pollute convergence measurements).
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// Euclidean norm of the residual 1-form per node, flat node order.
    pub per_node: Vec<f64>,
    pub max_norm: f64,
    pub mean_norm: f64,
}

impl ResidualReport {
    fn from_norms(grid: &Grid, per_node: Vec<f64>, margin: usize) -> Self {
        let mut max_norm = 0.0f64;
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for (idx, &norm) in per_node.iter().enumerate() {
            if grid.is_interior(&grid.unflat(idx), margin) {
                max_norm = max_norm.max(norm);
                sum += norm;
                count += 1;
            }
        }
        ResidualReport {
            per_node,
            max_norm,
            mean_norm: if count > 0 { sum / count as f64 } else { 0.0 },
        }
    }
}

fn one_form_norm(form: &ExteriorElement) -> f64 {
    form.terms().map(|(_, c)| c * c).sum::<f64>().sqrt()
}

/// Evaluates `X ⌟ Ω - (-1)^n dH` at every node of the curve.
pub fn hamilton_residual<H: Hamiltonian>(
    curve: &DiscreteCurve,
    hamiltonian: &H,
) -> Result<ResidualReport, HamiltonError> {
    if hamiltonian.shape() != curve.shape {
        return Err(HamiltonError::Mismatch("shape disagreement".into()));
    }
    if hamiltonian.choice() != curve.choice {
        return Err(HamiltonError::Mismatch(
            "Hamiltonian and curve live on different submanifold choices".into(),
        ));
    }
    let ambient = AmbientLayout::new(curve.shape, curve.choice);
    let omega = ambient.multisymplectic_form();
    let sign = if curve.shape.n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut per_node = vec![0.0; curve.grid.num_nodes()];
    for multi in curve.grid.nodes() {
        let x = tangent_n_vector(curve, &multi, &ambient);
        let (q, p) = curve.state_at(&multi);
        let (gq, gp) = hamiltonian.grad(&q, &p)?;
        let dh = ambient.one_form(&gq, &gp);
        let residual = x
            .interior_left(&omega)
            .expect("degrees n <= n+1")
            .add(&dh.scaled(-sign))
            .expect("same ambient axes");
        per_node[curve.grid.flat(&multi)] = one_form_norm(&residual);
    }
    Ok(ResidualReport::from_norms(&curve.grid, per_node, 1))
}

/// Shifts the momenta nodewise by a section of the enlarged-pseudofiber
/// directions, leaving the base projection untouched. Each `pi(node)` must
/// lie in the span of `(T_z D^ω)^⊥` at that node's velocity (projection
/// residual at most 1e-9); that span depends only on the curve's graph, not
/// on the density.
pub fn deform_along_pseudofiber(
    curve: &DiscreteCurve,
    pi: &GridField,
) -> Result<DiscreteCurve, HamiltonError> {
    let shape = curve.shape;
    let layout = MomentumLayout::new(shape);
    if pi.comps != layout.len() {
        return Err(HamiltonError::Mismatch(format!(
            "deformation field must carry {} momentum components",
            layout.len()
        )));
    }
    let mut p = curve.p.clone();
    for multi in curve.grid.nodes() {
        let pi_vec: Vec<f64> = (0..layout.len()).map(|c| pi.get(&multi, c)).collect();
        if pi_vec.iter().all(|&c| c == 0.0) {
            continue;
        }
        let v = curve.velocity_at(&multi);
        let directions = annihilator(&tangent_basis_omega(&v)?)?;
        let dir_dense: Vec<Vec<f64>> = directions.iter().map(|d| layout.dense(d)).collect();
        let residual = linalg::projection_residual(&pi_vec, &dir_dense);
        if residual > 1e-9 {
            return Err(HamiltonError::OutsidePseudofiber {
                node: multi.clone(),
                residual,
            });
        }
        for (c, &delta) in pi_vec.iter().enumerate() {
            let cur = p.get(&multi, c);
            p.set(&multi, c, cur + delta);
        }
    }
    DiscreteCurve::from_fields(shape, curve.choice, curve.grid.clone(), curve.u.clone(), p, None)
}

/// The Euler-Lagrange defect `Σ_mu D_mu(∂l/∂v^i_mu) - ∂l/∂y^i` by nested
/// central differences: the Lagrangian-side oracle the Hamilton residuals
/// are compared against. Returns a `k`-component field.
pub fn euler_lagrange_residual<D: Density>(
    density: &D,
    grid: &Grid,
    u: &GridField,
) -> Result<GridField, HamiltonError> {
    let shape = density.shape();
    if grid.ndim() != shape.n || u.comps != shape.k {
        return Err(HamiltonError::Mismatch(format!(
            "expected an n = {} grid with k = {} components",
            shape.n, shape.k
        )));
    }
    // momentum field g^i_mu = ∂l/∂v^i_mu(x, u, ∇u) on every node
    let mut g = GridField::zeros(grid.clone(), shape.n * shape.k);
    for multi in grid.nodes() {
        let coords = grid.coords(&multi);
        let yvals: Vec<f64> = (0..shape.k).map(|i| u.get(&multi, i)).collect();
        let v = velocity_from_field(u, shape, &multi);
        let grad = lagrangian::grad_v(density, &coords, &yvals, &v);
        for (c, &value) in grad.iter().enumerate() {
            g.set(&multi, c, value);
        }
    }
    let mut residual = GridField::zeros(grid.clone(), shape.k);
    for multi in grid.nodes() {
        let coords = grid.coords(&multi);
        let yvals: Vec<f64> = (0..shape.k).map(|i| u.get(&multi, i)).collect();
        let v = velocity_from_field(u, shape, &multi);
        let (_, grad_y) = lagrangian::grad_xy(density, &coords, &yvals, &v);
        for (i, gy) in grad_y.iter().enumerate() {
            let mut div = 0.0;
            for mu in 0..shape.n {
                div += g.derivative(&multi, i * shape.n + mu, mu);
            }
            residual.set(&multi, i, div - gy);
        }
    }
    Ok(residual)
}

/// Max and mean Euclidean node norms of a field over the interior at the
/// given margin.
pub fn field_stats(field: &GridField, margin: usize) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for multi in field.grid.nodes() {
        if !field.grid.is_interior(&multi, margin) {
            continue;
        }
        let norm: f64 = (0..field.comps)
            .map(|c| field.get(&multi, c).powi(2))
            .sum::<f64>()
            .sqrt();
        max = max.max(norm);
        sum += norm;
        count += 1;
    }
    (max, if count > 0 { sum / count as f64 } else { 0.0 })
}
