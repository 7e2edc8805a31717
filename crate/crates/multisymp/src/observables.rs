//! Observables on the multisymplectic phase space: generalized brackets and
//! r-regularity tests, slice functionals over codimension-1 intersections,
//! generalized pseudofiber directions from the Hamilton-equation sampling,
//! and the pataplectic-invariance check.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dual::Dual;
use crate::exterior::MultiIndex;
use crate::grassmann::{annihilator, tangent_basis_full};
use crate::hamilton::{
    hamilton_residual, AmbientLayout, DiscreteCurve, GridField, HamiltonError, Hamiltonian,
    NVectorFamily,
};
use crate::legendre::MomentumLayout;
use crate::linalg;

#[derive(Debug, Error)]
pub enum ObservablesError {
    #[error("observable has {got} components, expected {expected}")]
    Components { got: usize, expected: usize },
    #[error("r = {r} exceeds the base dimension n = {n}")]
    TooManyComponents { r: usize, n: usize },
    #[error("bracket position mu = {mu} outside 1..={n}")]
    BadBracketPosition { mu: usize, n: usize },
    #[error("tangential crossing of the slice level (gradient {0:.3e} below threshold)")]
    TangentialCrossing(f64),
    #[error("ambiguous slice topology in cell {0:?}: {1} edge crossings")]
    AmbiguousTopology(Vec<usize>, usize),
    #[error("declared factorization deviates by {0:.3e} from the evaluator")]
    FactorizationInconsistent(f64),
    #[error("xi section leaves the pseudofiber directions at node {node:?} (projection residual {residual:.3e})")]
    XiOutsidePseudofiber { node: Vec<usize>, residual: f64 },
    #[error(transparent)]
    Hamilton(#[from] HamiltonError),
}

/// Dual-valued evaluator of an observable: `(q, p)` in, one dual per
/// component out.
pub type ObservableEvaluator = dyn Fn(&[Dual], &[Dual]) -> Vec<Dual> + Send + Sync;

/// Declared factorization `f_hat(q, h)` of an observable through the
/// Hamiltonian value.
pub type FactorizationFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;

/// An `R^r`-valued function of `(q, p)` with forward-mode derivatives; the
/// momenta enter as dense coefficients over the full canonical layout. An
/// optional factorization `f(q, p) = f_hat(q, H(q, p))` can be declared and
/// is then consistency-checked on sampled points.
pub struct ObservableFunction {
    components: usize,
    evaluator: Box<ObservableEvaluator>,
    factorization: Option<Box<FactorizationFn>>,
}

impl ObservableFunction {
    pub fn new<F>(components: usize, evaluator: F) -> Self
    where
        F: Fn(&[Dual], &[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        ObservableFunction {
            components,
            evaluator: Box::new(evaluator),
            factorization: None,
        }
    }

    pub fn with_factorization<G>(mut self, factorization: G) -> Self
    where
        G: Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    {
        self.factorization = Some(Box::new(factorization));
        self
    }

    /// The coordinate function `q^axis` (1-based over `x` then `y` axes).
    pub fn coordinate(axis: usize) -> Self {
        Self::coordinates(&[axis])
    }

    /// A tuple of coordinate functions, one component per axis.
    pub fn coordinates(axes: &[usize]) -> Self {
        let axes_owned = axes.to_vec();
        let axes_for_factorization = axes_owned.clone();
        Self::new(axes_owned.len(), move |q, _p| {
            axes_owned.iter().map(|&a| q[a - 1].clone()).collect()
        })
        .with_factorization(move |q, _h| {
            axes_for_factorization.iter().map(|&a| q[a - 1]).collect()
        })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn eval(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        let qd: Vec<Dual> = q.iter().map(|&c| Dual::constant(c, 0)).collect();
        let pd: Vec<Dual> = p.iter().map(|&c| Dual::constant(c, 0)).collect();
        (self.evaluator)(&qd, &pd).into_iter().map(|d| d.val).collect()
    }

    /// Per component: the pair `(d_q f, d_p f)`.
    pub fn grad(&self, q: &[f64], p: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let nq = q.len();
        let seeds = nq + p.len();
        let qd: Vec<Dual> = q
            .iter()
            .enumerate()
            .map(|(j, &c)| Dual::seeded(c, j, seeds))
            .collect();
        let pd: Vec<Dual> = p
            .iter()
            .enumerate()
            .map(|(j, &c)| Dual::seeded(c, nq + j, seeds))
            .collect();
        (self.evaluator)(&qd, &pd)
            .into_iter()
            .map(|out| {
                let grab = |j: usize| out.d.get(j).copied().unwrap_or(0.0);
                (
                    (0..nq).map(grab).collect::<Vec<f64>>(),
                    (nq..seeds).map(grab).collect::<Vec<f64>>(),
                )
            })
            .collect()
    }

    /// Deviation `max_i |f^i(q,p) - f_hat^i(q, h)|` when a factorization is
    /// declared; `None` otherwise.
    pub fn factorization_deviation(&self, q: &[f64], p: &[f64], h_value: f64) -> Option<f64> {
        let fhat = self.factorization.as_ref()?;
        let direct = self.eval(q, p);
        let through = fhat(q, h_value);
        Some(
            direct
                .iter()
                .zip(&through)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        )
    }
}

/// The generalized bracket
/// `{H,f}^{a_1..a_n}_{a_mu} = ∂H/∂p_A ∂f/∂q^{a_mu} - ∂f/∂p_A ∂H/∂q^{a_mu}`
/// for a scalar observable, a momentum multi-index `A` and a position
/// `mu` inside it.
pub fn bracket<H: Hamiltonian>(
    hamiltonian: &H,
    f: &ObservableFunction,
    alpha: &MultiIndex,
    mu: usize,
    q: &[f64],
    p: &[f64],
) -> Result<f64, ObservablesError> {
    if f.components() != 1 {
        return Err(ObservablesError::Components {
            got: f.components(),
            expected: 1,
        });
    }
    let n = hamiltonian.shape().n;
    if mu == 0 || mu > n {
        return Err(ObservablesError::BadBracketPosition { mu, n });
    }
    let layout = MomentumLayout::new(hamiltonian.shape());
    let pos = layout
        .indices()
        .iter()
        .position(|mi| mi == alpha)
        .expect("alpha is a momentum multi-index");
    let q_axis = alpha.indices()[mu - 1] as usize;
    let (gq_h, gp_h) = hamiltonian.grad(q, p)?;
    let grads_f = f.grad(q, p);
    let (gq_f, gp_f) = &grads_f[0];
    Ok(gp_h[pos] * gq_f[q_axis - 1] - gp_f[pos] * gq_h[q_axis - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularityCondition {
    /// The point-slice decomposition `df^i = λ^i dH + Σ_α a^i_α dq^α` with a
    /// rank-r block over the base axes: the numeric form of "f factors
    /// through `(q, H)` and genuinely uses the space-time coordinates".
    Factorization,
    /// The generalized-bracket family must not vanish.
    Bracket,
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub regular: bool,
    pub failing_sample: Option<usize>,
    pub failing_condition: Option<RegularityCondition>,
    /// Largest least-squares residual of `d_p f^i = λ^i d_p H` over samples.
    pub max_factorization_residual: f64,
    /// Smallest r-th singular value of the base-axes block over samples.
    pub min_base_rank_sigma: f64,
    /// Smallest over samples of the largest grand-bracket coefficient.
    pub min_bracket_magnitude: f64,
    /// Largest declared-factorization deviation, when one is declared.
    pub max_declared_deviation: Option<f64>,
}

const FACTORIZATION_TOL: f64 = 1e-8;
const BRACKET_TOL: f64 = 1e-8;

/// Tests `r`-regularity of `f` against `H` at the supplied sample points:
/// (a) each `df^i` decomposes as `λ^i dH + Σ a^i_α dq^α` with the base-axes
/// block `(∂f^i/∂x^mu - λ^i ∂H/∂x^mu)` of rank `r`; (b) the coefficient
/// family `{{H, f^1, .., f^r}}` has a nonvanishing entry. Certification is
/// per-sample only; the caller chooses the points.
pub fn is_regular<H: Hamiltonian>(
    hamiltonian: &H,
    f: &ObservableFunction,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> Result<RegularityReport, ObservablesError> {
    let shape = hamiltonian.shape();
    let r = f.components();
    if r > shape.n {
        return Err(ObservablesError::TooManyComponents { r, n: shape.n });
    }
    let layout = MomentumLayout::new(shape);
    let mut report = RegularityReport {
        regular: true,
        failing_sample: None,
        failing_condition: None,
        max_factorization_residual: 0.0,
        min_base_rank_sigma: f64::INFINITY,
        min_bracket_magnitude: f64::INFINITY,
        max_declared_deviation: None,
    };

    for (sample_idx, (q, p)) in samples.iter().enumerate() {
        let (gq_h, gp_h) = hamiltonian.grad(q, p)?;
        let grads_f = f.grad(q, p);
        let h_value = hamiltonian.eval(q, p)?;

        if let Some(dev) = f.factorization_deviation(q, p, h_value) {
            let slot = report.max_declared_deviation.get_or_insert(0.0);
            *slot = slot.max(dev);
            if dev > 1e-9 {
                return Err(ObservablesError::FactorizationInconsistent(dev));
            }
        }

        // condition (a): least-squares λ^i, then the base-axes block rank
        let dph_norm2: f64 = gp_h.iter().map(|g| g * g).sum();
        let scale = dph_norm2.sqrt().max(1.0);
        let mut lambdas = Vec::with_capacity(r);
        let mut condition_a = true;
        for (_, gp_f) in &grads_f {
            let lambda = if dph_norm2 > 0.0 {
                gp_f.iter().zip(&gp_h).map(|(a, b)| a * b).sum::<f64>() / dph_norm2
            } else {
                0.0
            };
            let residual: f64 = gp_f
                .iter()
                .zip(&gp_h)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            report.max_factorization_residual = report.max_factorization_residual.max(residual);
            if residual > FACTORIZATION_TOL * scale {
                condition_a = false;
            }
            lambdas.push(lambda);
        }
        let base_block = nalgebra::DMatrix::from_fn(r, shape.n, |i, mu| {
            grads_f[i].0[mu] - lambdas[i] * gq_h[mu]
        });
        let sigmas = linalg::singular_values(&base_block);
        let sigma_r = sigmas.get(r - 1).copied().unwrap_or(0.0);
        report.min_base_rank_sigma = report.min_base_rank_sigma.min(sigma_r);
        if sigma_r < FACTORIZATION_TOL {
            condition_a = false;
        }
        if !condition_a {
            report.regular = false;
            report.failing_sample.get_or_insert(sample_idx);
            report
                .failing_condition
                .get_or_insert(RegularityCondition::Factorization);
            continue;
        }

        // condition (b): the grand bracket family over all (A, mu-subset)
        let mut max_coeff = 0.0f64;
        for pos in 0..layout.len() {
            for mu_set in subsets(shape.n, r) {
                // det over rows (dH, df^1..df^r) and columns
                // (∂p_A, ∂q^{a_{mu_1}}, ..)
                let dim = r + 1;
                let alpha = layout.multi_index(pos);
                let m = nalgebra::DMatrix::from_fn(dim, dim, |row, col| {
                    let (gq, gp): (&[f64], &[f64]) = if row == 0 {
                        (&gq_h, &gp_h)
                    } else {
                        (&grads_f[row - 1].0, &grads_f[row - 1].1)
                    };
                    if col == 0 {
                        gp[pos]
                    } else {
                        let q_axis = alpha.indices()[mu_set[col - 1] - 1] as usize;
                        gq[q_axis - 1]
                    }
                });
                max_coeff = max_coeff.max(m.determinant().abs());
            }
        }
        report.min_bracket_magnitude = report.min_bracket_magnitude.min(max_coeff);
        if max_coeff < BRACKET_TOL {
            report.regular = false;
            report.failing_sample.get_or_insert(sample_idx);
            report
                .failing_condition
                .get_or_insert(RegularityCondition::Bracket);
        }
    }
    Ok(report)
}

/// Increasing `size`-subsets of `1..=n`.
fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn rec(n: usize, size: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for v in start..=n {
            current.push(v);
            rec(n, size, v + 1, current, out);
            current.pop();
        }
    }
    rec(n, size, 1, &mut current, &mut out);
    out
}

/// State-dependent coefficient of one slice-form term.
pub type SliceCoefficient = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// An `(n-1)`-form with state-dependent coefficients: a sum of terms
/// `c(q, p) dq^{axes}`/`dp`-monomials, specified over ambient axes of the
/// curve's submanifold choice.
pub struct SliceForm {
    terms: Vec<(Vec<u8>, Box<SliceCoefficient>)>,
}

impl SliceForm {
    pub fn new() -> Self {
        SliceForm { terms: Vec::new() }
    }

    /// Adds a term with constant-coefficient access to the node state.
    pub fn term<F>(mut self, axes: Vec<u8>, coefficient: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.terms.push((axes, Box::new(coefficient)));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl Default for SliceForm {
    fn default() -> Self {
        Self::new()
    }
}

/// Value of a slice functional together with the empty-intersection flag.
#[derive(Debug, Clone, Copy)]
pub struct SliceIntegral {
    pub value: f64,
    pub crossed: bool,
}

const TRANSVERSALITY_TOL: f64 = 1e-10;

/// Integrates `F` over the intersection `{f = s} ∩ Γ`, located by linear
/// interpolation along grid axes and oriented by the rule that the tangent
/// contraction `X ⌞ df` is positively oriented. Supports base dimensions
/// 1 (point evaluations with crossing signs) and 2 (polyline integration).
pub fn slice_functional(
    form: &SliceForm,
    f: &ObservableFunction,
    s: f64,
    curve: &DiscreteCurve,
) -> Result<SliceIntegral, ObservablesError> {
    if f.components() != 1 {
        return Err(ObservablesError::Components {
            got: f.components(),
            expected: 1,
        });
    }
    let grid = &curve.grid;
    let level = |multi: &[usize]| -> f64 {
        let (q, p) = curve.state_at(multi);
        f.eval(&q, &p)[0] - s
    };
    match curve.shape.n {
        1 => {
            let npts = grid.npts[0];
            let mut total = 0.0;
            let mut crossed = false;
            let h = grid.spacing[0];
            for i in 0..npts - 1 {
                let g0 = level(&[i]);
                let g1 = level(&[i + 1]);
                let crosses = g0 == 0.0 || g0 * g1 < 0.0;
                if !crosses {
                    continue;
                }
                let slope = (g1 - g0) / h;
                if slope.abs() < TRANSVERSALITY_TOL {
                    return Err(ObservablesError::TangentialCrossing(slope.abs()));
                }
                let theta = if g0 == 0.0 { 0.0 } else { g0 / (g0 - g1) };
                let (q0, p0) = curve.state_at(&[i]);
                let (q1, p1) = curve.state_at(&[i + 1]);
                let q: Vec<f64> = q0.iter().zip(&q1).map(|(a, b)| a + theta * (b - a)).collect();
                let p: Vec<f64> = p0.iter().zip(&p1).map(|(a, b)| a + theta * (b - a)).collect();
                let orientation = slope.signum();
                for (axes, coeff) in &form.terms {
                    debug_assert!(axes.is_empty(), "0-forms integrate over points");
                    total += orientation * coeff(&q, &p);
                }
                crossed = true;
            }
            Ok(SliceIntegral { value: total, crossed })
        }
        2 => slice_functional_2d(form, &level, curve),
        n => Err(ObservablesError::Hamilton(HamiltonError::Mismatch(format!(
            "slice functionals support n in {{1, 2}}, got n = {n}"
        )))),
    }
}

fn slice_functional_2d(
    form: &SliceForm,
    level: &dyn Fn(&[usize]) -> f64,
    curve: &DiscreteCurve,
) -> Result<SliceIntegral, ObservablesError> {
    let grid = &curve.grid;
    let (n0, n1) = (grid.npts[0], grid.npts[1]);
    let ambient = AmbientLayout::new(curve.shape, curve.choice);
    let mut total = 0.0;
    let mut crossed = false;

    // interpolated (q, p) state and the ambient coordinate values at a
    // point along a grid edge
    let state_at = |a: &[usize], b: &[usize], theta: f64| -> (Vec<f64>, Vec<f64>) {
        let (qa, pa) = curve.state_at(a);
        let (qb, pb) = curve.state_at(b);
        (
            qa.iter().zip(&qb).map(|(x, y)| x + theta * (y - x)).collect(),
            pa.iter().zip(&pb).map(|(x, y)| x + theta * (y - x)).collect(),
        )
    };
    let ambient_coord = |q: &[f64], p: &[f64], axis: u8| -> f64 {
        let nq = curve.shape.total_dim();
        if (axis as usize) <= nq {
            q[axis as usize - 1]
        } else {
            let slot = axis as usize - nq - 1;
            p[ambient.present()[slot]]
        }
    };

    for c0 in 0..n0 - 1 {
        for c1 in 0..n1 - 1 {
            let corners = [
                vec![c0, c1],
                vec![c0 + 1, c1],
                vec![c0 + 1, c1 + 1],
                vec![c0, c1 + 1],
            ];
            // sign convention: exact zeros count as positive so node-aligned
            // slices still produce a consistent polyline
            let g: Vec<f64> = corners.iter().map(|c| level(c)).collect();
            let positive: Vec<bool> = g.iter().map(|&v| v >= 0.0).collect();
            let mut hits: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if positive[a] == positive[b] {
                    continue;
                }
                let denom = g[a] - g[b];
                if denom.abs() < TRANSVERSALITY_TOL {
                    return Err(ObservablesError::TangentialCrossing(denom.abs()));
                }
                let theta = g[a] / denom;
                hits.push(state_at(&corners[a], &corners[b], theta));
            }
            if hits.is_empty() {
                continue;
            }
            if hits.len() != 2 {
                return Err(ObservablesError::AmbiguousTopology(vec![c0, c1], hits.len()));
            }
            crossed = true;

            // orient the segment along rotate+90(∇(f∘Γ)) in base coordinates
            let gx = 0.5 * ((g[1] - g[0]) + (g[2] - g[3])) / grid.spacing[0];
            let gy = 0.5 * ((g[3] - g[0]) + (g[2] - g[1])) / grid.spacing[1];
            let (p0, p1) = (&hits[0], &hits[1]);
            let dx = p1.0[0] - p0.0[0];
            let dy = p1.0[1] - p0.0[1];
            let oriented = dx * (-gy) + dy * gx;
            if oriented.abs() < TRANSVERSALITY_TOL * TRANSVERSALITY_TOL {
                // degenerate segment; skip
                continue;
            }
            let flip = if oriented > 0.0 { 1.0 } else { -1.0 };
            for (axes, coeff) in &form.terms {
                debug_assert_eq!(axes.len(), 1, "1-form terms for n = 2");
                let axis = axes[0];
                let ca = coeff(&p0.0, &p0.1);
                let cb = coeff(&p1.0, &p1.1);
                let delta = ambient_coord(&p1.0, &p1.1, axis) - ambient_coord(&p0.0, &p0.1, axis);
                total += flip * 0.5 * (ca + cb) * delta;
            }
        }
    }
    Ok(SliceIntegral { value: total, crossed })
}

/// Generalized pseudofiber directions at an adapted point: tangent vectors
/// `ξ` with `<δX, ξ ⌟ Ω> = 0` for sampled Hamilton solutions `X` and all
/// wedge-derivative directions `δX` of the decomposable variety at `X`.
#[derive(Debug, Clone)]
pub struct PseudofiberDirections {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Orthonormal rows over the ambient axes of the full phase space.
    pub basis: Vec<Vec<f64>>,
    /// Number of family samples the null space stabilized at.
    pub samples_used: usize,
}

impl PseudofiberDirections {
    /// Largest `|dq^α(ξ)|` over the basis; pseudofiber directions are
    /// vertical, so this vanishes.
    pub fn max_dq_component(&self, total_dim: usize) -> f64 {
        self.basis
            .iter()
            .flat_map(|row| row[..total_dim].iter())
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// The vertical parts as dense momentum coefficient vectors.
    pub fn vertical_parts(&self, total_dim: usize) -> Vec<Vec<f64>> {
        self.basis.iter().map(|row| row[total_dim..].to_vec()).collect()
    }
}

const FAMILY_SAMPLES: usize = 12;

/// Computes the directions by sampling `[X]^H_m` (12 draws plus the special
/// solution, doubling up to four times until the null-space dimension
/// stabilizes between half and full sample counts).
pub fn generalized_pseudofiber_directions<H: Hamiltonian>(
    hamiltonian: &H,
    q: &[f64],
    p: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<PseudofiberDirections, ObservablesError> {
    let family = NVectorFamily::at(hamiltonian, q, p)?;
    let ambient = &family.ambient;
    let dim = ambient.dim();
    let omega = ambient.multisymplectic_form();

    // <δX, e_axis ⌟ Ω> per ambient axis, fixed once
    let axis_contractions: Vec<crate::exterior::ExteriorElement> = (1..=dim as u8)
        .map(|axis| {
            crate::exterior::ExteriorElement::basis(dim, crate::exterior::Variance::Vector, &[axis])
                .unwrap()
                .interior_left(&omega)
                .expect("degree 1 <= n+1")
        })
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let add_equations_for = |vectors: &[crate::exterior::ExteriorElement], rows: &mut Vec<Vec<f64>>| {
        let x_parts = vectors;
        let n = x_parts.len();
        for slot in 0..n {
            for axis in 1..=dim as u8 {
                // δX = X_1 ∧ .. ∧ e_axis (at slot) ∧ .. ∧ X_n
                let mut delta = crate::exterior::ExteriorElement::scalar(
                    dim,
                    crate::exterior::Variance::Vector,
                    1.0,
                );
                for (j, xj) in x_parts.iter().enumerate() {
                    let factor = if j == slot {
                        crate::exterior::ExteriorElement::basis(
                            dim,
                            crate::exterior::Variance::Vector,
                            &[axis],
                        )
                        .unwrap()
                    } else {
                        xj.clone()
                    };
                    delta = delta.wedge(&factor).expect("ambient wedge");
                }
                if delta.is_zero() {
                    continue;
                }
                let row: Vec<f64> = axis_contractions
                    .iter()
                    .map(|contraction| delta.pair(contraction).expect("matching degree"))
                    .collect();
                if row.iter().any(|c| *c != 0.0) {
                    rows.push(row);
                }
            }
        }
    };

    add_equations_for(&family.vectors(&family.special_coefficients()), &mut rows);
    let mut samples = 1usize;
    let mut half_dim = None;
    let mut result = None;
    for round in 0..4 {
        let target = FAMILY_SAMPLES * (round + 1);
        while samples < target {
            let coeffs = family.sample_coefficients(rng);
            add_equations_for(&family.vectors(&coeffs), &mut rows);
            samples += 1;
            if samples == target / 2 {
                let m = linalg::from_rows(&rows);
                half_dim = Some(linalg::null_space(&m).len());
            }
        }
        let m = linalg::from_rows(&rows);
        let null = linalg::null_space(&m);
        if half_dim == Some(null.len()) {
            result = Some(null);
            break;
        }
        half_dim = Some(null.len());
        result = Some(null);
    }
    Ok(PseudofiberDirections {
        q: q.to_vec(),
        p: p.to_vec(),
        basis: result.expect("at least one round ran"),
        samples_used: samples,
    })
}

/// Outcome of the pataplectic-invariance test.
#[derive(Debug, Clone)]
pub struct PataplecticReport {
    /// Largest `|dH(ξ)|` over the curve nodes.
    pub max_dh_along_xi: f64,
    pub condition_dh: bool,
    pub base_residual: f64,
    /// `(s, max residual after flowing p by s ξ)`.
    pub flowed_residuals: Vec<(f64, f64)>,
    pub fitted_slope: f64,
    pub slope_budget: f64,
    pub condition_flow: bool,
    pub passed: bool,
}

const DH_ALONG_XI_TOL: f64 = 1e-9;
const FLOW_STEPS: [f64; 2] = [1e-2, 1e-3];
const FLOW_SLOPE_FACTOR: f64 = 50.0;

/// Checks pataplectic invariance of `H` along a vertical section of the
/// pseudofiber directions: (1) `dH(ξ) = 0` nodewise; (2) flowing the curve
/// momenta by `s ξ` increases the Hamilton residual at most linearly in
/// `s`, at the discretization scale.
pub fn pataplectic_invariance_check<H: Hamiltonian>(
    hamiltonian: &H,
    curve: &DiscreteCurve,
    xi_section: &GridField,
) -> Result<PataplecticReport, ObservablesError> {
    let shape = curve.shape;
    let layout = MomentumLayout::new(shape);
    if xi_section.comps != layout.len() {
        return Err(ObservablesError::Components {
            got: xi_section.comps,
            expected: layout.len(),
        });
    }

    // precondition: ξ(node) lies in the level pseudofiber directions
    // (T_z D^n)^⊥ determined by the curve's graph
    let mut xi_max = 0.0f64;
    for multi in curve.grid.nodes() {
        let xi: Vec<f64> = (0..layout.len()).map(|c| xi_section.get(&multi, c)).collect();
        xi_max = xi_max.max(xi.iter().fold(0.0f64, |m, c| m.max(c.abs())));
        if xi.iter().all(|&c| c == 0.0) {
            continue;
        }
        let v = curve.velocity_at(&multi);
        let directions = annihilator(&tangent_basis_full(&v).map_err(HamiltonError::from)?)
            .map_err(HamiltonError::from)?;
        let dense: Vec<Vec<f64>> = directions.iter().map(|d| layout.dense(d)).collect();
        let residual = linalg::projection_residual(&xi, &dense);
        if residual > 1e-9 {
            return Err(ObservablesError::XiOutsidePseudofiber {
                node: multi.clone(),
                residual,
            });
        }
    }

    // condition (1): dH(ξ) vanishes nodewise (ξ is vertical, so only the
    // momentum gradient enters)
    let mut max_dh = 0.0f64;
    for multi in curve.grid.nodes() {
        let (q, p) = curve.state_at(&multi);
        let (_, gp) = hamiltonian.grad(&q, &p)?;
        let dh: f64 = (0..layout.len())
            .map(|c| gp[c] * xi_section.get(&multi, c))
            .sum();
        max_dh = max_dh.max(dh.abs());
    }
    let condition_dh = max_dh <= DH_ALONG_XI_TOL;

    // condition (2): flow and measure the residual growth
    let base = hamilton_residual(curve, hamiltonian)?;
    let mut flowed = Vec::new();
    for &s in &FLOW_STEPS {
        let mut p = curve.p.clone();
        for multi in curve.grid.nodes() {
            for c in 0..layout.len() {
                let value = p.get(&multi, c) + s * xi_section.get(&multi, c);
                p.set(&multi, c, value);
            }
        }
        let moved = DiscreteCurve::from_fields(
            shape,
            curve.choice,
            curve.grid.clone(),
            curve.u.clone(),
            p,
            None,
        )?;
        let report = hamilton_residual(&moved, hamiltonian)?;
        flowed.push((s, report.max_norm));
    }
    let num: f64 = flowed
        .iter()
        .map(|(s, r)| s * (r - base.max_norm).max(0.0))
        .sum();
    let den: f64 = flowed.iter().map(|(s, _)| s * s).sum();
    let fitted_slope = if den > 0.0 { num / den } else { 0.0 };
    let h_scale = curve
        .grid
        .spacing
        .iter()
        .fold(0.0f64, |m, &h| m.max(h))
        .powi(2);
    let slope_budget = FLOW_SLOPE_FACTOR * (1.0 + xi_max) * (base.max_norm + h_scale);
    let condition_flow = fitted_slope <= slope_budget;

    Ok(PataplecticReport {
        max_dh_along_xi: max_dh,
        condition_dh,
        base_residual: base.max_norm,
        flowed_residuals: flowed,
        fitted_slope,
        slope_budget,
        condition_flow,
        passed: condition_dh && condition_flow,
    })
}
