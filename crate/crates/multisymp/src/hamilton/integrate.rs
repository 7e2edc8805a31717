//! Classical Runge-Kutta marching for the `n = 1` Hamilton system
//! `du/dt = ∂H/∂p`, `dp/dt = -∂H/∂u`, with the energy slot tracked so the
//! Hamiltonian stays on its level.

use crate::legendre::MomentumLayout;

use super::grid::{Grid, GridField};
use super::{DiscreteCurve, HamiltonError, Hamiltonian};

struct MechanicsSystem<'a, H: Hamiltonian> {
    hamiltonian: &'a H,
    k: usize,
    layout: MomentumLayout,
}

impl<H: Hamiltonian> MechanicsSystem<'_, H> {
    /// State is `(y_1..y_k, p_1..p_k)`; the dense momentum vector carries
    /// `e = 0` since the flow of `(y, p)` does not depend on it.
    fn dense_p(&self, state: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.layout.len()];
        for i in 1..=self.k {
            let (pos, sign) = self.layout.mixed_position(i, 1);
            p[pos] = sign * state[self.k + i - 1];
        }
        p
    }

    fn rhs(&self, t: f64, state: &[f64]) -> Result<Vec<f64>, HamiltonError> {
        let mut q = vec![t];
        q.extend_from_slice(&state[..self.k]);
        let p = self.dense_p(state);
        let (gq, gp) = self.hamiltonian.grad(&q, &p)?;
        let mut out = vec![0.0; 2 * self.k];
        for i in 1..=self.k {
            let (pos, sign) = self.layout.mixed_position(i, 1);
            out[i - 1] = sign * gp[pos]; // du^i/dt = ∂H/∂p^1_i
            out[self.k + i - 1] = -gq[i]; // dp_i/dt = -∂H/∂y^i
        }
        Ok(out)
    }
}

/// Fourth-order Runge-Kutta integration of the mechanics Hamilton system
/// from `(y0, p0)` over `t_span`, sampled at step `dt` (rounded to an
/// integer number of steps). The energy component is set afterwards so that
/// `H = h` along the whole trajectory.
pub fn integrate_mechanics<H: Hamiltonian>(
    hamiltonian: &H,
    y0: &[f64],
    p0: &[f64],
    t_span: (f64, f64),
    dt: f64,
    h: f64,
) -> Result<DiscreteCurve, HamiltonError> {
    let shape = hamiltonian.shape();
    if shape.n != 1 {
        return Err(HamiltonError::RequiresMechanics(shape.n));
    }
    let k = shape.k;
    assert_eq!(y0.len(), k);
    assert_eq!(p0.len(), k);
    let (t0, t1) = t_span;
    assert!(t1 > t0 && dt > 0.0);
    let nsteps = ((t1 - t0) / dt).round().max(2.0) as usize;
    let step = (t1 - t0) / nsteps as f64;

    let layout = MomentumLayout::new(shape);
    let system = MechanicsSystem {
        hamiltonian,
        k,
        layout: layout.clone(),
    };

    let mut states = Vec::with_capacity(nsteps + 1);
    let mut state: Vec<f64> = y0.iter().chain(p0.iter()).copied().collect();
    states.push(state.clone());
    for s in 0..nsteps {
        let t = t0 + step * s as f64;
        let k1 = system.rhs(t, &state)?;
        let k2 = system.rhs(t + 0.5 * step, &add_scaled(&state, &k1, 0.5 * step))?;
        let k3 = system.rhs(t + 0.5 * step, &add_scaled(&state, &k2, 0.5 * step))?;
        let k4 = system.rhs(t + step, &add_scaled(&state, &k3, step))?;
        for j in 0..state.len() {
            state[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if state.iter().any(|c| !c.is_finite()) {
            return Err(HamiltonError::NonFiniteState { t: t + step });
        }
        states.push(state.clone());
    }

    let grid = Grid {
        origin: vec![t0],
        spacing: vec![step],
        npts: vec![nsteps + 1],
    };
    let mut u = GridField::zeros(grid.clone(), k);
    let mut p = GridField::zeros(grid.clone(), layout.len());
    for (node, s) in states.iter().enumerate() {
        let multi = [node];
        for (i, &value) in s[..k].iter().enumerate() {
            u.set(&multi, i, value);
        }
        let dense = system.dense_p(s);
        let t = t0 + step * node as f64;
        let mut q = vec![t];
        q.extend_from_slice(&s[..k]);
        let rest = hamiltonian.eval(&q, &dense)?; // value at e = 0
        for (c, &value) in dense.iter().enumerate() {
            p.set(&multi, c, value);
        }
        p.set(&multi, layout.volume_position(), h - rest);
    }
    DiscreteCurve::from_fields(shape, hamiltonian.choice(), grid, u, p, Some(h))
}

fn add_scaled(base: &[f64], delta: &[f64], factor: f64) -> Vec<f64> {
    base.iter()
        .zip(delta)
        .map(|(b, d)| b + factor * d)
        .collect()
}
