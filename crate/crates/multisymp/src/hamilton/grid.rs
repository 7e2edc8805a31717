//! Rectangular lattices over a box in `R^n` and multi-component node fields,
//! with second-order finite differences (central in the interior, one-sided
//! at the boundary).

/// A rectangular grid: `npts[d]` nodes along axis `d`, spacing `spacing[d]`,
/// first node at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub npts: Vec<usize>,
}

impl Grid {
    /// Uniform grid over `[lo, hi]^n` with `nodes` points per axis.
    pub fn uniform_box(n: usize, lo: f64, hi: f64, nodes: usize) -> Self {
        assert!(nodes >= 3, "need at least 3 nodes per axis");
        assert!(hi > lo);
        Grid {
            origin: vec![lo; n],
            spacing: vec![(hi - lo) / (nodes - 1) as f64; n],
            npts: vec![nodes; n],
        }
    }

    pub fn ndim(&self) -> usize {
        self.npts.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.npts.iter().product()
    }

    /// Row-major flat index (last axis fastest).
    pub fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (d, &m) in multi.iter().enumerate() {
            debug_assert!(m < self.npts[d]);
            idx = idx * self.npts[d] + m;
        }
        idx
    }

    pub fn unflat(&self, mut idx: usize) -> Vec<usize> {
        let mut multi = vec![0; self.ndim()];
        for d in (0..self.ndim()).rev() {
            multi[d] = idx % self.npts[d];
            idx /= self.npts[d];
        }
        multi
    }

    pub fn coords(&self, multi: &[usize]) -> Vec<f64> {
        multi
            .iter()
            .enumerate()
            .map(|(d, &m)| self.origin[d] + self.spacing[d] * m as f64)
            .collect()
    }

    /// True when the node is at least `margin` nodes away from every face.
    pub fn is_interior(&self, multi: &[usize], margin: usize) -> bool {
        multi
            .iter()
            .enumerate()
            .all(|(d, &m)| m >= margin && m + margin < self.npts[d])
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.num_nodes()).map(|i| self.unflat(i))
    }
}

/// Scalar components sampled on grid nodes, node-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub comps: usize,
    data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, comps: usize) -> Self {
        let len = grid.num_nodes() * comps;
        GridField {
            grid,
            comps,
            data: vec![0.0; len],
        }
    }

    /// Samples `f(x) -> [comps]` at every node.
    pub fn from_fn<F: FnMut(&[f64]) -> Vec<f64>>(grid: Grid, comps: usize, mut f: F) -> Self {
        let mut field = Self::zeros(grid, comps);
        for multi in field.grid.clone().nodes() {
            let vals = f(&field.grid.coords(&multi));
            debug_assert_eq!(vals.len(), comps);
            for (c, v) in vals.into_iter().enumerate() {
                field.set(&multi, c, v);
            }
        }
        field
    }

    pub fn get(&self, multi: &[usize], comp: usize) -> f64 {
        self.data[self.grid.flat(multi) * self.comps + comp]
    }

    pub fn set(&mut self, multi: &[usize], comp: usize, value: f64) {
        let idx = self.grid.flat(multi) * self.comps + comp;
        self.data[idx] = value;
    }

    pub fn get_flat(&self, node: usize, comp: usize) -> f64 {
        self.data[node * self.comps + comp]
    }

    /// Second-order derivative of component `comp` along grid axis `axis`:
    /// central in the interior, one-sided three-point at the faces.
    pub fn derivative(&self, multi: &[usize], comp: usize, axis: usize) -> f64 {
        let h = self.grid.spacing[axis];
        let m = multi[axis];
        let last = self.grid.npts[axis] - 1;
        let at = |pos: usize| {
            let mut shifted = multi.to_vec();
            shifted[axis] = pos;
            self.get(&shifted, comp)
        };
        if m == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if m == last {
            (3.0 * at(last) - 4.0 * at(last - 1) + at(last - 2)) / (2.0 * h)
        } else {
            (at(m + 1) - at(m - 1)) / (2.0 * h)
        }
    }
}
