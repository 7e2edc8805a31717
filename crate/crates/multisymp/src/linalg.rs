//! Small dense linear algebra helpers shared by the geometry modules:
//! SVD-based null spaces and rank decisions, condition numbers, principal
//! angles between subspaces. Everything here operates on desk-scale
//! matrices (tens of rows/columns at most).

use nalgebra::DMatrix;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-12;

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Rank with threshold `RANK_TOL * sigma_max`.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// sigma_max / sigma_min over all `min(nrows, ncols)` singular values;
/// `f64::INFINITY` when the smallest is zero.
pub fn condition(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&smax), Some(&smin)) if smin > 0.0 => smax / smin,
        (Some(&smax), _) if smax > 0.0 => f64::INFINITY,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of `{x : A x = 0}` as row vectors.
///
/// The input is padded with zero rows up to a square matrix so the full set
/// of right singular vectors is available from the thin SVD.
pub fn null_space(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let ncols = a.ncols();
    let nrows = a.nrows().max(ncols);
    let padded = DMatrix::from_fn(nrows, ncols, |i, j| if i < a.nrows() { a[(i, j)] } else { 0.0 });
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let mut basis = Vec::new();
    for i in 0..v_t.nrows() {
        let sigma = if i < sv.len() { sv[i] } else { 0.0 };
        if smax == 0.0 || sigma <= RANK_TOL * smax {
            basis.push(v_t.row(i).iter().copied().collect());
        }
    }
    basis
}

/// Solves `A x = b` through the SVD. Returns `None` when `A` is
/// rank-deficient past `RANK_TOL`.
pub fn solve(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.ncols();
    if rank(a) < n {
        return None;
    }
    Some(lstsq(a, b))
}

/// Minimum-norm least-squares solution via the SVD pseudoinverse; singular
/// values below `RANK_TOL * sigma_max` are treated as zero.
pub fn lstsq(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let rhs = nalgebra::DVector::from_column_slice(b);
    match svd.solve(&rhs, (RANK_TOL * smax).max(f64::MIN_POSITIVE)) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; a.ncols()],
    }
}

/// Orthonormalizes the rows of `basis` (modified Gram-Schmidt), dropping
/// dependent rows.
pub fn orthonormalize(basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for row in basis {
        let mut v = row.clone();
        for q in &out {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= dot * y;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in &mut v {
                *x /= norm;
            }
            out.push(v);
        }
    }
    out
}

/// Principal angles (radians, ascending by cosine) between two subspaces
/// given by spanning row sets. Returns `None` when the orthonormalized
/// dimensions differ.
pub fn principal_angles(a: &[Vec<f64>], b: &[Vec<f64>]) -> Option<Vec<f64>> {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    if qa.len() != qb.len() {
        return None;
    }
    if qa.is_empty() {
        return Some(Vec::new());
    }
    let m = DMatrix::from_fn(qa.len(), qb.len(), |i, j| {
        qa[i].iter().zip(&qb[j]).map(|(x, y)| x * y).sum()
    });
    let mut cosines = singular_values(&m);
    cosines.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Some(cosines.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect())
}

/// Projection residual of `v` onto the span of `basis` rows: the norm of the
/// component of `v` orthogonal to the span, divided by the norm of `v`.
pub fn projection_residual(v: &[f64], basis: &[Vec<f64>]) -> f64 {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let q = orthonormalize(basis);
    let mut rem = v.to_vec();
    for row in &q {
        let dot: f64 = rem.iter().zip(row).map(|(a, b)| a * b).sum();
        for (x, y) in rem.iter_mut().zip(row) {
            *x -= dot * y;
        }
    }
    rem.iter().map(|x| x * x).sum::<f64>().sqrt() / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        // x + y + z = 0 has a 2-dimensional null space
        let a = from_rows(&[vec![1.0, 1.0, 1.0]]);
        let ns = null_space(&a);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let r: f64 = v.iter().sum();
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn rank_and_condition() {
        let a = from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(rank(&a), 2);
        assert!((condition(&a) - 2.0).abs() < 1e-12);
        let b = from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(rank(&b), 1);
        assert!(condition(&b).is_infinite());
    }

    #[test]
    fn principal_angles_identical_and_orthogonal() {
        let e1 = vec![vec![1.0, 0.0, 0.0]];
        let e1b = vec![vec![2.0, 0.0, 0.0]];
        let angles = principal_angles(&e1, &e1b).unwrap();
        assert!(angles[0].abs() < 1e-12);

        let e2 = vec![vec![0.0, 1.0, 0.0]];
        let angles = principal_angles(&e1, &e2).unwrap();
        assert!((angles[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn solve_small_system() {
        let a = from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let x = solve(&a, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        let singular = from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(solve(&singular, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn projection_residual_detects_outside_component() {
        let basis = vec![vec![1.0, 0.0, 0.0]];
        assert!(projection_residual(&[3.0, 0.0, 0.0], &basis) < 1e-14);
        let r = projection_residual(&[1.0, 1.0, 0.0], &basis);
        assert!((r - (0.5f64).sqrt()).abs() < 1e-12);
    }
}
