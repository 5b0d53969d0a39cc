//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Entrywise max-norm.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Smallest singular value.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc: f64, &s| acc.min(s))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Square root of a symmetric positive semidefinite matrix through its
/// eigendecomposition. Eigenvalues are floored at `floor_rel * trace`.
pub fn spd_sqrt(m: &DMatrix<f64>, floor_rel: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let floor = floor_rel * m.trace().abs();
    let roots = eig.eigenvalues.map(|l| l.max(floor).sqrt());
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&roots) * q.transpose()
}

/// Angle between two non-zero vectors in `[0, pi]`.
///
/// Uses `2 atan2(|u' - v'|, |u' + v'|)` on the normalised vectors, which
/// stays accurate for nearly parallel and nearly antiparallel inputs.
pub fn angle(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return f64::NAN;
    }
    let a = u / nu;
    let b = v / nv;
    2.0 * (&a - &b).norm().atan2((&a + &b).norm())
}

/// Component of `w` orthogonal to the unit vector `e_hat`.
pub fn orthogonal_part(w: &DVector<f64>, e_hat: &DVector<f64>) -> DVector<f64> {
    w - e_hat * w.dot(e_hat)
}

/// Volume of the Euclidean ball of radius `r` in dimension `dim`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    // V_n = V_{n-2} * 2 pi / n, with V_0 = 1 and V_1 = 2
    let unit = match dim {
        0 => 1.0,
        _ => {
            let mut v = if dim.is_multiple_of(2) { 1.0 } else { 2.0 };
            let mut k = if dim.is_multiple_of(2) { 2 } else { 3 };
            while k <= dim {
                v *= std::f64::consts::TAU / k as f64;
                k += 2;
            }
            v
        }
    };
    unit * r.powi(dim as i32)
}
