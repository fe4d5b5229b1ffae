//! Small dense linear-algebra helpers shared by the comparison modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Extreme singular values `(min, max)` of `m`, from the symmetric
/// eigen-decomposition of `m^T m`.
pub fn singular_value_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.ncols() == 0 || m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let gram = m.transpose() * m;
    let eig = SymmetricEigen::new(gram);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for &ev in eig.eigenvalues.iter() {
        let s = ev.max(0.0).sqrt();
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (lo, hi)
}

/// Linear operator norm (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    singular_value_range(m).1
}

/// Smallest singular value.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    singular_value_range(m).0
}

/// Largest |eigenvalue| of a symmetric matrix.
pub fn spectral_radius_sym(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(a.clone());
    eig.eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Max componentwise |a - a^T|.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Max componentwise |Q^T Q - I|.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Deterministic orthonormal frame of the complement of the unit vector `u`.
///
/// The canonical basis vector most parallel to `u` is dropped (lowest index on
/// ties) and the rest are Gram-Schmidt orthonormalized against `u` in index
/// order. Columns of the returned `n x (n-1)` matrix are `e_1 .. e_{n-1}`.
pub fn orthonormal_frame(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut skip = 0;
    let mut best = -1.0;
    for (i, v) in u.iter().enumerate() {
        if v.abs() > best {
            best = v.abs();
            skip = i;
        }
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    basis.push(u.clone());
    for i in (0..n).filter(|&i| i != skip) {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        // two passes keep the frame orthogonal to machine precision
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        basis.push(v / norm);
    }
    let mut frame = DMatrix::zeros(n, n - 1);
    for (j, b) in basis.iter().skip(1).enumerate() {
        frame.set_column(j, b);
    }
    frame
}

/// Rotate the unit vector `u` by `angle` radians towards the unit tangent `w`.
pub fn rotate_towards(u: &DVector<f64>, w: &DVector<f64>, angle: f64) -> DVector<f64> {
    let v = u * angle.cos() + w * angle.sin();
    let norm = v.norm();
    v / norm
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn operator_norm_basics() {
        assert!((operator_norm(&identity(3)) - 1.0).abs() < 1e-14);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((operator_norm(&rot) - 1.0).abs() < 1e-14);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.02, 0.0]);
        assert!((operator_norm(&m) - 1.02).abs() < 1e-12);
        assert!((min_singular_value(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_is_orthonormal_and_perpendicular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..7 {
            for _ in 0..50 {
                let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)).normalize();
                let e = orthonormal_frame(&u);
                assert_eq!(e.ncols(), n - 1);
                assert!(orthogonality_defect(&e) < 1e-13);
                assert!((e.transpose() * &u).amax() < 1e-13);
            }
        }
    }

    #[test]
    fn frame_tie_breaks_on_lowest_index() {
        let u = DVector::from_vec(vec![1.0, 1.0]).normalize();
        let e = orthonormal_frame(&u);
        // index 0 is skipped, e_2 orthogonalized against u
        let expected = DVector::from_vec(vec![-1.0, 1.0]).normalize();
        assert!((e.column(0) - expected).amax() < 1e-14);
    }
}
