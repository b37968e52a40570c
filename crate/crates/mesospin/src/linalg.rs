//! Small dense linear-algebra helpers shared across modules.
//!
//! Dense eigendecompositions are delegated to `faer`; the statevector-sized
//! kernels (dot, axpy) are hand-rolled with fixed summation order so results
//! are bitwise reproducible.

use faer::Side;
use num_complex::Complex64;

/// `<a|b>` with a fixed left-to-right summation order.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += c * x`.
pub fn axpy(c: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    debug_assert_eq!(x.len(), y.len());
    for (xi, yi) in x.iter().zip(y.iter_mut()) {
        *yi += c * xi;
    }
}

pub fn scale(c: f64, x: &mut [Complex64]) {
    for xi in x {
        *xi *= c;
    }
}

/// Eigendecomposition of a real symmetric matrix given in row-major order.
/// Returns `(eigenvalues ascending, eigenvectors as columns)`.
pub fn symmetric_eigen(mat: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(mat.len(), dim * dim);
    let m = faer::Mat::from_fn(dim, dim, |r, c| mat[r * dim + c]);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigendecomposition failed");
    let s = evd.S();
    let u = evd.U();
    let mut vals = Vec::with_capacity(dim);
    let mut vecs = vec![0.0; dim * dim];
    for i in 0..dim {
        vals.push(s[i]);
        for r in 0..dim {
            vecs[r * dim + i] = u[(r, i)];
        }
    }
    (vals, vecs)
}

/// Eigenvalues of a complex Hermitian matrix given in row-major order.
pub fn hermitian_eigenvalues(mat: &[Complex64], dim: usize) -> Vec<f64> {
    assert_eq!(mat.len(), dim * dim);
    let m = faer::Mat::from_fn(dim, dim, |r, c| mat[r * dim + c]);
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .expect("hermitian eigendecomposition failed");
    let s = evd.S();
    (0..dim).map(|i| s[i].re).collect()
}

/// Eigendecomposition of a real symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta` (`beta.len() == alpha.len() - 1`).
/// Returns eigenvalues and eigenvectors as columns.
pub fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = alpha.len();
    assert_eq!(beta.len() + 1, k.max(1));
    let mut mat = vec![0.0; k * k];
    for i in 0..k {
        mat[i * k + i] = alpha[i];
        if i + 1 < k {
            mat[i * k + i + 1] = beta[i];
            mat[(i + 1) * k + i] = beta[i];
        }
    }
    symmetric_eigen(&mat, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_known_eigenvalues() {
        // [[0, 1], [1, 0]] has eigenvalues -1, 1
        let (vals, _) = tridiagonal_eigen(&[0.0, 0.0], &[1.0]);
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvectors_reconstruct_matrix() {
        let alpha = [1.0, -0.5, 2.0, 0.25];
        let beta = [0.7, 1.3, -0.2];
        let k = alpha.len();
        let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
        // A = Q Lambda Q^T
        for r in 0..k {
            for c in 0..k {
                let mut acc = 0.0;
                for i in 0..k {
                    acc += vecs[r * k + i] * vals[i] * vecs[c * k + i];
                }
                let expected = if r == c {
                    alpha[r]
                } else if r + 1 == c || c + 1 == r {
                    beta[r.min(c)]
                } else {
                    0.0
                };
                assert!((acc - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_eigenvalues_of_pauli_y() {
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        let mat = [z, -i, i, z];
        let mut vals = hermitian_eigenvalues(&mat, 2);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }
}
