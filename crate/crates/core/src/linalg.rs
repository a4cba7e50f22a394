//! Small dense complex linear algebra on the computational block.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest |A − A†| entry.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Principal square root of a positive semidefinite Hermitian matrix;
/// negative round-off eigenvalues are clamped to zero.
pub fn sqrtm_psd(a: &CMatrix) -> CMatrix {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let d = eig
        .eigenvalues
        .map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&d) * v.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`. When either argument is pure the
/// overlap `Tr ρσ` is returned directly, avoiding square roots of round-off.
pub fn uhlmann_fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let purity = |m: &CMatrix| (m * m).trace().re / m.trace().re.powi(2);
    if purity(rho) > 1.0 - 1e-12 || purity(sigma) > 1.0 - 1e-12 {
        return (rho * sigma).trace().re;
    }
    let s = sqrtm_psd(rho);
    let inner = &s * sigma * &s;
    let root = sqrtm_psd(&inner);
    let tr = root.trace().re;
    tr * tr
}

/// `½ Σ |λᵢ(ρ − σ)|`.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(rho - sigma))
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `|v⟩⟨v|`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bell(sign: f64) -> CVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(sign * s, 0.0)])
    }

    #[test]
    fn fidelity_identity_and_orthogonal() {
        let p = outer(&bell(1.0));
        let m = outer(&bell(-1.0));
        assert!((uhlmann_fidelity(&p, &p) - 1.0).abs() < 1e-12);
        assert!(uhlmann_fidelity(&m, &p).abs() < 1e-12);
        assert!(trace_distance(&p, &p).abs() < 1e-14);
        assert!((trace_distance(&p, &m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_with_pure_state_is_expectation() {
        let rho = CMatrix::from_row_slice(
            4,
            4,
            &[
                c(0.4, 0.0), c(0.05, 0.02), c(0.0, 0.0), c(0.3, -0.1),
                c(0.05, -0.02), c(0.1, 0.0), c(0.0, 0.01), c(0.0, 0.0),
                c(0.0, 0.0), c(0.0, -0.01), c(0.05, 0.0), c(0.0, 0.0),
                c(0.3, 0.1), c(0.0, 0.0), c(0.0, 0.0), c(0.42, 0.0),
            ],
        );
        let phi = bell(1.0);
        let expect = (phi.adjoint() * &rho * &phi)[(0, 0)].re;
        let f = uhlmann_fidelity(&rho, &outer(&phi));
        assert!((f - expect).abs() < 1e-10, "{f} vs {expect}");
    }

    #[test]
    fn sqrtm_squares_back() {
        let a = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let s = sqrtm_psd(&a);
        assert!((&s * &s - &a).norm() < 1e-13);
        assert!(hermitian_deviation(&s) < 1e-14);
    }

    #[test]
    fn kron_shape_and_values() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let i = CMatrix::identity(2, 2);
        let k = kron(&a, &i);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(2, 0)], c(3.0, 0.0));
        assert_eq!(k[(2, 1)], c(0.0, 0.0));
        assert_eq!(k[(3, 3)], c(4.0, 0.0));
    }
}
