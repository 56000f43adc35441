//! Construction and composition of orthonormal transforms.
//!
//! Provides the identity, Walsh-Hadamard, DCT-II and seeded random
//! orthonormal bases, composition, the boundedness constant Z and the
//! inverse transform (transpose application).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{BasisKind, OrthonormalBasis};

/// The n×n identity basis.
pub fn identity_basis(n: usize) -> Result<OrthonormalBasis> {
    OrthonormalBasis::try_new(DMatrix::identity(n, n), BasisKind::Identity)
}

/// The n×n Walsh-Hadamard basis, entries ±1/√n. Requires n to be a power
/// of two.
pub fn walsh_hadamard_basis(n: usize) -> Result<OrthonormalBasis> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::domain(format!(
            "Walsh-Hadamard dimension must be a power of two, got {n}"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            scale
        } else {
            -scale
        }
    });
    OrthonormalBasis::try_new(matrix, BasisKind::WalshHadamard)
}

/// The n×n orthonormal DCT-II basis: a second flat-ish real transform.
pub fn dct_basis(n: usize) -> Result<OrthonormalBasis> {
    if n == 0 {
        return Err(Error::domain("basis dimension must be positive"));
    }
    let nf = n as f64;
    let row0 = (1.0 / nf).sqrt();
    let scale = (2.0 / nf).sqrt();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            row0
        } else {
            scale * (std::f64::consts::PI * i as f64 * (2 * j + 1) as f64 / (2.0 * nf)).cos()
        }
    });
    OrthonormalBasis::try_new(matrix, BasisKind::DctLike)
}

/// A seeded random orthonormal basis: QR orthonormalization of an n×n matrix
/// of independent standard normals, with column signs fixed so the result is
/// deterministic in `seed`.
pub fn random_orthonormal_basis(n: usize, seed: u64) -> Result<OrthonormalBasis> {
    if n == 0 {
        return Err(Error::domain("basis dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Canonical sign convention: diag(R) >= 0.
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    OrthonormalBasis::try_new(q, BasisKind::RandomOrthonormal)
}

/// Composition `second ∘ first`: the matrix is `second.matrix · first.matrix`
/// (apply `first`, then `second`). The result records both factors.
pub fn compose(first: &OrthonormalBasis, second: &OrthonormalBasis) -> Result<OrthonormalBasis> {
    if first.dimension() != second.dimension() {
        return Err(Error::DimensionMismatch {
            context: "basis composition",
            expected: first.dimension(),
            actual: second.dimension(),
        });
    }
    let matrix = second.matrix() * first.matrix();
    OrthonormalBasis::with_factors(matrix, vec![first.clone(), second.clone()])
}

/// The boundedness constant Z = √n · max |entry|.
///
/// Z ≥ 1 for every orthonormal matrix, with equality exactly for flat bases
/// (all entries of equal magnitude).
pub fn coherence_bound(basis: &OrthonormalBasis) -> f64 {
    let max_abs = basis
        .matrix()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    (basis.dimension() as f64).sqrt() * max_abs
}

/// Inverse basis transform `B^T · v` (orthonormality makes the transpose the
/// inverse).
pub fn inverse_transform(basis: &OrthonormalBasis, v: &DVector<f64>) -> Result<DVector<f64>> {
    if v.len() != basis.dimension() {
        return Err(Error::DimensionMismatch {
            context: "inverse transform",
            expected: basis.dimension(),
            actual: v.len(),
        });
    }
    if basis.is_identity() {
        return Ok(v.clone());
    }
    Ok(basis.matrix().tr_mul(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::orthonormality_deviation;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_is_exact() {
        let b = identity_basis(3).unwrap();
        assert_eq!(orthonormality_deviation(b.matrix()), 0.0);
        assert_eq!(b.matrix()[(0, 0)], 1.0);
        assert_eq!(b.matrix()[(0, 1)], 0.0);

        let one = identity_basis(1).unwrap();
        assert_eq!(one.matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn identity_leaves_signals_unchanged() {
        let b = identity_basis(1000).unwrap();
        let s = crate::model::make_sparse_signal(1000, 10, crate::model::ValueDist::Gaussian, 3)
            .unwrap();
        let out = b.apply(s.values()).unwrap();
        assert_eq!(&out, s.values());
    }

    #[test]
    fn hadamard_two_by_two() {
        let b = walsh_hadamard_basis(2).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert_abs_diff_eq!(b.matrix()[(0, 0)], s, epsilon = 1e-15);
        assert_abs_diff_eq!(b.matrix()[(0, 1)], s, epsilon = 1e-15);
        assert_abs_diff_eq!(b.matrix()[(1, 0)], s, epsilon = 1e-15);
        assert_abs_diff_eq!(b.matrix()[(1, 1)], -s, epsilon = 1e-15);
    }

    #[test]
    fn hadamard_four_is_orthonormal_to_1e12() {
        let b = walsh_hadamard_basis(4).unwrap();
        assert!(b.matrix().iter().all(|v| v.abs() == 0.5));
        assert!(orthonormality_deviation(b.matrix()) < 1e-12);
    }

    #[test]
    fn hadamard_eight_is_flat() {
        let b = walsh_hadamard_basis(8).unwrap();
        assert_abs_diff_eq!(coherence_bound(&b), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hadamard_rejects_non_power_of_two() {
        assert!(walsh_hadamard_basis(6).is_err());
        assert!(walsh_hadamard_basis(0).is_err());
    }

    #[test]
    fn random_basis_dimension_one_is_sign() {
        for seed in 0..8 {
            let b = random_orthonormal_basis(1, seed).unwrap();
            let v = b.matrix()[(0, 0)];
            assert!((v - 1.0).abs() < 1e-12 || (v + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_basis_is_orthonormal_and_deterministic() {
        let a = random_orthonormal_basis(8, 5).unwrap();
        let b = random_orthonormal_basis(8, 5).unwrap();
        assert!(orthonormality_deviation(a.matrix()) < 1e-9);
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn dct_is_orthonormal() {
        let b = dct_basis(16).unwrap();
        assert!(orthonormality_deviation(b.matrix()) < 1e-12);
    }

    #[test]
    fn compose_identity_is_neutral() {
        let i = identity_basis(4).unwrap();
        let h = walsh_hadamard_basis(4).unwrap();
        let c = compose(&i, &h).unwrap();
        assert_eq!(c.matrix(), h.matrix());
        assert_eq!(*c.kind(), BasisKind::Composed);
        assert_eq!(c.factors().len(), 2);
    }

    #[test]
    fn compose_with_transpose_gives_identity() {
        let b = random_orthonormal_basis(6, 9).unwrap();
        let bt = OrthonormalBasis::try_new(b.matrix().transpose(), BasisKind::RandomOrthonormal)
            .unwrap();
        let c = compose(&b, &bt).unwrap();
        assert!(orthonormality_deviation(c.matrix()) < 1e-9);
        let dev = (c.matrix() - DMatrix::identity(6, 6)).abs().max();
        assert!(dev < 1e-9);
    }

    #[test]
    fn hadamard_is_involutory() {
        let h = walsh_hadamard_basis(4).unwrap();
        let c = compose(&h, &h).unwrap();
        let dev = (c.matrix() - DMatrix::identity(4, 4)).abs().max();
        assert!(dev < 1e-12);
    }

    #[test]
    fn composed_factor_product_matches_matrix() {
        let a = random_orthonormal_basis(5, 1).unwrap();
        let b = random_orthonormal_basis(5, 2).unwrap();
        let c = compose(&a, &b).unwrap();
        let product = c.factors()[1].matrix() * c.factors()[0].matrix();
        let dev = (c.matrix() - product).abs().max();
        assert!(dev < 1e-10);
    }

    #[test]
    fn compose_rejects_dimension_mismatch() {
        let a = identity_basis(3).unwrap();
        let b = identity_basis(4).unwrap();
        assert!(compose(&a, &b).is_err());
    }

    #[test]
    fn coherence_bounds_match_entry_scan() {
        let i4 = identity_basis(4).unwrap();
        assert_abs_diff_eq!(coherence_bound(&i4), 2.0, epsilon = 1e-15);
        let h4 = walsh_hadamard_basis(4).unwrap();
        assert_abs_diff_eq!(coherence_bound(&h4), 1.0, epsilon = 1e-15);

        let b = random_orthonormal_basis(16, 3).unwrap();
        let z = coherence_bound(&b);
        assert!((1.0..=4.0).contains(&z));
        // Direct max-scan oracle.
        let mut max_abs = 0.0_f64;
        for i in 0..16 {
            for j in 0..16 {
                max_abs = max_abs.max(b.matrix()[(i, j)].abs());
            }
        }
        assert_abs_diff_eq!(z, 4.0 * max_abs, epsilon = 1e-15);
    }

    #[test]
    fn inverse_transform_round_trips() {
        let b = random_orthonormal_basis(8, 9).unwrap();
        let v = DVector::from_fn(8, |i, _| (i as f64 + 1.0) / 3.0);
        let fwd = b.apply(&v).unwrap();
        let back = inverse_transform(&b, &fwd).unwrap();
        assert!((back - &v).abs().max() < 1e-10);
    }

    #[test]
    fn inverse_transform_hadamard_column() {
        let h = walsh_hadamard_basis(2).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        let v = DVector::from_vec(vec![s, s]);
        let z = inverse_transform(&h, &v).unwrap();
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_transform_rejects_length_mismatch() {
        let b = identity_basis(4).unwrap();
        let v = DVector::from_vec(vec![1.0, 2.0]);
        assert!(inverse_transform(&b, &v).is_err());
    }
}
