use num_complex::Complex64;
use rand::Rng;

use crate::channel::complex_gaussian;
use crate::linalg::{hermitian_eigen, norm_sqr, CMatrix, CVector};

const RANK_ONE_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionPath {
    /// Numerically rank one: principal eigenvector.
    Principal,
    /// Gaussian randomization over the given number of samples.
    Randomized { samples: usize },
}

/// Rank-one vector `v` with `v v^H` close to `W`.
///
/// When `lambda_2 / lambda_1 <= 1e-6` this is `sqrt(lambda_1) u_1`.
/// Otherwise `samples` Gaussian draws `U Lambda^{1/2} z` are rescaled to
/// `||v||^2 = Tr(W)` and the one with the highest `score` is returned; the
/// principal candidate competes as well.
pub fn extract_rank_one<R: Rng + ?Sized>(
    w: &CMatrix,
    samples: usize,
    rng: &mut R,
    mut score: impl FnMut(&CVector) -> f64,
) -> (CVector, ExtractionPath) {
    let k = w.rows();
    let eig = hermitian_eigen(&w.hermitian_part());
    let lambda1 = eig.values[0].max(0.0);
    let principal: CVector = eig.vectors.column(0).iter().map(|z| z * libm::sqrt(lambda1)).collect();
    let lambda2 = if k > 1 { eig.values[1].max(0.0) } else { 0.0 };
    if lambda1 == 0.0 || lambda2 <= RANK_ONE_RATIO * lambda1 || samples == 0 {
        return (principal, ExtractionPath::Principal);
    }
    let trace: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let root: CMatrix = CMatrix::from_fn(k, k, |i, j| eig.vectors[(i, j)] * libm::sqrt(eig.values[j].max(0.0)));
    let mut best_score = score(&principal);
    let mut best = principal;
    for _ in 0..samples {
        let z: CVector = (0..k).map(|_| complex_gaussian(rng)).collect();
        let v = root.mul_vec(&z);
        let norm = norm_sqr(&v);
        if !(norm > 0.0) {
            continue;
        }
        let s = libm::sqrt(trace / norm);
        let v: CVector = v.iter().map(|x| x * s).collect();
        let value = score(&v);
        if value > best_score {
            best_score = value;
            best = v;
        }
    }
    log::debug!("rank-one extraction by randomization (lambda2/lambda1 = {:e})", lambda2 / lambda1);
    (best, ExtractionPath::Randomized { samples })
}

#[allow(dead_code)]
fn phase_aligned(v: &[Complex64]) -> CVector {
    // Global phase normalization: largest entry real positive.
    let pivot = v.iter().copied().fold(Complex64::new(0.0, 0.0), |a, b| if b.norm() > a.norm() { b } else { a });
    if pivot.norm() == 0.0 {
        return v.to_vec();
    }
    let rot = pivot.conj() / pivot.norm();
    v.iter().map(|z| z * rot).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_rank_one_recovers_vector() {
        let v = alloc::vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1), Complex64::new(0.0, 0.3)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (out, path) = extract_rank_one(&CMatrix::outer(&v), 200, &mut rng, |_| 0.0);
        assert_eq!(path, ExtractionPath::Principal);
        let (a, b) = (phase_aligned(&v), phase_aligned(&out));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn identity_takes_randomized_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = CMatrix::identity(2);
        let (out, path) = extract_rank_one(&w, 200, &mut rng, |v| v[0].norm_sqr());
        assert_eq!(path, ExtractionPath::Randomized { samples: 200 });
        assert!((norm_sqr(&out) - 2.0).abs() < 1e-12);
        // The score pulls energy onto the first entry.
        assert!(out[0].norm_sqr() > 1.5);
    }
}
