//! Seeded generators for test matrices, spectra and fields.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qmatrix::QMatrixOperator;
use crate::quat::Quaternion;

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Components uniform in `[-scale, scale]`.
pub fn random_quaternion<R: Rng>(rng: &mut R, scale: f64) -> Quaternion {
    Quaternion::new(
        rng.random_range(-scale..=scale),
        rng.random_range(-scale..=scale),
        rng.random_range(-scale..=scale),
        rng.random_range(-scale..=scale),
    )
}

/// Uniform point on the sphere of unit imaginary quaternions.
pub fn random_unit_imaginary<R: Rng>(rng: &mut R) -> Quaternion {
    loop {
        let q = random_quaternion(rng, 1.0).imag();
        let n = q.norm();
        if (1e-3..=1.0).contains(&n) {
            return q / n;
        }
    }
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> QMatrixOperator {
    let entries = (0..n * n).map(|_| random_quaternion(rng, scale)).collect();
    QMatrixOperator::new(n, entries).expect("n >= 1")
}

fn random_real<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0))
}

/// Matrix whose four real components are polynomials in one random real matrix.
pub fn random_commuting<R: Rng>(rng: &mut R, n: usize) -> QMatrixOperator {
    let x = random_real(rng, n);
    let x2 = &x * &x;
    let id = DMatrix::<f64>::identity(n, n);
    let comps = [0, 1, 2, 3].map(|_| {
        let (a, b, c): (f64, f64, f64) = (
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-0.5..=0.5),
        );
        &id * a + &x * b + &x2 * c
    });
    QMatrixOperator::from_components(&comps).expect("square components")
}

/// Real symmetric positive definite matrix with spectrum in `[1, ~n+1]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> QMatrixOperator {
    let a = random_real(rng, n);
    let m = &a * a.transpose() + DMatrix::identity(n, n);
    QMatrixOperator::from_real(&m)
}

/// Sectorial test matrix `P D P^{-1}` with a prescribed spectrum.
#[derive(Debug, Clone)]
pub struct SectorialSample {
    pub matrix: QMatrixOperator,
    /// Diagonal entries of `D`, one representative per sphere (with repetition).
    pub eigenvalues: Vec<Quaternion>,
}

/// `D = diag(r_k e^{I_k θ_k})` with `r_k ∈ [r_min, r_max]`, `θ_k ∈ [0, max_angle]`
/// and random unit imaginaries `I_k`; `P = I + 0.3 X` for a random quaternionic `X`.
pub fn random_sectorial<R: Rng>(rng: &mut R, n: usize, max_angle: f64, r_min: f64, r_max: f64) -> SectorialSample {
    loop {
        let eigenvalues: Vec<Quaternion> = (0..n)
            .map(|_| {
                let r = rng.random_range(r_min..=r_max);
                let th = rng.random_range(0.0..=max_angle);
                Quaternion::from_slice(r * th.cos(), r * th.sin(), random_unit_imaginary(rng))
            })
            .collect();
        let p = &QMatrixOperator::identity(n) + &random_matrix(rng, n, 0.3 / (n as f64).sqrt());
        let Ok(pinv) = p.inverse() else { continue };
        let d = QMatrixOperator::diag(&eigenvalues);
        let matrix = &(&p * &d) * &pinv;
        return SectorialSample { matrix, eigenvalues };
    }
}
