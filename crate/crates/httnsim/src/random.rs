//! Random states, unitaries, Hermitian operators and channels.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::Channel;
use crate::linalg::{c, DenseOperator, StateVector, C64};

fn gaussian(rng: &mut impl Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random normalized state.
pub fn random_state(dim: usize, rng: &mut impl Rng) -> StateVector {
    let v = StateVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

/// Haar-random unitary from the QR of a Ginibre matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> DenseOperator {
    random_isometry(dim, dim, rng)
}

/// Random `rows × cols` isometry (`rows ≥ cols`).
pub fn random_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseOperator {
    let qr = ginibre(rows, cols, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(cols, |i, _| {
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        }
    }));
    DenseOperator::from_matrix(q * phases)
}

/// Hermitian matrix with Gaussian entries.
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> DenseOperator {
    DenseOperator::from_matrix(ginibre(dim, dim, rng)).hermitian_part()
}

/// Arbitrary complex matrix with Gaussian entries.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseOperator {
    DenseOperator::from_matrix(ginibre(rows, cols, rng))
}

/// PSD matrix `B B†` of the given rank.
pub fn random_psd(dim: usize, rank: usize, rng: &mut impl Rng) -> DenseOperator {
    let b = ginibre(dim, rank, rng);
    DenseOperator::from_matrix(&b * b.adjoint())
}

/// Random density operator of the given rank.
pub fn random_density(dim: usize, rank: usize, rng: &mut impl Rng) -> DenseOperator {
    let p = random_psd(dim, rank, rng);
    let t = p.trace().re;
    p.scale_real(1.0 / t)
}

/// Random CPTP channel on `dim` with `n_kraus` Kraus operators from a Stinespring isometry.
pub fn random_cptp(dim: usize, n_kraus: usize, rng: &mut impl Rng) -> Channel {
    let v = random_isometry(dim * n_kraus, dim, rng);
    let ops = (0..n_kraus)
        .map(|k| DenseOperator::from_matrix(v.matrix().rows(k * dim, dim).into_owned()))
        .collect();
    Channel::kraus(ops).expect("Stinespring blocks are trace preserving")
}
