#![allow(dead_code)]

use cvqkd::linalg::SquareMatrix;
use cvqkd::CovarianceMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `S γ Sᵀ` with a squeeze-then-rotate symplectic acting on one mode.
pub fn squeeze_rotate(g: &CovarianceMatrix, mode: usize, r: f64, theta: f64) -> CovarianceMatrix {
    let n = 2 * g.n_modes();
    let (c, s) = (theta.cos(), theta.sin());
    let local = [[c * r, -s / r], [s * r, c / r]];
    let mut sym = SquareMatrix::identity(n);
    for i in 0..2 {
        for j in 0..2 {
            sym[(2 * mode + i, 2 * mode + j)] = local[i][j];
        }
    }
    let out = &(&sym * g.matrix()) * &sym.transpose();
    let out = SquareMatrix::from_fn(n, |i, j| 0.5 * (out[(i, j)] + out[(j, i)]));
    CovarianceMatrix::new(out, g.labels().to_vec()).unwrap()
}

/// A random pure three-mode Gaussian state: two-mode squeezed vacuum, a
/// beamsplitter against vacuum, and random local squeezing and rotation.
pub fn random_pure_three_mode(seed: u64) -> CovarianceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = rng.random_range(1.0..30.0);
    let eta = rng.random_range(0.0..=1.0);
    let mut g = CovarianceMatrix::two_mode_squeezed(v)
        .unwrap()
        .beamsplitter_transform(1, eta, "C")
        .unwrap();
    for mode in 0..3 {
        let r = rng.random_range(0.5..2.0);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        g = squeeze_rotate(&g, mode, r, theta);
    }
    g
}
