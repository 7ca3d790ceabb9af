//! Random squeezed-thermal input states.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{haar_unitary, passive_matrix};
use crate::gaussian::{squeezer_matrix, GaussianState};
use crate::linalg::direct_sum;

use nalgebra::{DMatrix, DVector};

/// Thermal photon numbers are drawn from `[0, N_TH_MAX)`.
pub const N_TH_MAX: f64 = 10.0;
/// Squeezing magnitudes are drawn from `[0, R_MAX)`.
pub const R_MAX: f64 = 1.0;

/// Single-mode squeezed thermal state with uniformly drawn `n_th`, `r` and `φ`.
pub fn random_squeezed_thermal<R: Rng>(rng: &mut R) -> GaussianState {
    let n_th = rng.gen_range(0.0..N_TH_MAX);
    let r = rng.gen_range(0.0..R_MAX);
    let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
    GaussianState::squeezed_thermal(n_th, r, phi).expect("parameters in range")
}

/// `m`-mode input state: product of thermal states, a Haar-random passive
/// transformation, one squeezer per mode and a second Haar-random passive
/// transformation. For `m = 1` this is [`random_squeezed_thermal`].
pub fn random_input_state<R: Rng>(m: usize, rng: &mut R) -> GaussianState {
    if m == 1 {
        return random_squeezed_thermal(rng);
    }
    let mut cov = DMatrix::zeros(0, 0);
    for _ in 0..m {
        let n_th = rng.gen_range(0.0..N_TH_MAX);
        cov = direct_sum(&cov, &(DMatrix::identity(2, 2) * (2.0 * n_th + 1.0)));
    }
    let first = passive_matrix(&haar_unitary(m, rng));
    let mut squeeze = DMatrix::zeros(0, 0);
    for _ in 0..m {
        let r = rng.gen_range(0.0..R_MAX);
        let phi = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let s = squeezer_matrix(r, phi);
        let s = DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]);
        squeeze = direct_sum(&squeeze, &s);
    }
    let second = passive_matrix(&haar_unitary(m, rng));
    let s = second * squeeze * first;
    GaussianState::from_parts(DVector::zeros(2 * m), &s * cov * s.transpose())
        .expect("well-formed covariance")
}

/// Deterministic sequence of `len` random `m`-mode input states.
pub fn input_sequence(m: usize, len: usize, seed: u64) -> Vec<GaussianState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| random_input_state(m, &mut rng)).collect()
}
