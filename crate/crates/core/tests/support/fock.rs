//! Truncated Fock-space density matrices of one or two modes, used as an
//! independent oracle for Gaussian-state quantities.
//!
//! States are built as `U ρ_th U†` with `U` a product of exponentiated
//! quadratic and linear generators. Their means and covariances are read back
//! from `ρ` itself, so the comparison does not depend on any phase-space convention.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use qornn::gaussian::{fidelity as gaussian_fidelity, log_negativity as gaussian_log_negativity, von_neumann_entropy};
use qornn::GaussianState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Agreement required between Gaussian formulas and the truncated Fock computation.
pub const TOL: f64 = 1e-3;
pub const CUTOFF_1: usize = 40;
pub const CUTOFF_2: usize = 14;

pub type C = Complex<f64>;
pub type CMat = DMatrix<C>;

fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

/// Annihilation operator on one mode with `cutoff` levels.
pub fn annihilation(cutoff: usize) -> CMat {
    let mut a = CMat::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    a
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Annihilation operators of each mode in the joint space.
pub fn mode_operators(modes: usize, cutoff: usize) -> Vec<CMat> {
    let a = annihilation(cutoff);
    let id = CMat::identity(cutoff, cutoff);
    match modes {
        1 => vec![a],
        2 => vec![kron(&a, &id), kron(&id, &a)],
        _ => panic!("oracle supports one or two modes"),
    }
}

fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// `exp(G)` by scaling and squaring a Taylor series.
pub fn exp_anti_hermitian(g: &CMat) -> CMat {
    let n = g.nrows();
    let mut squarings = 0;
    let mut scale = 1.0;
    while g.norm() * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = g * c(scale, 0.0);
    let mut out = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=18 {
        term = &term * &x * c(1.0 / k as f64, 0.0);
        out += &term;
    }
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

/// Real symmetric embedding `[[Re H, −Im H], [Im H, Re H]]` of a Hermitian matrix.
/// Its spectrum is that of `H` with every eigenvalue doubled.
fn real_embedding(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = 0.5 * (m[(i % n, j % n)] + m[(j % n, i % n)].conj());
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Cyclic Jacobi diagonalisation of a real symmetric matrix: `(eigenvalues, eigenvectors)`.
/// Eigenvectors are only accumulated when `vectors` is set.
pub fn jacobi_eigen(m: &DMatrix<f64>, vectors: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let n = m.nrows();
    // Column-major and symmetric, so row updates mirror column updates.
    let mut a: Vec<f64> = m.as_slice().to_vec();
    let mut v: Vec<f64> = if vectors { DMatrix::<f64>::identity(n, n).as_slice().to_vec() } else { Vec::new() };
    let scale = m.norm().max(1e-300);
    for _ in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    off += a[j * n + i] * a[j * n + i];
                }
            }
        }
        if off.sqrt() < 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[q * n + p];
                if apq.abs() < 1e-18 * scale {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                rotate_columns(&mut a, n, p, q, cs, sn);
                for k in 0..n {
                    let (apk, aqk) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = cs * apk - sn * aqk;
                    a[k * n + q] = sn * apk + cs * aqk;
                }
                if vectors {
                    rotate_columns(&mut v, n, p, q, cs, sn);
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i * n + i]).collect();
    (vals, vectors.then(|| DMatrix::from_vec(n, n, v)))
}

fn rotate_columns(m: &mut [f64], n: usize, p: usize, q: usize, cs: f64, sn: f64) {
    let (lo, hi) = m.split_at_mut(q * n);
    let cp = &mut lo[p * n..p * n + n];
    let cq = &mut hi[..n];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = cs * xp - sn * xq;
        *y = sn * xp + cs * xq;
    }
}

/// Function of a Hermitian matrix applied to its eigenvalues.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = m.nrows();
    let (vals, v) = jacobi_eigen(&real_embedding(m), true);
    let v = &v.expect("vectors requested");
    let d = DVector::from_iterator(vals.len(), vals.into_iter().map(&f));
    let big = v * DMatrix::from_diagonal(&d) * v.transpose();
    CMat::from_fn(n, n, |i, j| c(big[(i, j)], big[(i + n, j)]))
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev = jacobi_eigen(&real_embedding(m), false).0;
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.into_iter().step_by(2).collect()
}

/// Thermal state of one mode with mean photon number `n`.
pub fn thermal(n: f64, cutoff: usize) -> CMat {
    let mut rho = CMat::zeros(cutoff, cutoff);
    for k in 0..cutoff {
        rho[(k, k)] = c((n / (1.0 + n)).powi(k as i32) / (1.0 + n), 0.0);
    }
    rho
}

/// A random-parameter Gaussian operation.
#[derive(Clone, Debug)]
pub enum Op {
    Squeeze { mode: usize, r: f64, angle: f64 },
    Displace { mode: usize, re: f64, im: f64 },
    Rotate { mode: usize, phi: f64 },
    Mix { theta: f64, phi: f64 },
    TwoModeSqueeze { r: f64 },
}

impl Op {
    fn generator(&self, a: &[CMat]) -> CMat {
        match *self {
            Op::Squeeze { mode, r, angle } => {
                let x = &a[mode];
                let a2 = x * x;
                let z = c(r * angle.cos(), r * angle.sin());
                (dagger(&a2) * z - &a2 * z.conj()) * c(0.5, 0.0)
            }
            Op::Displace { mode, re, im } => {
                let x = &a[mode];
                dagger(x) * c(re, im) - x * c(re, -im)
            }
            Op::Rotate { mode, phi } => dagger(&a[mode]) * &a[mode] * c(0.0, phi),
            Op::Mix { theta, phi } => {
                let t = c(theta * phi.cos(), theta * phi.sin());
                dagger(&a[0]) * &a[1] * t - dagger(&a[1]) * &a[0] * t.conj()
            }
            Op::TwoModeSqueeze { r } => {
                let ab = &a[0] * &a[1];
                (dagger(&ab) - &ab) * c(r * 0.5, 0.0)
            }
        }
    }
}

/// `U ρ_th U†` with `U` the product of the operations, applied in order.
pub fn build_state(thermal_n: &[f64], ops: &[Op], cutoff: usize) -> CMat {
    let modes = thermal_n.len();
    let a = mode_operators(modes, cutoff);
    let mut rho = thermal(thermal_n[0], cutoff);
    for &n in &thermal_n[1..] {
        rho = kron(&rho, &thermal(n, cutoff));
    }
    for op in ops {
        let u = exp_anti_hermitian(&op.generator(&a));
        rho = &u * rho * dagger(&u);
    }
    let tr = rho.trace();
    rho / tr
}

fn expect(rho: &CMat, op: &CMat) -> C {
    (rho * op).trace()
}

/// Mean vector and covariance in interleaved `(q, p)` ordering with vacuum = identity.
pub fn moments(rho: &CMat, modes: usize, cutoff: usize) -> (DVector<f64>, DMatrix<f64>) {
    let a = mode_operators(modes, cutoff);
    let mut quads = Vec::new();
    for x in &a {
        quads.push(x + dagger(x));
        quads.push((x - dagger(x)) * c(0.0, -1.0));
    }
    let n = 2 * modes;
    let mean = DVector::from_fn(n, |i, _| expect(rho, &quads[i]).re);
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let sym = (&quads[i] * &quads[j] + &quads[j] * &quads[i]) * c(0.5, 0.0);
        expect(rho, &sym).re - mean[i] * mean[j]
    });
    (mean, cov)
}

pub fn photon_number(rho: &CMat, modes: usize, cutoff: usize) -> f64 {
    mode_operators(modes, cutoff)
        .iter()
        .map(|x| expect(rho, &(dagger(x) * x)).re)
        .sum()
}

/// von Neumann entropy in nats.
pub fn entropy(rho: &CMat) -> f64 {
    hermitian_eigenvalues(rho)
        .into_iter()
        .filter(|&l| l > 1e-15)
        .map(|l| -l * l.ln())
        .sum()
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let s = hermitian_fn(rho, |l| l.max(0.0).sqrt());
    let inner = &s * sigma * &s;
    let t: f64 = hermitian_eigenvalues(&inner).into_iter().map(|l| l.max(0.0).sqrt()).sum();
    t * t
}

/// `ln ‖ρ^{T_B}‖₁` for a two-mode state.
pub fn log_negativity(rho: &CMat, cutoff: usize) -> f64 {
    let d = cutoff;
    let pt = CMat::from_fn(d * d, d * d, |r, col| {
        let (i, j) = (r / d, r % d);
        let (k, l) = (col / d, col % d);
        rho[(i * d + l, k * d + j)]
    });
    let norm: f64 = hermitian_eigenvalues(&pt).into_iter().map(f64::abs).sum();
    norm.ln()
}

fn random_ops(modes: usize, rng: &mut ChaCha8Rng) -> Vec<Op> {
    let mut ops = Vec::new();
    for mode in 0..modes {
        ops.push(Op::Squeeze {
            mode,
            r: rng.gen_range(0.0..0.25),
            angle: rng.gen_range(0.0..6.3),
        });
        ops.push(Op::Rotate { mode, phi: rng.gen_range(0.0..6.3) });
    }
    if modes == 2 {
        ops.push(Op::TwoModeSqueeze { r: rng.gen_range(0.0..0.3) });
        ops.push(Op::Mix {
            theta: rng.gen_range(0.0..1.6),
            phi: rng.gen_range(0.0..6.3),
        });
    }
    for mode in 0..modes {
        ops.push(Op::Displace {
            mode,
            re: rng.gen_range(-0.2..0.2),
            im: rng.gen_range(-0.2..0.2),
        });
    }
    ops
}

/// A Fock-space state with the Gaussian state of the same moments.
pub struct OracleSample {
    pub rho: CMat,
    pub state: GaussianState,
    pub modes: usize,
    pub cutoff: usize,
}

/// Sample `i` of the set drawn from `seed`, truncated at `cutoff` photons per mode.
pub fn oracle_sample(seed: u64, i: usize, cutoff: usize) -> OracleSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(i as u64));
    let modes = 1 + i % 2;
    let thermal: Vec<f64> = (0..modes).map(|_| rng.gen_range(0.0..0.1)).collect();
    let rho = build_state(&thermal, &random_ops(modes, &mut rng), cutoff);
    let (mean, cov) = moments(&rho, modes, cutoff);
    let state = GaussianState::new(mean, cov).expect("oracle moments are physical");
    OracleSample { rho, state, modes, cutoff }
}

/// Alternating one- and two-mode random states.
pub fn oracle_samples(count: usize, seed: u64) -> Vec<OracleSample> {
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|i| oracle_sample(seed, i, if i % 2 == 0 { CUTOFF_1 } else { CUTOFF_2 }))
        .collect()
}

/// Gaussian value and Fock value of each quantity.
#[derive(Debug)]
pub struct OracleReport {
    pub photon_number: (f64, f64),
    pub entropy: (f64, f64),
    pub fidelity: (f64, f64),
    pub log_negativity: Option<(f64, f64)>,
}

impl OracleReport {
    pub fn worst(&self) -> f64 {
        let mut pairs = vec![self.photon_number, self.entropy, self.fidelity];
        pairs.extend(self.log_negativity);
        pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl OracleSample {
    /// Compare every quantity; fidelity is taken against `other` when it has the same
    /// number of modes and against this state itself otherwise.
    pub fn compare(&self, other: &OracleSample) -> OracleReport {
        let partner = if other.modes == self.modes { other } else { self };
        let log_negativity = (self.modes == 2).then(|| {
            (
                gaussian_log_negativity(&self.state, (0, 1)).unwrap(),
                log_negativity(&self.rho, self.cutoff).max(0.0),
            )
        });
        OracleReport {
            photon_number: (
                self.state.mean_photon_number(),
                photon_number(&self.rho, self.modes, self.cutoff),
            ),
            entropy: (von_neumann_entropy(&self.state).unwrap(), entropy(&self.rho)),
            fidelity: (
                gaussian_fidelity(&self.state, &partner.state).unwrap(),
                fidelity(&self.rho, &partner.rho),
            ),
            log_negativity,
        }
    }
}
