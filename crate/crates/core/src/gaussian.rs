//! Gaussian states in the ħ = 2 convention (vacuum covariance = identity),
//! interleaved quadrature ordering `(q1, p1, q2, p2, ...)`.
//!
//! Besides the state type this module holds every state-level measure used by
//! the tasks: mean photon number, Uhlmann fidelity, logarithmic negativity,
//! von Neumann entropy, and the analytic gradients of the ones that are
//! optimized directly.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{
    cof2_at, det2_at, direct_sum, inverse, omega, quadrature_indices, select, select_vec,
    spd_inverse, sqrt_psd, sym_fn, symmetrize, symmetrized,
};

/// Tolerance on the uncertainty relation `ν_k ≥ 1 − tol·max(1, ‖σ‖_max)` for constructed states.
pub const PHYSICAL_TOL: f64 = 1e-9;

/// Symmetric squeezer matrix with `r > 0` anti-squeezing `q` at `phi = 0`.
pub fn squeezer_matrix(r: f64, phi: f64) -> [[f64; 2]; 2] {
    let (ch, sh) = (r.cosh(), r.sinh());
    let (c, s) = (phi.cos(), phi.sin());
    [[ch + sh * c, sh * s], [sh * s, ch - sh * c]]
}

/// Phase rotation `a → e^{iφ} a` on one mode.
pub fn rotation_matrix(phi: f64) -> [[f64; 2]; 2] {
    let (c, s) = (phi.cos(), phi.sin());
    [[c, -s], [s, c]]
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Validated constructor: symmetrizes `cov` and checks the uncertainty relation.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let state = Self::from_parts(mean, cov)?;
        let nu = state.min_symplectic_eigenvalue()?;
        if nu < 1.0 - state.physical_tol() {
            return Err(Error::Unphysical(format!(
                "smallest symplectic eigenvalue {nu} < 1"
            )));
        }
        Ok(state)
    }

    /// Shape-checked constructor without the physicality test.
    pub fn from_parts(mean: DVector<f64>, mut cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || n % 2 != 0 || cov.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "covariance must be 2m x 2m, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.len() != n {
            return Err(Error::InvalidArgument(format!(
                "mean has length {}, expected {n}",
                mean.len()
            )));
        }
        symmetrize(&mut cov);
        Ok(Self { mean, cov })
    }

    pub(crate) fn from_parts_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn vacuum(m: usize) -> Self {
        assert!(m >= 1, "vacuum needs at least one mode");
        Self {
            mean: DVector::zeros(2 * m),
            cov: DMatrix::identity(2 * m, 2 * m),
        }
    }

    /// Single-mode thermal state with `n_th` mean photons.
    pub fn thermal(n_th: f64) -> Result<Self> {
        Self::squeezed_thermal(n_th, 0.0, 0.0)
    }

    /// Single-mode coherent state with quadrature means `(q, p)`.
    pub fn coherent(q: f64, p: f64) -> Self {
        Self {
            mean: DVector::from_vec(vec![q, p]),
            cov: DMatrix::identity(2, 2),
        }
    }

    /// `S(r, φ) · (2 n_th + 1) I · S(r, φ)ᵀ` with zero mean.
    pub fn squeezed_thermal(n_th: f64, r: f64, phi: f64) -> Result<Self> {
        if !(n_th >= 0.0) || !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "squeezed_thermal needs n_th >= 0 and r >= 0 (got {n_th}, {r})"
            )));
        }
        let s = squeezer_matrix(r, phi);
        let s = DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]);
        let cov = (2.0 * n_th + 1.0) * &s * s.transpose();
        Ok(Self {
            mean: DVector::zeros(2),
            cov: symmetrized(&cov),
        })
    }

    pub fn num_modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }

    /// `(tr σ + ‖μ‖² − 2m) / 4`.
    pub fn mean_photon_number(&self) -> f64 {
        (self.cov.trace() + self.mean.norm_squared() - self.cov.nrows() as f64) / 4.0
    }

    /// Mean photon number of a single mode.
    pub fn mode_photon_number(&self, k: usize) -> f64 {
        let (i, j) = (2 * k, 2 * k + 1);
        (self.cov[(i, i)] + self.cov[(j, j)] + self.mean[i].powi(2) + self.mean[j].powi(2) - 2.0)
            / 4.0
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(&self.cov)
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(self
            .symplectic_eigenvalues()?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    pub fn is_physical(&self) -> bool {
        matches!(self.min_symplectic_eigenvalue(), Ok(nu) if nu >= 1.0 - self.physical_tol())
    }

    /// Round-off in `ν` grows with the covariance scale, so the slack does too.
    fn physical_tol(&self) -> f64 {
        PHYSICAL_TOL * self.cov.amax().max(1.0)
    }

    /// Gaussian update `μ → Sμ`, `σ → SσSᵀ` with a full 2m x 2m matrix.
    pub fn transform(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != self.cov.nrows() || s.ncols() != self.cov.nrows() {
            return Err(Error::ModeMismatch {
                expected: self.num_modes(),
                actual: s.nrows() / 2,
            });
        }
        let mut cov = s * &self.cov * s.transpose();
        symmetrize(&mut cov);
        Ok(Self {
            mean: s * &self.mean,
            cov,
        })
    }

    /// In-place update with a small matrix acting on the listed modes only.
    ///
    /// `local` is `2k x 2k` for `k = modes.len()`. Cost is linear in the total mode count.
    pub fn apply_local(&mut self, local: &DMatrix<f64>, modes: &[usize]) {
        let idx = quadrature_indices(modes);
        let k = idx.len();
        debug_assert_eq!(local.nrows(), k);
        let n = self.cov.nrows();
        // rows: σ[idx, :] ← L σ[idx, :]
        let rows = DMatrix::from_fn(k, n, |a, j| self.cov[(idx[a], j)]);
        let new_rows = local * rows;
        for a in 0..k {
            for j in 0..n {
                self.cov[(idx[a], j)] = new_rows[(a, j)];
            }
        }
        // cols: σ[:, idx] ← σ[:, idx] Lᵀ
        let cols = DMatrix::from_fn(n, k, |i, b| self.cov[(i, idx[b])]);
        let new_cols = cols * local.transpose();
        for i in 0..n {
            for b in 0..k {
                self.cov[(i, idx[b])] = new_cols[(i, b)];
            }
        }
        let mu = DVector::from_fn(k, |a, _| self.mean[idx[a]]);
        let new_mu = local * mu;
        for a in 0..k {
            self.mean[idx[a]] = new_mu[a];
        }
    }

    /// Marginal on the kept modes, in the order given.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Empty("partial_trace keep set"));
        }
        let m = self.num_modes();
        let mut seen = vec![false; m];
        for &k in keep {
            if k >= m || seen[k] {
                return Err(Error::InvalidArgument(format!(
                    "mode {k} out of range or repeated (state has {m} modes)"
                )));
            }
            seen[k] = true;
        }
        let idx = quadrature_indices(keep);
        Ok(Self {
            mean: select_vec(&self.mean, &idx),
            cov: select(&self.cov, &idx, &idx),
        })
    }

    /// Tensor product: direct sum of means and covariances.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut mean = DVector::zeros(self.mean.len() + other.mean.len());
        mean.rows_mut(0, self.mean.len()).copy_from(&self.mean);
        mean.rows_mut(self.mean.len(), other.mean.len())
            .copy_from(&other.mean);
        Self {
            mean,
            cov: direct_sum(&self.cov, &other.cov),
        }
    }
}

/// Symplectic eigenvalues of a covariance matrix, ascending, one per mode.
///
/// Computed from the singular values of `K = σ^{1/2} Ω σ^{1/2}`, which hold
/// every `ν_k` twice.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = cov.nrows() / 2;
    let sqrt_cov = sqrt_psd(cov);
    let k = &sqrt_cov * omega(m) * &sqrt_cov;
    // Singular values of K avoid the squared conditioning of KᵀK.
    let mut sv: Vec<f64> = k.svd(false, false).singular_values.iter().cloned().collect();
    if sv.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite covariance".into()));
    }
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((0..m).map(|i| sv[2 * i]).collect())
}

struct SymplecticSpectrum {
    nu: Vec<f64>,
    sqrt_cov: DMatrix<f64>,
    k: DMatrix<f64>,
    ktk_eig: SymmetricEigen<f64, nalgebra::Dyn>,
}

fn symplectic_spectrum(cov: &DMatrix<f64>) -> Result<SymplecticSpectrum> {
    let n = cov.nrows();
    let m = n / 2;
    let sqrt_cov = sqrt_psd(cov);
    let k = &sqrt_cov * omega(m) * &sqrt_cov;
    let ktk = symmetrized(&(k.transpose() * &k));
    let ktk_eig = SymmetricEigen::new(ktk);
    let mut sq: Vec<f64> = ktk_eig.eigenvalues.iter().cloned().collect();
    if sq.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite covariance".into()));
    }
    sq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nu = (0..m).map(|i| sq[2 * i].max(0.0).sqrt()).collect();
    Ok(SymplecticSpectrum {
        nu,
        sqrt_cov,
        k,
        ktk_eig,
    })
}

/// `g(x) = ((x+1)/2) ln((x+1)/2) − ((x−1)/2) ln((x−1)/2)`, with `g(1) = 0`.
pub fn entropy_g(x: f64) -> f64 {
    let a = (x + 1.0) / 2.0;
    let b = (x - 1.0) / 2.0;
    let lb = if b > 1e-300 { b * b.ln() } else { 0.0 };
    a * a.ln() - lb
}

/// von Neumann entropy (nats) of a Gaussian state with covariance `cov`.
pub fn entropy_of_cov(cov: &DMatrix<f64>) -> Result<f64> {
    let nu = symplectic_spectrum(cov)?.nu;
    let mut s = 0.0;
    for v in nu {
        if v < 1.0 - 1e-6 {
            return Err(Error::Unphysical(format!("symplectic eigenvalue {v} < 1")));
        }
        s += entropy_g(v.max(1.0));
    }
    Ok(s)
}

/// Entropy and its gradient with respect to the (symmetric) covariance.
///
/// Uses `∂S/∂σ = −½ [σ^{-1/2} K r(KᵀK) σ^{1/2} Ω]ᵀ` with `r(ν²) = arccoth(ν)/ν`,
/// which is `½ Σ_k g'(ν_k) ∂ν_k/∂σ` written without a Williamson decomposition.
/// The gradient diverges for pure modes; eigenvalues are floored at `1 + 1e-12`.
pub fn entropy_with_gradient(cov: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let spec = symplectic_spectrum(cov)?;
    let mut s = 0.0;
    for &v in &spec.nu {
        if v < 1.0 - 1e-6 {
            return Err(Error::Unphysical(format!("symplectic eigenvalue {v} < 1")));
        }
        s += entropy_g(v.max(1.0));
    }
    let m = cov.nrows() / 2;
    let r_vals = spec.ktk_eig.eigenvalues.map(|x| {
        let nu = x.max(0.0).sqrt().max(1.0 + 1e-12);
        0.5 * ((nu + 1.0) / (nu - 1.0)).ln() / nu
    });
    let v = &spec.ktk_eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&r_vals) * v.transpose();
    let inv_sqrt = inverse(&spec.sqrt_cov)?;
    let inner = inv_sqrt * &spec.k * r * &spec.sqrt_cov * omega(m);
    let mut grad = -0.5 * inner.transpose();
    symmetrize(&mut grad);
    Ok((s, grad))
}

pub fn von_neumann_entropy(s: &GaussianState) -> Result<f64> {
    entropy_of_cov(&s.cov)
}

/// Uhlmann fidelity `F = (tr √(√ρa ρb √ρa))²`.
///
/// Single-mode states use the closed form; larger states use the general
/// multimode expression evaluated through the spectrum of `V_aux Ω`.
pub fn fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.num_modes() != b.num_modes() {
        return Err(Error::ModeMismatch {
            expected: a.num_modes(),
            actual: b.num_modes(),
        });
    }
    if a.num_modes() == 1 {
        single_mode_fidelity(a, b)
    } else {
        multimode_fidelity(a, b)
    }
}

/// Closed-form single-mode fidelity:
/// `F = exp(−½ δμᵀ Σ⁻¹ δμ) / (√(Δ + Λ) − √Λ)` with `Σ = σa + σb`,
/// `Δ = det Σ / 4` and `Λ = (det σa − 1)(det σb − 1) / 4`.
pub fn single_mode_fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    Ok(single_mode_fidelity_with_gradient(a, b)?.0)
}

/// Single-mode fidelity together with `(∂F/∂σb, ∂F/∂μb)`.
pub fn single_mode_fidelity_with_gradient(
    a: &GaussianState,
    b: &GaussianState,
) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    if a.num_modes() != 1 || b.num_modes() != 1 {
        return Err(Error::InvalidArgument(
            "single-mode fidelity needs one-mode states".into(),
        ));
    }
    let sum = &a.cov + &b.cov;
    let det_sum = det2_at(&sum, 0, 0);
    if !(det_sum > 0.0) {
        return Err(Error::Unphysical("σa + σb is not positive definite".into()));
    }
    let inv = DMatrix::from_row_slice(
        2,
        2,
        &[sum[(1, 1)], -sum[(0, 1)], -sum[(1, 0)], sum[(0, 0)]],
    ) / det_sum;
    let dmu = &b.mean - &a.mean;
    let w = &inv * &dmu;
    let expo = 0.5 * dmu.dot(&w);
    let da = (det2_at(&a.cov, 0, 0) - 1.0).max(0.0);
    let db = (det2_at(&b.cov, 0, 0) - 1.0).max(0.0);
    let delta = det_sum / 4.0;
    let lambda = da * db / 4.0;
    let root_dl = (delta + lambda).sqrt();
    let root_l = lambda.sqrt();
    let q = root_dl - root_l;
    let f = (-expo).exp() / q;

    // dF = −F dE − F dQ / Q
    let cof_sum = DMatrix::from_row_slice(
        2,
        2,
        &[sum[(1, 1)], -sum[(1, 0)], -sum[(0, 1)], sum[(0, 0)]],
    );
    let cof_b = DMatrix::from_row_slice(
        2,
        2,
        &[b.cov[(1, 1)], -b.cov[(1, 0)], -b.cov[(0, 1)], b.cov[(0, 0)]],
    );
    let d_delta = cof_sum / 4.0;
    let d_lambda = cof_b * (da / 4.0);
    let mut dq = &d_delta / (2.0 * root_dl) + &d_lambda / (2.0 * root_dl);
    if root_l > 1e-10 {
        dq -= &d_lambda / (2.0 * root_l);
    }
    let de_dsigma = -0.5 * &w * w.transpose();
    let mut grad_cov = -f * de_dsigma - (f / q) * dq;
    symmetrize(&mut grad_cov);
    let grad_mean = -f * w;
    Ok((f, grad_cov, grad_mean))
}

/// General multimode fidelity.
///
/// Works in the vacuum = ½ convention internally (`V = σ/2`, `u = μ/√2`):
/// the root fidelity is `F_tot / det(V1+V2)^{1/4} · exp(−¼ δuᵀ (V1+V2)⁻¹ δu)` with
/// `F_tot⁴ = det(2 V_aux) · Π_λ (1 + √(1 + 1/(4λ²)))` over the eigenvalues `λ` of
/// `V_aux Ω`, `V_aux = Ωᵀ (V1+V2)⁻¹ (Ω/4 + V2 Ω V1)`.
pub fn multimode_fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    let m = a.num_modes();
    let w = omega(m);
    let v1 = &a.cov * 0.5;
    let v2 = &b.cov * 0.5;
    let vsum = &v1 + &v2;
    let vsum_inv = spd_inverse(&vsum)?;
    let du = (&b.mean - &a.mean) / std::f64::consts::SQRT_2;
    let expo = -0.25 * du.dot(&(&vsum_inv * &du));
    let vaux = w.transpose() * &vsum_inv * (&w * 0.25 + &v2 * &w * &v1);
    let a_mat = &vaux * &w;
    let eig = a_mat.clone().complex_eigenvalues();
    let mut prod = Complex::new(1.0, 0.0);
    for lam in eig.iter() {
        let z = Complex::new(1.0, 0.0) + (lam * lam * 4.0).inv();
        prod *= Complex::new(1.0, 0.0) + z.sqrt();
    }
    let det_aux = (vaux * 2.0).determinant();
    let ftot4 = (det_aux * prod.re).max(0.0);
    let root = ftot4.powf(0.25) / vsum.determinant().powf(0.25) * expo.exp();
    Ok((root * root).min(1.0))
}

/// Logarithmic negativity (natural log) between two modes.
///
/// A two-mode state is used as is; for larger states the marginal on `partition` is taken first.
pub fn log_negativity(s: &GaussianState, partition: (usize, usize)) -> Result<f64> {
    let pair = if s.num_modes() == 2 && partition == (0, 1) {
        s.clone()
    } else {
        s.partial_trace(&[partition.0, partition.1])?
    };
    Ok(log_negativity_with_gradient(&pair.cov)?.0)
}

/// Logarithmic negativity of a 4x4 covariance from determinants of its blocks,
/// with its gradient with respect to the covariance.
///
/// `Δ̃ = det A + det B − 2 det C`, `ν̃₋² = (Δ̃ − √(Δ̃² − 4 det σ)) / 2`,
/// `E_N = max(0, −ln ν̃₋)`.
pub fn log_negativity_with_gradient(cov: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let (value, grad) = partial_transpose_log_with_gradient(cov)?;
    // values at rounding level are product or separable states
    if value <= 1e-12 {
        Ok((0.0, DMatrix::zeros(4, 4)))
    } else {
        Ok((value, grad))
    }
}

/// `−ln ν̃₋` without the clamp at zero, with its gradient.
///
/// Equals the logarithmic negativity whenever the state is entangled and stays
/// smooth (negative) for separable states, which gives optimizers a signal
/// before any entanglement is present.
pub fn partial_transpose_log_with_gradient(cov: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if cov.nrows() != 4 || cov.ncols() != 4 {
        return Err(Error::InvalidArgument(
            "log negativity needs a two-mode covariance".into(),
        ));
    }
    let det_a = det2_at(cov, 0, 0);
    let det_b = det2_at(cov, 2, 2);
    let det_c = det2_at(cov, 0, 2);
    let det_all = cov.determinant();
    let delta = det_a + det_b - 2.0 * det_c;
    let mut disc = delta * delta - 4.0 * det_all;
    if disc < 0.0 {
        if disc < -1e-9 * delta.abs().max(1.0).powi(2) {
            return Err(Error::Unphysical(format!(
                "negative discriminant {disc} in partial-transpose spectrum"
            )));
        }
        disc = 0.0;
    }
    let root = disc.sqrt();
    let nu2 = 0.5 * (delta - root);
    if !(nu2 > 0.0) {
        return Err(Error::Unphysical(format!(
            "non-positive partially transposed eigenvalue {nu2}"
        )));
    }
    let value = -0.5 * nu2.ln();
    // dΔ̃/dσ (unsymmetrized, C contributes through the upper-right block)
    let mut d_delta = DMatrix::zeros(4, 4);
    let ca = cof2_at(cov, 0, 0);
    let cb = cof2_at(cov, 2, 2);
    let cc = cof2_at(cov, 0, 2);
    for i in 0..2 {
        for j in 0..2 {
            d_delta[(i, j)] = ca[i][j];
            d_delta[(2 + i, 2 + j)] = cb[i][j];
            d_delta[(i, 2 + j)] = -2.0 * cc[i][j];
        }
    }
    let d_det = inverse(cov)?.transpose() * det_all;
    let d_nu2 = if root > 1e-14 {
        (&d_delta - (&d_delta * delta - d_det * 2.0) / root) * 0.5
    } else {
        &d_delta * 0.5
    };
    let mut grad = d_nu2 * (-0.5 / nu2);
    symmetrize(&mut grad);
    Ok((value, grad))
}

/// Log negativity through the symplectic eigenvalues of the partially transposed
/// covariance. Slower and kept as an independent check of the determinant path.
pub fn log_negativity_symplectic(cov: &DMatrix<f64>) -> Result<f64> {
    let mut pt = cov.clone();
    // partial transpose on the second mode flips the sign of p2
    for i in 0..4 {
        pt[(3, i)] = -pt[(3, i)];
        pt[(i, 3)] = -pt[(i, 3)];
    }
    // sign flipped twice on the diagonal, restore
    pt[(3, 3)] = cov[(3, 3)];
    let nu = symplectic_eigenvalues_general(&pt)?;
    Ok(nu.iter().map(|&v| (-v.ln()).max(0.0)).sum())
}

/// Symplectic eigenvalues of a positive definite (not necessarily physical) matrix.
fn symplectic_eigenvalues_general(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = cov.nrows() / 2;
    let sq = sqrt_psd(cov);
    let k = &sq * omega(m) * &sq;
    let vals = sym_fn(&(k.transpose() * &k), |x| x);
    let mut ev: Vec<f64> = SymmetricEigen::new(vals).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((0..m).map(|i| ev[2 * i].max(0.0).sqrt()).collect())
}

pub fn tensor(a: &GaussianState, b: &GaussianState) -> GaussianState {
    a.tensor(b)
}

pub fn partial_trace(s: &GaussianState, keep: &[usize]) -> Result<GaussianState> {
    s.partial_trace(keep)
}

pub fn mean_photon_number(s: &GaussianState) -> f64 {
    s.mean_photon_number()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tmsv(r: f64) -> GaussianState {
        let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let cov = DMatrix::from_row_slice(
            4,
            4,
            &[
                c, 0.0, s, 0.0, //
                0.0, c, 0.0, -s, //
                s, 0.0, c, 0.0, //
                0.0, -s, 0.0, c,
            ],
        );
        GaussianState::new(DVector::zeros(4), cov).unwrap()
    }

    #[test]
    fn vacuum_is_identity() {
        let v = GaussianState::vacuum(2);
        assert_eq!(v.cov(), &DMatrix::<f64>::identity(4, 4));
        assert_eq!(v.mean_photon_number(), 0.0);
        assert_eq!(GaussianState::vacuum(1).mean().len(), 2);
    }

    #[test]
    fn squeezed_thermal_examples() {
        let v = GaussianState::squeezed_thermal(0.0, 0.0, 1.3).unwrap();
        assert_abs_diff_eq!(v.cov(), &DMatrix::identity(2, 2), epsilon = 1e-15);
        let t = GaussianState::squeezed_thermal(3.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(t.cov(), &(DMatrix::identity(2, 2) * 7.0), epsilon = 1e-15);
        assert_abs_diff_eq!(t.mean_photon_number(), 3.0, epsilon = 1e-14);
        let s = GaussianState::squeezed_thermal(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.cov()[(0, 0)], 1f64.exp().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(s.cov()[(1, 1)], (-2f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.mean_photon_number(), 1f64.sinh().powi(2), epsilon = 1e-12);
        assert!(GaussianState::squeezed_thermal(-1.0, 0.0, 0.0).is_err());
        assert!(GaussianState::squeezed_thermal(0.0, -0.1, 0.0).is_err());
    }

    #[test]
    fn squeezed_half_photon_number() {
        let s = GaussianState::squeezed_thermal(0.0, 0.5, 0.7).unwrap();
        assert_abs_diff_eq!(s.mean_photon_number(), 0.5f64.sinh().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let vac = GaussianState::vacuum(1);
        let th = GaussianState::thermal(1.0).unwrap();
        assert_abs_diff_eq!(fidelity(&vac, &th).unwrap(), 0.5, epsilon = 1e-12);
        let coh = GaussianState::coherent(2.0, 0.0);
        assert_abs_diff_eq!(fidelity(&vac, &coh).unwrap(), (-1f64).exp(), epsilon = 1e-12);
        let s = GaussianState::squeezed_thermal(0.7, 0.3, 0.4).unwrap();
        assert_abs_diff_eq!(fidelity(&s, &s).unwrap(), 1.0, epsilon = 1e-12);
        assert!(fidelity(&vac, &GaussianState::vacuum(2)).is_err());
    }

    #[test]
    fn multimode_fidelity_reduces_to_single_mode() {
        let a = GaussianState::squeezed_thermal(0.4, 0.6, 0.3).unwrap();
        let b = GaussianState::squeezed_thermal(1.1, 0.2, 2.0).unwrap();
        let single = single_mode_fidelity(&a, &b).unwrap();
        let multi = multimode_fidelity(&a, &b).unwrap();
        assert_abs_diff_eq!(single, multi, epsilon = 1e-10);
        // product states factorize
        let both = multimode_fidelity(&a.tensor(&b), &b.tensor(&a)).unwrap();
        assert_abs_diff_eq!(both, single * single, epsilon = 1e-10);
        let vac = GaussianState::vacuum(1);
        let coh = GaussianState::coherent(0.5, -1.0);
        assert_abs_diff_eq!(
            multimode_fidelity(&vac, &coh).unwrap(),
            single_mode_fidelity(&vac, &coh).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn single_mode_fidelity_gradient_matches_finite_differences() {
        let a = GaussianState::squeezed_thermal(0.8, 0.4, 0.9).unwrap();
        let mut b = GaussianState::squeezed_thermal(2.0, 0.7, 0.2).unwrap();
        b.mean = DVector::from_vec(vec![0.3, -0.2]);
        let (_, gc, gm) = single_mode_fidelity_with_gradient(&a, &b).unwrap();
        let h = 1e-6;
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp.cov[(i, j)] += h;
            bm.cov[(i, j)] -= h;
            if i != j {
                bp.cov[(j, i)] += h;
                bm.cov[(j, i)] -= h;
            }
            let fd = (single_mode_fidelity(&a, &bp).unwrap()
                - single_mode_fidelity(&a, &bm).unwrap())
                / (2.0 * h);
            let an = if i == j { gc[(i, j)] } else { 2.0 * gc[(i, j)] };
            assert_abs_diff_eq!(fd, an, epsilon = 1e-7);
        }
        for i in 0..2 {
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp.mean[i] += h;
            bm.mean[i] -= h;
            let fd = (single_mode_fidelity(&a, &bp).unwrap()
                - single_mode_fidelity(&a, &bm).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(fd, gm[i], epsilon = 1e-7);
        }
    }

    #[test]
    fn log_negativity_examples() {
        let prod = GaussianState::vacuum(2);
        assert_eq!(log_negativity(&prod, (0, 1)).unwrap(), 0.0);
        let t = GaussianState::thermal(0.5)
            .unwrap()
            .tensor(&GaussianState::thermal(2.0).unwrap());
        assert_eq!(log_negativity(&t, (0, 1)).unwrap(), 0.0);
        let ln = log_negativity(&tmsv(1.0), (0, 1)).unwrap();
        assert_abs_diff_eq!(ln, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            log_negativity_symplectic(tmsv(0.6).cov()).unwrap(),
            1.2,
            epsilon = 1e-9
        );
    }

    #[test]
    fn log_negativity_gradient_matches_finite_differences() {
        let mut cov = tmsv(0.4).cov().clone();
        cov[(0, 0)] += 0.3;
        cov[(1, 3)] += 0.05;
        cov[(3, 1)] += 0.05;
        let (_, g) = log_negativity_with_gradient(&cov).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for j in i..4 {
                let mut p = cov.clone();
                let mut m = cov.clone();
                p[(i, j)] += h;
                m[(i, j)] -= h;
                if i != j {
                    p[(j, i)] += h;
                    m[(j, i)] -= h;
                }
                let fd = (log_negativity_with_gradient(&p).unwrap().0
                    - log_negativity_with_gradient(&m).unwrap().0)
                    / (2.0 * h);
                let an = if i == j { g[(i, j)] } else { 2.0 * g[(i, j)] };
                assert_abs_diff_eq!(fd, an, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(
            von_neumann_entropy(&GaussianState::vacuum(2)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let th = GaussianState::thermal(1.0).unwrap();
        assert_abs_diff_eq!(
            von_neumann_entropy(&th).unwrap(),
            2.0 * 2f64.ln(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            von_neumann_entropy(&tmsv(0.8)).unwrap(),
            0.0,
            epsilon = 1e-9
        );
        let bad = DMatrix::identity(2, 2) * 0.5;
        assert!(entropy_of_cov(&bad).is_err());
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let a = GaussianState::squeezed_thermal(0.6, 0.3, 0.5).unwrap();
        let b = GaussianState::squeezed_thermal(1.5, 0.1, 1.5).unwrap();
        let mut cov = a.tensor(&b).cov().clone();
        cov[(0, 2)] += 0.2;
        cov[(2, 0)] += 0.2;
        cov[(1, 3)] -= 0.1;
        cov[(3, 1)] -= 0.1;
        let (_, g) = entropy_with_gradient(&cov).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for j in i..4 {
                let mut p = cov.clone();
                let mut m = cov.clone();
                p[(i, j)] += h;
                m[(i, j)] -= h;
                if i != j {
                    p[(j, i)] += h;
                    m[(j, i)] -= h;
                }
                let fd = (entropy_of_cov(&p).unwrap() - entropy_of_cov(&m).unwrap()) / (2.0 * h);
                let an = if i == j { g[(i, j)] } else { 2.0 * g[(i, j)] };
                assert_abs_diff_eq!(fd, an, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn partial_trace_and_tensor() {
        let a = GaussianState::squeezed_thermal(0.3, 0.2, 0.1).unwrap();
        let b = GaussianState::thermal(2.0).unwrap();
        let ab = a.tensor(&b);
        assert_eq!(ab.partial_trace(&[0]).unwrap(), a);
        assert_eq!(ab.partial_trace(&[0, 1]).unwrap(), ab);
        assert_abs_diff_eq!(
            ab.mean_photon_number(),
            a.mean_photon_number() + b.mean_photon_number(),
            epsilon = 1e-12
        );
        assert_eq!(
            GaussianState::vacuum(1).tensor(&GaussianState::vacuum(1)),
            GaussianState::vacuum(2)
        );
        assert!(ab.partial_trace(&[]).is_err());
        assert!(ab.partial_trace(&[0, 0]).is_err());
        let r = 0.7;
        let marginal = tmsv(r).partial_trace(&[1]).unwrap();
        assert_abs_diff_eq!(marginal.mean_photon_number(), r.sinh().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(marginal.cov()[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn unphysical_state_rejected() {
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]));
        assert!(GaussianState::new(DVector::zeros(2), cov).is_err());
    }
}
