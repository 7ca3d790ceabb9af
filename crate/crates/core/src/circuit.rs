//! Parameterized symplectic circuits built from beam splitters, phase shifters
//! and single-mode squeezers.
//!
//! A circuit acts on `m` modes; its matrix is the ordered product `G_n ⋯ G_1` of
//! the gate matrices in interleaved quadrature ordering. Parameters are the gate
//! angles and squeezing magnitudes, so every parameter vector gives an exactly
//! symplectic matrix.

use std::path::Path;

use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{rotation_matrix, squeezer_matrix, GaussianState};
use crate::linalg::quadrature_indices;

type C64 = Complex<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    /// `a_i → cos θ a_i − sin θ a_j`, `a_j → sin θ a_i + cos θ a_j`.
    BeamSplitter { theta: f64, modes: (usize, usize) },
    /// `a → e^{iφ} a`.
    PhaseShifter { phi: f64, mode: usize },
    /// Squeezing of magnitude `r` along angle `φ`; `r > 0, φ = 0` anti-squeezes `q`.
    Squeezer { r: f64, phi: f64, mode: usize },
}

impl Gate {
    pub fn num_params(&self) -> usize {
        match self {
            Gate::Squeezer { .. } => 2,
            _ => 1,
        }
    }

    pub fn modes(&self) -> Vec<usize> {
        match *self {
            Gate::BeamSplitter { modes: (i, j), .. } => vec![i, j],
            Gate::PhaseShifter { mode, .. } | Gate::Squeezer { mode, .. } => vec![mode],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Gate::BeamSplitter { theta, .. } => vec![theta],
            Gate::PhaseShifter { phi, .. } => vec![phi],
            Gate::Squeezer { r, phi, .. } => vec![r, phi],
        }
    }

    fn set_param(&mut self, slot: usize, value: f64) {
        match self {
            Gate::BeamSplitter { theta, .. } => *theta = value,
            Gate::PhaseShifter { phi, .. } => *phi = value,
            Gate::Squeezer { r, phi, .. } => {
                if slot == 0 {
                    *r = value
                } else {
                    *phi = value
                }
            }
        }
    }

    pub fn is_passive(&self) -> bool {
        !matches!(self, Gate::Squeezer { .. })
    }

    /// Gate matrix on its own modes (2x2 or 4x4, interleaved).
    pub fn local_matrix(&self) -> DMatrix<f64> {
        match *self {
            Gate::BeamSplitter { theta, .. } => bs_local(theta.cos(), theta.sin()),
            Gate::PhaseShifter { phi, .. } => m2(rotation_matrix(phi)),
            Gate::Squeezer { r, phi, .. } => m2(squeezer_matrix(r, phi)),
        }
    }

    /// Derivatives of [`Gate::local_matrix`] with respect to each parameter.
    pub fn local_derivatives(&self) -> Vec<DMatrix<f64>> {
        match *self {
            Gate::BeamSplitter { theta, .. } => vec![bs_local(-theta.sin(), theta.cos())],
            Gate::PhaseShifter { phi, .. } => {
                let (c, s) = (phi.cos(), phi.sin());
                vec![DMatrix::from_row_slice(2, 2, &[-s, -c, c, -s])]
            }
            Gate::Squeezer { r, phi, .. } => {
                let (ch, sh) = (r.cosh(), r.sinh());
                let (c, s) = (phi.cos(), phi.sin());
                vec![
                    DMatrix::from_row_slice(2, 2, &[sh + ch * c, ch * s, ch * s, sh - ch * c]),
                    DMatrix::from_row_slice(2, 2, &[-sh * s, sh * c, sh * c, sh * s]),
                ]
            }
        }
    }

    /// Full `2m x 2m` matrix of the gate.
    pub fn matrix(&self, m: usize) -> DMatrix<f64> {
        let mut s = DMatrix::identity(2 * m, 2 * m);
        left_apply_local(&mut s, &self.local_matrix(), &quadrature_indices(&self.modes()));
        s
    }
}

fn m2(a: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

fn bs_local(c: f64, s: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            c, 0.0, -s, 0.0, //
            0.0, c, 0.0, -s, //
            s, 0.0, c, 0.0, //
            0.0, s, 0.0, c,
        ],
    )
}

/// `mat[idx, :] ← local · mat[idx, :]`.
pub(crate) fn left_apply_local(mat: &mut DMatrix<f64>, local: &DMatrix<f64>, idx: &[usize]) {
    let k = idx.len();
    let n = mat.ncols();
    let rows = DMatrix::from_fn(k, n, |a, j| mat[(idx[a], j)]);
    let new_rows = local * rows;
    for a in 0..k {
        for j in 0..n {
            mat[(idx[a], j)] = new_rows[(a, j)];
        }
    }
}

/// How the gate list of a circuit was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Custom,
    /// Rectangular beam-splitter mesh followed by one output phase per mode.
    RectangularMesh,
    /// Passive mesh, one squeezer per mode, passive mesh.
    BlochMessiah,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticCircuit {
    num_modes: usize,
    gates: Vec<Gate>,
    /// One flag per gate parameter slot, in gate order.
    trainable: Vec<bool>,
    orthogonal_only: bool,
    layout: Layout,
    seed: Option<u64>,
}

impl SymplecticCircuit {
    /// Circuit with every parameter trainable. `orthogonal_only` is set when no squeezer is present.
    pub fn new(num_modes: usize, gates: Vec<Gate>) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one mode".into()));
        }
        for g in &gates {
            let ms = g.modes();
            if ms.iter().any(|&k| k >= num_modes) || (ms.len() == 2 && ms[0] == ms[1]) {
                return Err(Error::InvalidArgument(format!(
                    "gate {g:?} does not fit a {num_modes}-mode circuit"
                )));
            }
        }
        let slots = gates.iter().map(Gate::num_params).sum();
        let orthogonal_only = gates.iter().all(Gate::is_passive);
        Ok(Self {
            num_modes,
            gates,
            trainable: vec![true; slots],
            orthogonal_only,
            layout: Layout::Custom,
            seed: None,
        })
    }

    pub fn identity(num_modes: usize) -> Self {
        Self::new(num_modes, Vec::new()).expect("non-zero mode count")
    }

    /// Rectangular mesh with all angles zero (identity matrix, but trainable).
    pub fn identity_mesh(num_modes: usize) -> Self {
        let mut gates = Vec::new();
        for &(k, _) in &clements_positions(num_modes) {
            gates.push(Gate::PhaseShifter { phi: 0.0, mode: k });
            gates.push(Gate::BeamSplitter {
                theta: 0.0,
                modes: (k, k + 1),
            });
        }
        for k in 0..num_modes {
            gates.push(Gate::PhaseShifter { phi: 0.0, mode: k });
        }
        let mut c = Self::new(num_modes, gates).expect("valid mesh");
        c.layout = Layout::RectangularMesh;
        c
    }

    /// Haar-random passive circuit realized exactly as a rectangular mesh.
    pub fn random_orthogonal(num_modes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = haar_unitary(num_modes, &mut rng);
        let mut c = mesh_from_unitary(&u);
        c.seed = Some(seed);
        c
    }

    /// Bloch-Messiah circuit: random passive mesh, squeezers with `|r| ≤ max_r`, random passive mesh.
    ///
    /// Squeezer angles are fixed at zero and not trainable; the surrounding meshes
    /// already carry every phase.
    pub fn random_symplectic(num_modes: usize, seed: u64, max_r: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = mesh_from_unitary(&haar_unitary(num_modes, &mut rng));
        let second = mesh_from_unitary(&haar_unitary(num_modes, &mut rng));
        let bound = max_r.abs();
        let mut gates = first.gates.clone();
        let mut trainable = first.trainable.clone();
        for k in 0..num_modes {
            let r = if bound > 0.0 {
                Uniform::new_inclusive(-bound, bound).sample(&mut rng)
            } else {
                0.0
            };
            gates.push(Gate::Squeezer { r, phi: 0.0, mode: k });
            trainable.extend([true, false]);
        }
        gates.extend(second.gates.iter().cloned());
        trainable.extend(second.trainable.iter());
        Self {
            num_modes,
            gates,
            trainable,
            orthogonal_only: false,
            layout: Layout::BlochMessiah,
            seed: Some(seed),
        }
    }

    /// Pairwise full-reflection beam splitters between mode `i` and mode `m_io + i`.
    ///
    /// As the transfer matrix of a stream with `m_io` io modes and as many memory
    /// modes, this is a perfect one-step delay (up to a sign on the quadratures).
    pub fn swap(m_io: usize) -> Self {
        let gates = (0..m_io)
            .map(|i| Gate::BeamSplitter {
                theta: std::f64::consts::FRAC_PI_2,
                modes: (i, m_io + i),
            })
            .collect();
        Self::new(2 * m_io, gates).expect("valid swap circuit")
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_orthogonal_only(&self) -> bool {
        self.orthogonal_only
    }

    /// Freeze or unfreeze a parameter slot, addressed by gate index and slot within the gate.
    pub fn set_trainable(&mut self, gate: usize, slot: usize, on: bool) {
        let offset: usize = self.gates[..gate].iter().map(Gate::num_params).sum();
        self.trainable[offset + slot] = on;
    }

    pub fn freeze_all(&mut self) {
        self.trainable.iter_mut().for_each(|t| *t = false);
    }

    /// Append the gates of `next`, which act after the gates of `self`.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if next.num_modes != self.num_modes {
            return Err(Error::ModeMismatch {
                expected: self.num_modes,
                actual: next.num_modes,
            });
        }
        let mut out = self.clone();
        out.gates.extend(next.gates.iter().cloned());
        out.trainable.extend(next.trainable.iter());
        out.orthogonal_only = self.orthogonal_only && next.orthogonal_only;
        out.layout = Layout::Custom;
        Ok(out)
    }

    /// Push a gate; its parameters are trainable.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.modes().iter().any(|&k| k >= self.num_modes) {
            return Err(Error::InvalidArgument(format!("gate {gate:?} out of range")));
        }
        if !gate.is_passive() {
            self.orthogonal_only = false;
        }
        self.trainable.extend(std::iter::repeat(true).take(gate.num_params()));
        self.gates.push(gate);
        self.layout = Layout::Custom;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.trainable.iter().filter(|&&t| t).count()
    }

    /// Trainable parameters, in gate order.
    pub fn params(&self) -> Vec<f64> {
        self.gates
            .iter()
            .flat_map(|g| g.params())
            .zip(&self.trainable)
            .filter(|(_, &t)| t)
            .map(|(p, _)| p)
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut it = params.iter();
        let mut slot = 0;
        for g in self.gates.iter_mut() {
            for s in 0..g.num_params() {
                if self.trainable[slot] {
                    g.set_param(s, *it.next().unwrap());
                }
                slot += 1;
            }
        }
        Ok(())
    }

    /// Ordered product `G_n ⋯ G_1`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = 2 * self.num_modes;
        let mut s = DMatrix::identity(n, n);
        for g in &self.gates {
            left_apply_local(&mut s, &g.local_matrix(), &quadrature_indices(&g.modes()));
        }
        s
    }

    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        if state.num_modes() != self.num_modes {
            return Err(Error::ModeMismatch {
                expected: self.num_modes,
                actual: state.num_modes(),
            });
        }
        let mut out = state.clone();
        for g in &self.gates {
            out.apply_local(&g.local_matrix(), &g.modes());
        }
        Ok(out)
    }

    /// Gradient of a loss with respect to the trainable parameters, given `Ḡ = ∂L/∂S`.
    ///
    /// Reverse pass over the gate list: with `A_k = (G_n⋯G_{k+1})ᵀ Ḡ` and
    /// `P_{k−1} = G_{k−1}⋯G_1`, `∂L/∂θ = ⟨A_k P_{k−1}ᵀ, ∂G_k/∂θ⟩`, restricted to the
    /// gate's own rows and columns.
    pub fn backprop(&self, gbar: &DMatrix<f64>) -> Vec<f64> {
        let n = 2 * self.num_modes;
        assert_eq!(gbar.nrows(), n);
        // rows of P_{k-1} touched by gate k
        let mut p = DMatrix::identity(n, n);
        let mut saved_rows = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let idx = quadrature_indices(&g.modes());
            saved_rows.push(DMatrix::from_fn(idx.len(), n, |a, j| p[(idx[a], j)]));
            left_apply_local(&mut p, &g.local_matrix(), &idx);
        }
        let mut a = gbar.clone();
        let mut grads_rev: Vec<f64> = Vec::new();
        let mut slot = self.trainable.len();
        for (g, prow) in self.gates.iter().zip(saved_rows.iter()).rev() {
            let idx = quadrature_indices(&g.modes());
            let arow = DMatrix::from_fn(idx.len(), n, |r, j| a[(idx[r], j)]);
            let local_grad = &arow * prow.transpose();
            let derivs = g.local_derivatives();
            slot -= derivs.len();
            for (s, d) in derivs.iter().enumerate().rev() {
                if self.trainable[slot + s] {
                    grads_rev.push(local_grad.component_mul(d).sum());
                }
            }
            let local_t = g.local_matrix().transpose();
            left_apply_local(&mut a, &local_t, &idx);
        }
        grads_rev.reverse();
        grads_rev
    }

    /// Loss value and parameter gradient for a loss given as `S ↦ (L, ∂L/∂S)`.
    pub fn gradient<F>(&self, loss: F) -> (f64, Vec<f64>)
    where
        F: Fn(&DMatrix<f64>) -> (f64, DMatrix<f64>),
    {
        let (value, gbar) = loss(&self.matrix());
        (value, self.backprop(&gbar))
    }

    /// Central finite-difference gradient of `loss(S(θ))`.
    pub fn finite_difference_gradient<F>(&self, loss: F, h: f64) -> Vec<f64>
    where
        F: Fn(&DMatrix<f64>) -> f64,
    {
        let base = self.params();
        let mut work = self.clone();
        let mut out = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] = base[i] + h;
            work.set_params(&p).unwrap();
            let up = loss(&work.matrix());
            p[i] = base[i] - h;
            work.set_params(&p).unwrap();
            let down = loss(&work.matrix());
            out.push((up - down) / (2.0 * h));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.trainable.len() != c.gates.iter().map(Gate::num_params).sum::<usize>() {
            return Err(Error::InvalidArgument(
                "trainable flags do not match gate parameters".into(),
            ));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Real `2m x 2m` matrix of the passive transformation `a → U a`.
pub fn passive_matrix(u: &DMatrix<C64>) -> DMatrix<f64> {
    let m = u.nrows();
    let mut s = DMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for k in 0..m {
            let z = u[(j, k)];
            s[(2 * j, 2 * k)] = z.re;
            s[(2 * j, 2 * k + 1)] = -z.im;
            s[(2 * j + 1, 2 * k)] = z.im;
            s[(2 * j + 1, 2 * k + 1)] = z.re;
        }
    }
    s
}

/// Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix.
pub fn haar_unitary<R: rand::Rng>(m: usize, rng: &mut R) -> DMatrix<C64> {
    let z = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..m {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Mode pair `(k, k+1)` of every mesh cell in application order, as produced by
/// the rectangular decomposition.
fn clements_positions(n: usize) -> Vec<(usize, usize)> {
    let mut right = Vec::new();
    let mut left = Vec::new();
    for i in 1..n {
        if i % 2 == 1 {
            for j in 0..i {
                right.push((i - 1 - j, i - 1 - j + 1));
            }
        } else {
            for j in 1..=i {
                let k = n + j - i - 2;
                left.push((k, k + 1));
            }
        }
    }
    left.reverse();
    right.extend(left);
    right
}

/// 2x2 cell `T(θ, φ) = [[e^{iφ} cos θ, −sin θ], [e^{iφ} sin θ, cos θ]]` = BS(θ)·PS_k(φ).
fn cell(theta: f64, phi: f64) -> [[C64; 2]; 2] {
    let e = C64::from_polar(1.0, phi);
    let (c, s) = (theta.cos(), theta.sin());
    [
        [e * c, C64::new(-s, 0.0)],
        [e * s, C64::new(c, 0.0)],
    ]
}

/// Rectangular-mesh circuit whose passive matrix equals `u` to machine precision.
pub fn mesh_from_unitary(u: &DMatrix<C64>) -> SymplecticCircuit {
    let n = u.nrows();
    let mut w = u.clone();
    let mut right: Vec<(usize, f64, f64)> = Vec::new();
    let mut left: Vec<(usize, f64, f64)> = Vec::new();
    for i in 1..n {
        if i % 2 == 1 {
            for j in 0..i {
                let r = n - 1 - j;
                let k = i - 1 - j;
                let (a, b) = (w[(r, k)], w[(r, k + 1)]);
                let theta = a.norm().atan2(b.norm());
                let phi = a.arg() - b.arg();
                // W ← W T⁻¹ on columns k, k+1
                let t = cell(theta, phi);
                for row in 0..n {
                    let (x, y) = (w[(row, k)], w[(row, k + 1)]);
                    w[(row, k)] = x * t[0][0].conj() + y * t[0][1].conj();
                    w[(row, k + 1)] = x * t[1][0].conj() + y * t[1][1].conj();
                }
                right.push((k, theta, phi));
            }
        } else {
            for j in 1..=i {
                let k = n + j - i - 2;
                let col = j - 1;
                let (a, b) = (w[(k, col)], w[(k + 1, col)]);
                let theta = b.norm().atan2(a.norm());
                let phi = std::f64::consts::PI + b.arg() - a.arg();
                // W ← T W on rows k, k+1
                let t = cell(theta, phi);
                for c in 0..n {
                    let (x, y) = (w[(k, c)], w[(k + 1, c)]);
                    w[(k, c)] = t[0][0] * x + t[0][1] * y;
                    w[(k + 1, c)] = t[1][0] * x + t[1][1] * y;
                }
                left.push((k, theta, phi));
            }
        }
    }
    // W is now diagonal; move it through the inverse left cells.
    let mut phases: Vec<f64> = (0..n).map(|k| w[(k, k)].arg()).collect();
    let mut moved = Vec::with_capacity(left.len());
    for &(k, theta, phi) in left.iter().rev() {
        let (alpha, beta) = (phases[k], phases[k + 1]);
        phases[k] = beta - phi + std::f64::consts::PI;
        phases[k + 1] = beta;
        moved.push((k, theta, alpha - beta + std::f64::consts::PI));
    }
    // application order: right cells, then moved cells starting from the last left cell
    let mut gates = Vec::new();
    for &(k, theta, phi) in right.iter().chain(moved.iter()) {
        gates.push(Gate::PhaseShifter {
            phi: wrap_angle(phi),
            mode: k,
        });
        gates.push(Gate::BeamSplitter {
            theta,
            modes: (k, k + 1),
        });
    }
    for (k, &p) in phases.iter().enumerate() {
        gates.push(Gate::PhaseShifter {
            phi: wrap_angle(p),
            mode: k,
        });
    }
    let mut c = SymplecticCircuit::new(n, gates).expect("valid mesh");
    c.layout = Layout::RectangularMesh;
    c
}

fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y - two_pi
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, orthogonal_defect, symplectic_defect};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn empty_circuit_is_identity() {
        assert_eq!(SymplecticCircuit::identity(3).matrix(), DMatrix::identity(6, 6));
    }

    #[test]
    fn gate_matrices_are_symplectic() {
        for g in [
            Gate::BeamSplitter { theta: 0.3, modes: (0, 2) },
            Gate::PhaseShifter { phi: -1.2, mode: 1 },
            Gate::Squeezer { r: 0.8, phi: 0.4, mode: 2 },
        ] {
            let s = g.matrix(3);
            assert!(symplectic_defect(&s) < 1e-12);
            if g.is_passive() {
                assert!(orthogonal_defect(&s) < 1e-12);
            } else {
                assert_abs_diff_eq!(s.determinant(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn full_reflection_twice_is_minus_identity() {
        let g = Gate::BeamSplitter { theta: FRAC_PI_2, modes: (0, 1) };
        let s = g.matrix(2);
        assert_abs_diff_eq!(s[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(max_abs(&(&s * &s + DMatrix::identity(4, 4))), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn squeezer_on_vacuum() {
        let r = 0.6;
        let c = SymplecticCircuit::new(1, vec![Gate::Squeezer { r, phi: 0.0, mode: 0 }]).unwrap();
        let out = c.apply(&GaussianState::vacuum(1)).unwrap();
        assert_abs_diff_eq!(out.cov()[(0, 0)], (2.0 * r).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.cov()[(1, 1)], (-2.0 * r).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.cov()[(0, 1)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.mean_photon_number(), r.sinh().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn mesh_reproduces_unitary() {
        for m in 1..7 {
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            let u = haar_unitary(m, &mut rng);
            let c = mesh_from_unitary(&u);
            assert_eq!(c.gates().len(), m * (m - 1) + m);
            assert_eq!(c.num_params(), m * m);
            let diff = max_abs(&(c.matrix() - passive_matrix(&u)));
            assert!(diff < 1e-10, "m={m} diff={diff}");
        }
    }

    #[test]
    fn identity_mesh_matches_decomposition_layout() {
        let m = 5;
        let a = SymplecticCircuit::identity_mesh(m);
        let b = SymplecticCircuit::random_orthogonal(m, 3);
        assert_eq!(a.matrix(), DMatrix::identity(10, 10));
        for (x, y) in a.gates().iter().zip(b.gates()) {
            assert_eq!(x.modes(), y.modes());
        }
    }

    #[test]
    fn random_symplectic_layout() {
        let c = SymplecticCircuit::random_symplectic(3, 9, 0.5);
        assert!(symplectic_defect(&c.matrix()) < 1e-10);
        assert_eq!(c.num_params(), 2 * 9 + 3);
        let z = SymplecticCircuit::random_symplectic(3, 9, 0.0);
        assert!(orthogonal_defect(&z.matrix()) < 1e-10);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let c = SymplecticCircuit::random_symplectic(3, 4, 0.4);
        let target = SymplecticCircuit::random_symplectic(3, 5, 0.4).matrix();
        let loss = |s: &DMatrix<f64>| (s - &target).norm_squared();
        let (_, g) = c.gradient(|s| (loss(s), 2.0 * (s - &target)));
        let fd = c.finite_difference_gradient(loss, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn frozen_parameters_are_skipped() {
        let mut c = SymplecticCircuit::new(
            2,
            vec![
                Gate::PhaseShifter { phi: 0.1, mode: 0 },
                Gate::BeamSplitter { theta: 0.2, modes: (0, 1) },
                Gate::Squeezer { r: 0.3, phi: 0.4, mode: 1 },
            ],
        )
        .unwrap();
        c.set_trainable(1, 0, false);
        assert_eq!(c.params(), vec![0.1, 0.3, 0.4]);
        c.set_params(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.gates()[1].params(), vec![0.2]);
        assert_eq!(c.gates()[2].params(), vec![2.0, 3.0]);
        assert_eq!(c.backprop(&DMatrix::identity(4, 4)).len(), 3);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = SymplecticCircuit::random_symplectic(4, 11, 0.3);
        let back = SymplecticCircuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.matrix(), c.matrix());
    }
}
