//! Discrete-time unrolling of a recurrent symplectic network.
//!
//! A network has `m_io` input/output modes and `m_mem` memory modes. At each step
//! the input state enters the io modes, the transfer matrix acts on
//! `(io, memory)` (io modes first), the io modes leave as the output of that step
//! and the memory modes are looped back.
//!
//! The simulator tracks the joint Gaussian state of the memory and a sliding
//! window of the most recent outputs, ordered `[memory, oldest output, ..., newest output]`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::circuit::SymplecticCircuit;
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{quadrature_indices, select, select_vec, symmetrize};

#[derive(Clone, Debug)]
pub struct Qornn {
    m_io: usize,
    m_mem: usize,
    circuit: SymplecticCircuit,
}

impl Qornn {
    pub fn new(m_io: usize, m_mem: usize, circuit: SymplecticCircuit) -> Result<Self> {
        if m_io == 0 {
            return Err(Error::InvalidArgument("m_io must be at least 1".into()));
        }
        if circuit.num_modes() != m_io + m_mem {
            return Err(Error::ModeMismatch {
                expected: m_io + m_mem,
                actual: circuit.num_modes(),
            });
        }
        Ok(Self {
            m_io,
            m_mem,
            circuit,
        })
    }

    pub fn m_io(&self) -> usize {
        self.m_io
    }

    pub fn m_mem(&self) -> usize {
        self.m_mem
    }

    pub fn circuit(&self) -> &SymplecticCircuit {
        &self.circuit
    }

    pub fn circuit_mut(&mut self) -> &mut SymplecticCircuit {
        &mut self.circuit
    }

    pub fn transfer(&self) -> Transfer {
        Transfer {
            m_io: self.m_io,
            m_mem: self.m_mem,
            matrix: self.circuit.matrix(),
        }
    }

    pub fn stream(&self, window: usize) -> Result<Stream> {
        Stream::new(self.transfer(), window)
    }
}

/// Transfer matrix of one network step, io modes first.
#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub m_io: usize,
    pub m_mem: usize,
    pub matrix: DMatrix<f64>,
}

impl Transfer {
    pub fn new(m_io: usize, m_mem: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = 2 * (m_io + m_mem);
        if m_io == 0 || matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "transfer matrix must be {n}x{n} with m_io >= 1"
            )));
        }
        Ok(Self {
            m_io,
            m_mem,
            matrix,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.m_io + self.m_mem
    }

    /// Two networks in series: the output of `first` is the input of `second`.
    ///
    /// Memory modes of the composite are `[first memory, second memory]`.
    pub fn cascade(first: &Transfer, second: &Transfer) -> Result<Transfer> {
        if first.m_io != second.m_io {
            return Err(Error::ModeMismatch {
                expected: first.m_io,
                actual: second.m_io,
            });
        }
        let m_io = first.m_io;
        let m_mem = first.m_mem + second.m_mem;
        let n = 2 * (m_io + m_mem);
        let (e, d) = cascade_embeddings(first, second);
        debug_assert_eq!(e.nrows(), n);
        Transfer::new(m_io, m_mem, d * e)
    }

    /// Gradient with respect to the second network's matrix, given the gradient
    /// with respect to the cascade's matrix.
    pub fn cascade_grad_second(
        first: &Transfer,
        second: &Transfer,
        grad: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let (e, _) = cascade_embeddings(first, second);
        let full = grad * e.transpose();
        let idx = second_indices(first, second);
        select(&full, &idx, &idx)
    }

    /// Gradient with respect to the first network's matrix.
    pub fn cascade_grad_first(
        first: &Transfer,
        second: &Transfer,
        grad: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let (_, d) = cascade_embeddings(first, second);
        let full = d.transpose() * grad;
        let n1 = 2 * first.num_modes();
        full.view((0, 0), (n1, n1)).into_owned()
    }
}

fn second_indices(first: &Transfer, second: &Transfer) -> Vec<usize> {
    let m_io = first.m_io;
    let modes: Vec<usize> = (0..m_io)
        .chain((0..second.m_mem).map(|k| m_io + first.m_mem + k))
        .collect();
    quadrature_indices(&modes)
}

fn cascade_embeddings(first: &Transfer, second: &Transfer) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = 2 * (first.m_io + first.m_mem + second.m_mem);
    let n1 = 2 * first.num_modes();
    let mut e = DMatrix::identity(n, n);
    e.view_mut((0, 0), (n1, n1)).copy_from(&first.matrix);
    let idx = second_indices(first, second);
    let mut d = DMatrix::identity(n, n);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            d[(i, j)] = second.matrix[(a, b)];
        }
    }
    (e, d)
}

/// Joint state of memory plus retained outputs.
#[derive(Clone, Debug)]
pub struct Stream {
    transfer: Transfer,
    window: usize,
    joint: GaussianState,
    /// Step index of each retained output slice, oldest first.
    retained: VecDeque<usize>,
    next_step: usize,
}

/// Record of one step, kept for the reverse pass.
struct StepRecord {
    ext_cov: DMatrix<f64>,
    ext_mean: DVector<f64>,
    /// Quadrature indices of the new joint state inside the extended state.
    keep: Vec<usize>,
}

impl Stream {
    pub fn new(transfer: Transfer, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("window must be at least 1".into()));
        }
        let m_mem = transfer.m_mem;
        let joint = if m_mem == 0 {
            // zero-mode placeholder, never exposed
            GaussianState::from_parts_unchecked(DVector::zeros(0), DMatrix::zeros(0, 0))
        } else {
            GaussianState::vacuum(m_mem)
        };
        Ok(Self {
            transfer,
            window,
            joint,
            retained: VecDeque::new(),
            next_step: 0,
        })
    }

    pub fn m_io(&self) -> usize {
        self.transfer.m_io
    }

    pub fn m_mem(&self) -> usize {
        self.transfer.m_mem
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Number of steps taken so far; the next output gets this index.
    pub fn step_count(&self) -> usize {
        self.next_step
    }

    pub fn retained_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.retained.iter().copied()
    }

    /// Joint state `[memory, outputs oldest..newest]`.
    pub fn joint(&self) -> &GaussianState {
        &self.joint
    }

    pub fn transfer(&self) -> &Transfer {
        &self.transfer
    }

    fn extend(&self, input: &GaussianState) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let m_io = self.m_io();
        if input.num_modes() != m_io {
            return Err(Error::ModeMismatch {
                expected: m_io,
                actual: input.num_modes(),
            });
        }
        let ni = 2 * m_io;
        let nj = self.joint.cov().nrows();
        let mut cov = DMatrix::zeros(ni + nj, ni + nj);
        cov.view_mut((0, 0), (ni, ni)).copy_from(input.cov());
        cov.view_mut((ni, ni), (nj, nj)).copy_from(self.joint.cov());
        let mut mean = DVector::zeros(ni + nj);
        mean.rows_mut(0, ni).copy_from(input.mean());
        mean.rows_mut(ni, nj).copy_from(self.joint.mean());
        Ok((cov, mean))
    }

    /// Modes of the extended state `[input, memory, outputs]` that make up the
    /// next joint state, after evicting beyond the window.
    fn keep_modes(&self) -> (Vec<usize>, bool) {
        let m_io = self.m_io();
        let m = self.transfer.num_modes();
        let n_out = self.retained.len();
        let evict = n_out + 1 > self.window;
        let first_out = if evict { 1 } else { 0 };
        let mut modes: Vec<usize> = (m_io..m).collect();
        for slot in first_out..n_out {
            modes.extend((0..m_io).map(|q| m + slot * m_io + q));
        }
        modes.extend(0..m_io);
        (modes, evict)
    }

    fn step_recorded(&mut self, input: &GaussianState, record: bool) -> Result<(usize, Option<StepRecord>)> {
        let (mut cov, mut mean) = self.extend(input)?;
        let rec_before = if record {
            Some((cov.clone(), mean.clone()))
        } else {
            None
        };
        let n = 2 * self.transfer.num_modes();
        let t = &self.transfer.matrix;
        // rows then columns of the first n indices
        let top = t * cov.rows(0, n);
        cov.rows_mut(0, n).copy_from(&top);
        let left = cov.columns(0, n) * t.transpose();
        cov.columns_mut(0, n).copy_from(&left);
        symmetrize(&mut cov);
        let mtop = t * mean.rows(0, n);
        mean.rows_mut(0, n).copy_from(&mtop);

        let (modes, evict) = self.keep_modes();
        let keep = quadrature_indices(&modes);
        self.joint =
            GaussianState::from_parts_unchecked(select_vec(&mean, &keep), select(&cov, &keep, &keep));
        if evict {
            self.retained.pop_front();
        }
        let k = self.next_step;
        self.retained.push_back(k);
        self.next_step += 1;
        let rec = rec_before.map(|(ext_cov, ext_mean)| StepRecord {
            ext_cov,
            ext_mean,
            keep,
        });
        Ok((k, rec))
    }

    /// Feed one input; returns the step index of the emitted output.
    pub fn step(&mut self, input: &GaussianState) -> Result<usize> {
        Ok(self.step_recorded(input, false)?.0)
    }

    /// Joint-state mode indices of the output emitted at `step`.
    pub fn output_modes(&self, step: usize) -> Result<Vec<usize>> {
        let pos = self
            .retained
            .iter()
            .position(|&s| s == step)
            .ok_or(Error::Evicted { step })?;
        let base = self.m_mem() + pos * self.m_io();
        Ok((base..base + self.m_io()).collect())
    }

    pub fn output_marginal(&self, step: usize) -> Result<GaussianState> {
        self.joint.partial_trace(&self.output_modes(step)?)
    }

    /// Joint marginal of two output slices, first slice first.
    pub fn pair_marginal(&self, a: usize, b: usize) -> Result<GaussianState> {
        let mut modes = self.output_modes(a)?;
        modes.extend(self.output_modes(b)?);
        self.joint.partial_trace(&modes)
    }

    /// Marginal of the memory modes (`None` without memory).
    pub fn memory_marginal(&self) -> Option<GaussianState> {
        let m_mem = self.m_mem();
        (m_mem > 0).then(|| {
            self.joint
                .partial_trace(&(0..m_mem).collect::<Vec<_>>())
                .expect("memory modes exist")
        })
    }

    /// Joint state of all retained outputs, oldest first.
    pub fn outputs_marginal(&self) -> Result<GaussianState> {
        if self.retained.is_empty() {
            return Err(Error::Empty("no outputs emitted yet"));
        }
        let m_mem = self.m_mem();
        let total = self.joint.num_modes();
        self.joint.partial_trace(&(m_mem..total).collect::<Vec<_>>())
    }

    pub fn memory_photon_number(&self) -> f64 {
        (0..self.m_mem()).map(|k| self.joint.mode_photon_number(k)).sum()
    }
}

/// Loss contribution evaluated on the joint state after a step.
///
/// `cov` and `mean` are gradients with respect to the joint covariance and mean
/// (same shapes as the joint state's), with `cov` symmetric.
#[derive(Clone, Debug)]
pub struct LossTerm {
    pub value: f64,
    pub cov: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl LossTerm {
    pub fn zeros_like(state: &GaussianState) -> Self {
        let n = state.cov().nrows();
        Self {
            value: 0.0,
            cov: DMatrix::zeros(n, n),
            mean: DVector::zeros(n),
        }
    }

    /// Add a gradient given on a marginal (modes in the listed order) into this term.
    pub fn add_marginal(&mut self, modes: &[usize], cov: &DMatrix<f64>, mean: &DVector<f64>) {
        let idx = quadrature_indices(modes);
        for (a, &i) in idx.iter().enumerate() {
            self.mean[i] += mean[a];
            for (b, &j) in idx.iter().enumerate() {
                self.cov[(i, j)] += cov[(a, b)];
            }
        }
    }
}

/// Run a stream over `inputs`, accumulate a loss evaluated after every step and
/// return the total loss with its gradient with respect to the transfer matrix.
///
/// `loss(step, stream)` may return `None` for steps without a contribution.
pub fn run_with_gradient<F>(
    transfer: &Transfer,
    window: usize,
    inputs: &[GaussianState],
    mut loss: F,
) -> Result<(f64, DMatrix<f64>)>
where
    F: FnMut(usize, &Stream) -> Result<Option<LossTerm>>,
{
    let mut stream = Stream::new(transfer.clone(), window)?;
    let mut records = Vec::with_capacity(inputs.len());
    let mut terms = Vec::with_capacity(inputs.len());
    let mut total = 0.0;
    for input in inputs {
        let (k, rec) = stream.step_recorded(input, true)?;
        let term = loss(k, &stream)?;
        if let Some(t) = &term {
            if t.cov.nrows() != stream.joint.cov().nrows() {
                return Err(Error::InvalidArgument("loss gradient has the wrong shape".into()));
            }
            total += t.value;
        }
        records.push(rec.expect("recorded"));
        terms.push(term);
    }

    let t = &transfer.matrix;
    let n = t.nrows();
    let mut grad_t = DMatrix::zeros(n, n);
    let jn = stream.joint.cov().nrows();
    let mut zbar = DMatrix::zeros(jn, jn);
    let mut zbar_mean = DVector::zeros(jn);
    for (rec, term) in records.iter().zip(terms.iter()).rev() {
        if let Some(term) = term {
            zbar += &term.cov;
            zbar_mean += &term.mean;
        }
        let ext = rec.ext_cov.nrows();
        // adjoint of the transformed extended state
        let mut ybar = DMatrix::zeros(ext, ext);
        let mut ybar_mean = DVector::zeros(ext);
        for (a, &i) in rec.keep.iter().enumerate() {
            ybar_mean[i] = zbar_mean[a];
            for (b, &j) in rec.keep.iter().enumerate() {
                ybar[(i, j)] = zbar[(a, b)];
            }
        }
        // dL/dT = 2 (Ȳ E X)[:n, :n] + ȳ[:n] x[:n]ᵀ
        let x = &rec.ext_cov;
        let ex_cols = t * x.view((0, 0), (n, n)) ;
        let mut ex = x.columns(0, n).into_owned();
        ex.rows_mut(0, n).copy_from(&ex_cols);
        grad_t += 2.0 * ybar.rows(0, n) * ex;
        grad_t += ybar_mean.rows(0, n) * rec.ext_mean.rows(0, n).transpose();
        // X̄ = Eᵀ Ȳ E
        let top = t.transpose() * ybar.rows(0, n);
        ybar.rows_mut(0, n).copy_from(&top);
        let left = ybar.columns(0, n) * t;
        ybar.columns_mut(0, n).copy_from(&left);
        let mtop = t.transpose() * ybar_mean.rows(0, n);
        ybar_mean.rows_mut(0, n).copy_from(&mtop);
        let ni = 2 * transfer.m_io;
        zbar = ybar.view((ni, ni), (ext - ni, ext - ni)).into_owned();
        zbar_mean = ybar_mean.rows(ni, ext - ni).into_owned();
    }
    Ok((total, grad_t))
}

/// Photon numbers `h⁰..h^T` of the outputs when a squeezed vacuum of magnitude
/// `r_impulse` enters at step 0 and vacuum afterwards.
pub fn impulse_response(transfer: &Transfer, r_impulse: f64, horizon: usize) -> Result<Vec<f64>> {
    let m_io = transfer.m_io;
    let mut stream = Stream::new(transfer.clone(), 1)?;
    let mut first = GaussianState::squeezed_thermal(0.0, r_impulse, 0.0)?;
    for _ in 1..m_io {
        first = first.tensor(&GaussianState::vacuum(1));
    }
    let vac = GaussianState::vacuum(m_io);
    let mut h = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let step = stream.step(if k == 0 { &first } else { &vac })?;
        h.push(stream.output_marginal(step)?.mean_photon_number());
    }
    Ok(h)
}

/// Default number of vacuum steps before collecting carrier modes.
pub const DEFAULT_WARMUP: usize = 20;

/// Joint covariance of `k` consecutive outputs (oldest first) after `warmup`
/// vacuum steps, with vacuum inputs throughout.
pub fn unrolled_output_covariance(transfer: &Transfer, k: usize, warmup: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one output".into()));
    }
    let mut stream = Stream::new(transfer.clone(), k)?;
    let vac = GaussianState::vacuum(transfer.m_io);
    for _ in 0..warmup + k {
        stream.step(&vac)?;
    }
    Ok(stream.outputs_marginal()?.into_parts().1)
}

/// As [`unrolled_output_covariance`], plus the gradient of a scalar function of
/// that covariance with respect to the transfer matrix.
///
/// `f` maps the output covariance to `(value, ∂value/∂cov)`.
pub fn unrolled_output_covariance_with_gradient<F>(
    transfer: &Transfer,
    k: usize,
    warmup: usize,
    f: F,
) -> Result<(f64, DMatrix<f64>)>
where
    F: Fn(&DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>,
{
    let total = warmup + k;
    let inputs = vec![GaussianState::vacuum(transfer.m_io); total];
    let m_mem = transfer.m_mem;
    run_with_gradient(transfer, k, &inputs, |step, stream| {
        if step + 1 != total {
            return Ok(None);
        }
        let joint = stream.joint();
        let nm = joint.num_modes();
        let outs: Vec<usize> = (m_mem..nm).collect();
        let cov = joint.partial_trace(&outs)?.into_parts().1;
        let (value, g) = f(&cov)?;
        let mut term = LossTerm::zeros_like(joint);
        term.value = value;
        term.add_marginal(&outs, &g, &DVector::zeros(g.nrows()));
        Ok(Some(term))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::linalg::max_abs;
    use approx::assert_abs_diff_eq;

    fn squeezed(r: f64) -> GaussianState {
        GaussianState::squeezed_thermal(0.3, r, 0.7).unwrap()
    }

    #[test]
    fn identity_circuit_passes_inputs_through() {
        let q = Qornn::new(1, 1, SymplecticCircuit::identity(2)).unwrap();
        let mut s = q.stream(3).unwrap();
        let input = squeezed(0.5);
        let k = s.step(&input).unwrap();
        assert_eq!(s.output_marginal(k).unwrap(), input);
        assert_eq!(s.memory_marginal().unwrap(), GaussianState::vacuum(1));
    }

    #[test]
    fn swap_is_a_one_step_delay() {
        let q = Qornn::new(2, 2, SymplecticCircuit::swap(2)).unwrap();
        let mut s = q.stream(2).unwrap();
        let a = squeezed(0.4).tensor(&squeezed(0.9));
        let b = GaussianState::thermal(1.5).unwrap().tensor(&squeezed(0.1));
        s.step(&a).unwrap();
        let k = s.step(&b).unwrap();
        let out = s.output_marginal(k).unwrap();
        assert!(max_abs(&(out.cov() - a.cov())) < 1e-12);
    }

    #[test]
    fn window_eviction() {
        let q = Qornn::new(1, 1, SymplecticCircuit::random_orthogonal(2, 1)).unwrap();
        let mut s = q.stream(2).unwrap();
        for _ in 0..4 {
            s.step(&squeezed(0.3)).unwrap();
        }
        assert_eq!(s.retained_steps().collect::<Vec<_>>(), vec![2, 3]);
        assert!(matches!(s.output_marginal(1), Err(Error::Evicted { step: 1 })));
        assert_eq!(s.joint().num_modes(), 3);
    }

    #[test]
    fn memoryless_network() {
        let c = SymplecticCircuit::new(1, vec![Gate::PhaseShifter { phi: 0.3, mode: 0 }]).unwrap();
        let q = Qornn::new(1, 0, c).unwrap();
        let mut s = q.stream(1).unwrap();
        let k = s.step(&GaussianState::coherent(1.0, 0.0)).unwrap();
        let out = s.output_marginal(k).unwrap();
        assert_abs_diff_eq!(out.mean()[0], 0.3f64.cos(), epsilon = 1e-15);
        assert!(s.memory_marginal().is_none());
    }

    #[test]
    fn impulse_response_of_delay() {
        let n = 0.4f64.sinh().powi(2);
        let id = Qornn::new(1, 1, SymplecticCircuit::identity(2)).unwrap();
        let h = impulse_response(&id.transfer(), 0.4, 3).unwrap();
        assert_abs_diff_eq!(h[0], n, epsilon = 1e-12);
        assert_abs_diff_eq!(h[1..].iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        let d = Qornn::new(1, 1, SymplecticCircuit::swap(1)).unwrap();
        let h = impulse_response(&d.transfer(), 0.4, 3).unwrap();
        assert_abs_diff_eq!(h[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[1], n, epsilon = 1e-12);
    }

    #[test]
    fn cascade_with_idle_stage_reduces_to_single_network() {
        let enc = Qornn::new(1, 2, SymplecticCircuit::random_orthogonal(3, 5)).unwrap();
        let dec = Qornn::new(1, 1, SymplecticCircuit::random_symplectic(2, 6, 0.3)).unwrap();
        let idle = Transfer::new(1, 1, DMatrix::identity(4, 4)).unwrap();
        let front = Transfer::cascade(&enc.transfer(), &idle).unwrap();
        let back = Transfer::cascade(&idle, &dec.transfer()).unwrap();
        let mut s_enc = enc.stream(1).unwrap();
        let mut s_dec = dec.stream(1).unwrap();
        let mut s_front = Stream::new(front, 1).unwrap();
        let mut s_back = Stream::new(back, 1).unwrap();
        for i in 0..5 {
            let input = GaussianState::squeezed_thermal(0.1 * i as f64, 0.2, i as f64).unwrap();
            let a = s_enc.step(&input).unwrap();
            let b = s_front.step(&input).unwrap();
            let c = s_dec.step(&input).unwrap();
            let d = s_back.step(&input).unwrap();
            let diff1 = s_enc.output_marginal(a).unwrap().cov() - s_front.output_marginal(b).unwrap().cov();
            let diff2 = s_dec.output_marginal(c).unwrap().cov() - s_back.output_marginal(d).unwrap().cov();
            assert!(max_abs(&diff1) < 1e-12);
            assert!(max_abs(&diff2) < 1e-12);
        }
    }

    #[test]
    fn cascade_gradients_match_finite_differences() {
        let first = Transfer::new(1, 1, SymplecticCircuit::random_orthogonal(2, 1).matrix()).unwrap();
        let second = Transfer::new(1, 2, SymplecticCircuit::random_orthogonal(3, 2).matrix()).unwrap();
        let w = DMatrix::from_fn(8, 8, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let f = |a: &Transfer, b: &Transfer| crate::linalg::frob_dot(&w, &Transfer::cascade(a, b).unwrap().matrix);
        let g1 = Transfer::cascade_grad_first(&first, &second, &w);
        let g2 = Transfer::cascade_grad_second(&first, &second, &w);
        let h = 1e-6;
        for i in 0..4 {
            for j in 0..4 {
                let (mut p, mut m) = (first.clone(), first.clone());
                p.matrix[(i, j)] += h;
                m.matrix[(i, j)] -= h;
                assert_abs_diff_eq!((f(&p, &second) - f(&m, &second)) / (2.0 * h), g1[(i, j)], epsilon = 1e-6);
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                let (mut p, mut m) = (second.clone(), second.clone());
                p.matrix[(i, j)] += h;
                m.matrix[(i, j)] -= h;
                assert_abs_diff_eq!((f(&first, &p) - f(&first, &m)) / (2.0 * h), g2[(i, j)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = SymplecticCircuit::random_symplectic(3, 2, 0.3);
        let t = Transfer::new(1, 2, c.matrix()).unwrap();
        let inputs: Vec<_> = (0..6)
            .map(|i| GaussianState::squeezed_thermal(0.2, 0.1 * i as f64, 0.5 * i as f64).unwrap())
            .collect();
        let weights = DMatrix::from_fn(2, 2, |i, j| 1.0 + (i + 2 * j) as f64 * 0.3);
        let weights = &weights + weights.transpose();
        let loss = |k: usize, s: &Stream| -> Result<Option<LossTerm>> {
            if k < 2 {
                return Ok(None);
            }
            let modes = s.output_modes(k - 1)?;
            let out = s.output_marginal(k - 1)?;
            let mut term = LossTerm::zeros_like(s.joint());
            term.value = crate::linalg::frob_dot(&weights, out.cov());
            term.add_marginal(&modes, &weights, &DVector::zeros(2));
            Ok(Some(term))
        };
        let (_, g) = run_with_gradient(&t, 2, &inputs, loss).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            for j in 0..6 {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp.matrix[(i, j)] += h;
                tm.matrix[(i, j)] -= h;
                let up = run_with_gradient(&tp, 2, &inputs, loss).unwrap().0;
                let down = run_with_gradient(&tm, 2, &inputs, loss).unwrap().0;
                assert_abs_diff_eq!((up - down) / (2.0 * h), g[(i, j)], epsilon = 1e-5);
            }
        }
    }
}
