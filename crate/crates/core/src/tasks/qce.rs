//! Quantum channel equalization: a fixed passive encoder network models a memory
//! channel, and a trained passive decoder network must reproduce the encoder's
//! input of step `k` at its own output of step `k + D`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::SymplecticCircuit;
use crate::error::{Error, Result};
use crate::gaussian::{fidelity, single_mode_fidelity_with_gradient, GaussianState};
use crate::optim::{train, RunRecord, TrainPlan};
use crate::stream::{impulse_response, run_with_gradient, LossTerm, Stream, Transfer};
use crate::tasks::inputs::random_squeezed_thermal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QceSpec {
    pub m_mem_enc: usize,
    pub m_mem_dec: usize,
    pub delay: usize,
    pub encoder_seed: u64,
    /// States per training epoch.
    #[serde(default = "default_train_len")]
    pub train_len: usize,
    /// Trailing outputs of each epoch that enter the cost.
    #[serde(default = "default_train_tail")]
    pub train_tail: usize,
    /// Fixed epochs making up the training cost; memory restarts from vacuum for each.
    #[serde(default = "default_train_epochs")]
    pub train_epochs: usize,
    #[serde(default = "default_train_seed")]
    pub train_seed: u64,
    #[serde(default = "default_test_transient")]
    pub test_transient: usize,
    #[serde(default = "default_test_len")]
    pub test_len: usize,
    #[serde(default = "default_test_seed")]
    pub test_seed: u64,
}

fn default_train_len() -> usize {
    30
}
fn default_train_tail() -> usize {
    20
}
fn default_train_epochs() -> usize {
    2
}
fn default_train_seed() -> u64 {
    17
}
fn default_test_transient() -> usize {
    10
}
fn default_test_len() -> usize {
    100
}
fn default_test_seed() -> u64 {
    2_000_003
}

impl QceSpec {
    pub fn new(m_mem_enc: usize, m_mem_dec: usize, delay: usize, encoder_seed: u64) -> Self {
        Self {
            m_mem_enc,
            m_mem_dec,
            delay,
            encoder_seed,
            train_len: default_train_len(),
            train_tail: default_train_tail(),
            train_epochs: default_train_epochs(),
            train_seed: default_train_seed(),
            test_transient: default_test_transient(),
            test_len: default_test_len(),
            test_seed: default_test_seed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_tail == 0 || self.train_tail > self.train_len || self.train_epochs == 0 {
            return Err(Error::InvalidArgument(
                "QCE needs 0 < train_tail <= train_len and at least one epoch".into(),
            ));
        }
        if self.train_len - self.train_tail < self.delay {
            return Err(Error::InvalidArgument(format!(
                "delay {} exceeds the {} untargeted leading states",
                self.delay,
                self.train_len - self.train_tail
            )));
        }
        if self.test_len == 0 {
            return Err(Error::Empty("QCE test set"));
        }
        Ok(())
    }

    /// The fixed random encoder.
    pub fn encoder(&self) -> Transfer {
        let c = SymplecticCircuit::random_orthogonal(1 + self.m_mem_enc, self.encoder_seed);
        Transfer::new(1, self.m_mem_enc, c.matrix()).expect("matching modes")
    }

    /// Training epochs (deterministic in `train_seed`).
    pub fn training_epochs(&self) -> Vec<Vec<GaussianState>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.train_seed);
        (0..self.train_epochs)
            .map(|_| (0..self.train_len).map(|_| random_squeezed_thermal(&mut rng)).collect())
            .collect()
    }

    fn test_inputs(&self) -> Vec<GaussianState> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.test_seed);
        (0..self.test_transient + self.test_len)
            .map(|_| random_squeezed_thermal(&mut rng))
            .collect()
    }
}

/// Fraction of an impulse's photons that leave the encoder at steps `0..=delay`.
pub fn i_enc(encoder: &Transfer, delay: usize) -> Result<f64> {
    let r = 1.0;
    let h = impulse_response(encoder, r, delay)?;
    Ok(h.iter().sum::<f64>() / r.sinh().powi(2))
}

/// Training cost (minus the mean fidelity over every epoch's trailing outputs) and
/// its gradient with respect to the decoder's transfer matrix.
pub fn qce_cost_with_gradient(
    encoder: &Transfer,
    decoder: &Transfer,
    epochs: &[Vec<GaussianState>],
    spec: &QceSpec,
) -> Result<(f64, DMatrix<f64>)> {
    let cascade = Transfer::cascade(encoder, decoder)?;
    let n = cascade.matrix.nrows();
    let mut total = 0.0;
    let mut grad = DMatrix::zeros(n, n);
    let first_scored = spec.train_len - spec.train_tail;
    let scale = 1.0 / (spec.train_tail * epochs.len()) as f64;
    for inputs in epochs {
        let (value, g) = run_with_gradient(&cascade, 1, inputs, |k, s| {
            if k < first_scored {
                return Ok(None);
            }
            let out = s.output_marginal(k)?;
            let (f, gc, gm) = single_mode_fidelity_with_gradient(&inputs[k - spec.delay], &out)?;
            let mut term = LossTerm::zeros_like(s.joint());
            term.value = -f * scale;
            term.add_marginal(&s.output_modes(k)?, &(gc * -scale), &(gm * -scale));
            Ok(Some(term))
        })?;
        total += value;
        grad += g;
    }
    Ok((total, Transfer::cascade_grad_second(encoder, decoder, &grad)))
}

/// Test fidelity: mean over `test_len` outputs after `test_transient` steps.
pub fn qce_evaluate(encoder: &Transfer, decoder: &Transfer, spec: &QceSpec) -> Result<f64> {
    let cascade = Transfer::cascade(encoder, decoder)?;
    let inputs = spec.test_inputs();
    let mut stream = Stream::new(cascade, 1)?;
    let mut total = 0.0;
    let mut count = 0;
    for (k, input) in inputs.iter().enumerate() {
        let step = stream.step(input)?;
        if k >= spec.test_transient && k >= spec.delay {
            total += fidelity(&inputs[k - spec.delay], &stream.output_marginal(step)?)?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Train one decoder from a Haar-random start.
///
/// The record's test metric is `1 − test fidelity`; `i_enc` is stored in the metrics.
pub fn train_qce_member(
    spec: &QceSpec,
    plan: &TrainPlan,
    seed: u64,
) -> Result<(RunRecord, SymplecticCircuit)> {
    spec.validate()?;
    let encoder = spec.encoder();
    let epochs = spec.training_epochs();
    let mut circuit = SymplecticCircuit::random_orthogonal(1 + spec.m_mem_dec, seed);
    let mut work = circuit.clone();
    let trained = train(plan, circuit.params(), |p| {
        work.set_params(p)?;
        let dec = Transfer::new(1, spec.m_mem_dec, work.matrix())?;
        let (value, g) = qce_cost_with_gradient(&encoder, &dec, &epochs, spec)?;
        Ok((value, work.backprop(&g)))
    })?;
    circuit.set_params(&trained.params)?;
    let dec = Transfer::new(1, spec.m_mem_dec, circuit.matrix())?;
    let fid = qce_evaluate(&encoder, &dec, spec)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("fidelity".to_string(), fid);
    metrics.insert("train_fidelity".to_string(), -trained.cost);
    metrics.insert("i_enc".to_string(), i_enc(&encoder, spec.delay)?);
    Ok((
        RunRecord {
            seed,
            trace: trained.trace,
            params: trained.params,
            test_metric: 1.0 - fid,
            metrics,
            wall_time_s: 0.0,
            stalled: trained.stalled,
            plan: Some(plan.clone()),
        },
        circuit,
    ))
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(
            "spearman needs two equally long samples of size >= 2".into(),
        ));
    }
    let rx = DVector::from_vec(ranks(x));
    let ry = DVector::from_vec(ranks(y));
    let mx = rx.mean();
    let my = ry.mean();
    let dx = rx.add_scalar(-mx);
    let dy = ry.add_scalar(-my);
    let denom = (dx.norm_squared() * dy.norm_squared()).sqrt();
    if denom == 0.0 {
        return Err(Error::DegenerateFit("constant sample in rank correlation".into()));
    }
    Ok(dx.dot(&dy) / denom)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = avg;
        }
        i = j + 1;
    }
    out
}
