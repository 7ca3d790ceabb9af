//! Short-term quantum memory: reproduce the input of step `k` at the output of step `k + D`.
//!
//! With the transfer matrix partitioned as `O = [[D, C], [B, A]]` over `(io, memory)`,
//! a single input at step 0 leaves as `D` at step 0 and as `C A^{t−1} B` at step
//! `t ≥ 1`. The training cost penalizes every response except the one at the target delay:
//! `f = w1‖D‖ + w2‖C A^{D−1} B − I‖ + w3 Σ_{t<T, t≠D−1} ‖C A^t B‖` (Frobenius norms).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::SymplecticCircuit;
use crate::error::{Error, Result};
use crate::gaussian::fidelity;
use crate::optim::{train, RunRecord, TrainPlan};
use crate::stream::{Stream, Transfer};
use crate::tasks::inputs::input_sequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StqmSpec {
    pub m_io: usize,
    pub m_mem: usize,
    pub delay: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_weights")]
    pub weights: [f64; 3],
}

fn default_horizon() -> usize {
    10
}

fn default_weights() -> [f64; 3] {
    [0.5, 5.0, 0.5]
}

impl StqmSpec {
    pub fn new(m_io: usize, m_mem: usize, delay: usize) -> Self {
        Self {
            m_io,
            m_mem,
            delay,
            horizon: default_horizon(),
            weights: default_weights(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_io == 0 || self.delay == 0 {
            return Err(Error::InvalidArgument(
                "STQM needs m_io >= 1 and delay >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Blocks of a transfer matrix over `(io, memory)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPartition {
    /// memory → memory
    pub a: DMatrix<f64>,
    /// input → memory
    pub b: DMatrix<f64>,
    /// memory → output
    pub c: DMatrix<f64>,
    /// input → output
    pub d: DMatrix<f64>,
}

impl BlockPartition {
    pub fn from_matrix(o: &DMatrix<f64>, m_io: usize) -> Self {
        let n = o.nrows();
        let ni = 2 * m_io;
        let nm = n - ni;
        Self {
            d: o.view((0, 0), (ni, ni)).into_owned(),
            c: o.view((0, ni), (ni, nm)).into_owned(),
            b: o.view((ni, 0), (nm, ni)).into_owned(),
            a: o.view((ni, ni), (nm, nm)).into_owned(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let ni = self.d.nrows();
        let nm = self.a.nrows();
        let mut o = DMatrix::zeros(ni + nm, ni + nm);
        o.view_mut((0, 0), (ni, ni)).copy_from(&self.d);
        o.view_mut((0, ni), (ni, nm)).copy_from(&self.c);
        o.view_mut((ni, 0), (nm, ni)).copy_from(&self.b);
        o.view_mut((ni, ni), (nm, nm)).copy_from(&self.a);
        o
    }
}

pub fn stqm_cost(o: &DMatrix<f64>, spec: &StqmSpec) -> f64 {
    stqm_cost_with_gradient(o, spec).0
}

fn norm_and_grad(x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let n = x.norm();
    if n > 0.0 {
        (n, x / n)
    } else {
        (0.0, DMatrix::zeros(x.nrows(), x.ncols()))
    }
}

/// Cost and its gradient with respect to every entry of `o`.
pub fn stqm_cost_with_gradient(o: &DMatrix<f64>, spec: &StqmSpec) -> (f64, DMatrix<f64>) {
    let blocks = BlockPartition::from_matrix(o, spec.m_io);
    let [w1, w2, w3] = spec.weights;
    let ni = 2 * spec.m_io;
    let nm = blocks.a.nrows();
    let mut grad = BlockPartition {
        a: DMatrix::zeros(nm, nm),
        b: DMatrix::zeros(nm, ni),
        c: DMatrix::zeros(ni, nm),
        d: DMatrix::zeros(ni, ni),
    };
    let (nd, gd) = norm_and_grad(&blocks.d);
    let mut value = w1 * nd;
    grad.d = gd * w1;

    let t_max = spec.horizon.max(spec.delay);
    // powers A^t B and C A^t for t < t_max
    let mut apb = Vec::with_capacity(t_max);
    let mut cap = Vec::with_capacity(t_max);
    let mut x = blocks.b.clone();
    let mut y = blocks.c.clone();
    for _ in 0..t_max {
        apb.push(x.clone());
        cap.push(y.clone());
        x = &blocks.a * x;
        y = y * &blocks.a;
    }
    for t in 0..t_max {
        let target = t + 1 == spec.delay;
        if !target && (t >= spec.horizon || w3 == 0.0) {
            continue;
        }
        let p = &blocks.c * &apb[t];
        let (n, g) = if target {
            norm_and_grad(&(p - DMatrix::identity(ni, ni)))
        } else {
            norm_and_grad(&p)
        };
        let w = if target { w2 } else { w3 };
        if w == 0.0 || n == 0.0 {
            continue;
        }
        value += w * n;
        let g = g * w;
        grad.c += &g * apb[t].transpose();
        grad.b += cap[t].transpose() * &g;
        for j in 0..t {
            grad.a += cap[j].transpose() * &g * apb[t - 1 - j].transpose();
        }
    }
    (value, grad.to_matrix())
}

/// Mean fidelity between the input of step `k` and the output of step `k + D`
/// over `test_size` random inputs.
pub fn stqm_evaluate(transfer: &Transfer, delay: usize, test_size: usize, seed: u64) -> Result<f64> {
    if test_size == 0 {
        return Err(Error::Empty("STQM test set"));
    }
    let inputs = input_sequence(transfer.m_io, test_size + delay, seed);
    let mut stream = Stream::new(transfer.clone(), 1)?;
    let mut total = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let step = stream.step(input)?;
        if k >= delay {
            total += fidelity(&inputs[k - delay], &stream.output_marginal(step)?)?;
        }
    }
    Ok(total / test_size as f64)
}

/// Test-set settings shared by every ensemble member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub size: usize,
    pub seed: u64,
}

impl Default for TestSet {
    fn default() -> Self {
        Self { size: 100, seed: 1_000_003 }
    }
}

/// Train one orthogonal network from a Haar-random start and score it on the test set.
///
/// The record's test metric is `1 − fidelity`.
pub fn train_stqm_member(
    spec: &StqmSpec,
    plan: &TrainPlan,
    seed: u64,
    test: TestSet,
) -> Result<(RunRecord, SymplecticCircuit)> {
    spec.validate()?;
    let m = spec.m_io + spec.m_mem;
    let mut circuit = SymplecticCircuit::random_orthogonal(m, seed);
    let mut work = circuit.clone();
    let trained = train(plan, circuit.params(), |p| {
        work.set_params(p)?;
        let (value, g) = stqm_cost_with_gradient(&work.matrix(), spec);
        Ok((value, work.backprop(&g)))
    })?;
    circuit.set_params(&trained.params)?;
    let transfer = Transfer::new(spec.m_io, spec.m_mem, circuit.matrix())?;
    let fid = stqm_evaluate(&transfer, spec.delay, test.size, test.seed)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("fidelity".to_string(), fid);
    metrics.insert("cost".to_string(), trained.cost);
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
