//! Entangler: turn a vacuum input stream into outputs that are entangled across
//! a spacing of `S` steps.
//!
//! After `warmup` vacuum steps, the cost is minus the logarithmic negativity
//! between the outputs of steps `warmup` and `warmup + S`.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::circuit::SymplecticCircuit;
use crate::error::{Error, Result};
use crate::gaussian::{
    log_negativity_with_gradient, partial_transpose_log_with_gradient, GaussianState,
};
use crate::optim::{train, RunRecord, TrainPlan};
use crate::stream::{run_with_gradient, LossTerm, Stream, Transfer};

/// Photon-number change between the last two warmup outputs above which the
/// transient is reported as not settled.
pub const TRANSIENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglerSpec {
    pub m_mem: usize,
    pub gap: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// Squeezing bound of the random initial circuits.
    #[serde(default = "default_init_r")]
    pub init_max_r: f64,
}

fn default_warmup() -> usize {
    10
}

fn default_init_r() -> f64 {
    0.1
}

impl EntanglerSpec {
    pub fn new(m_mem: usize, gap: usize) -> Self {
        Self {
            m_mem,
            gap,
            warmup: default_warmup(),
            init_max_r: default_init_r(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.gap == 0 || self.warmup == 0 {
            return Err(Error::InvalidArgument("entangler needs gap >= 1 and warmup >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntanglerEval {
    /// Minus the logarithmic negativity.
    pub cost: f64,
    /// Whether output photon numbers had settled by the end of the warmup.
    pub transient_settled: bool,
    pub photon_drift: f64,
}

/// Evaluate the cost of a single-io-mode network.
pub fn entangler_cost(transfer: &Transfer, spec: &EntanglerSpec) -> Result<EntanglerEval> {
    spec.validate()?;
    if transfer.m_io != 1 {
        return Err(Error::InvalidArgument("entangler uses one io mode".into()));
    }
    let mut stream = Stream::new(transfer.clone(), spec.gap + 2)?;
    let vac = GaussianState::vacuum(1);
    let mut photons = Vec::new();
    for _ in 0..=spec.warmup + spec.gap {
        let k = stream.step(&vac)?;
        if k + 1 >= spec.warmup && k <= spec.warmup {
            photons.push(stream.output_marginal(k)?.mean_photon_number());
        }
    }
    let pair = stream.pair_marginal(spec.warmup, spec.warmup + spec.gap)?;
    let (ln, _) = log_negativity_with_gradient(pair.cov())?;
    let drift = (photons[1] - photons[0]).abs();
    Ok(EntanglerEval {
        cost: -ln,
        transient_settled: drift < TRANSIENT_TOL,
        photon_drift: drift,
    })
}

/// Training cost and its gradient with respect to the transfer matrix.
///
/// The training cost is `ln ν̃₋` of the pair, which equals [`entangler_cost`]
/// whenever the pair is entangled and keeps a nonzero gradient when it is not.
pub fn entangler_cost_with_gradient(
    transfer: &Transfer,
    spec: &EntanglerSpec,
) -> Result<(f64, nalgebra::DMatrix<f64>)> {
    spec.validate()?;
    let total = spec.warmup + spec.gap + 1;
    let inputs = vec![GaussianState::vacuum(1); total];
    let (a, b) = (spec.warmup, spec.warmup + spec.gap);
    run_with_gradient(transfer, spec.gap + 1, &inputs, |k, s| {
        if k != b {
            return Ok(None);
        }
        let mut modes = s.output_modes(a)?;
        modes.extend(s.output_modes(b)?);
        let pair = s.pair_marginal(a, b)?;
        let (ln, g) = partial_transpose_log_with_gradient(pair.cov())?;
        let mut term = LossTerm::zeros_like(s.joint());
        term.value = -ln;
        term.add_marginal(&modes, &(-g), &DVector::zeros(4));
        Ok(Some(term))
    })
}

/// Train one circuit from a random Bloch-Messiah start.
///
/// The record's test metric is the final cost (minus the log negativity).
pub fn train_entangler_member(
    spec: &EntanglerSpec,
    plan: &TrainPlan,
    seed: u64,
) -> Result<(RunRecord, SymplecticCircuit)> {
    let m = 1 + spec.m_mem;
    let mut circuit = SymplecticCircuit::random_symplectic(m, seed, spec.init_max_r);
    let mut work = circuit.clone();
    let trained = train(plan, circuit.params(), |p| {
        work.set_params(p)?;
        let t = Transfer::new(1, spec.m_mem, work.matrix())?;
        let (value, g) = entangler_cost_with_gradient(&t, spec)?;
        Ok((value, work.backprop(&g)))
    })?;
    circuit.set_params(&trained.params)?;
    let eval = entangler_cost(&Transfer::new(1, spec.m_mem, circuit.matrix())?, spec)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("log_negativity".to_string(), -eval.cost);
    metrics.insert("photon_drift".to_string(), eval.photon_drift);
    metrics.insert(
        "transient_settled".to_string(),
        if eval.transient_settled { 1.0 } else { 0.0 },
    );
    Ok((
        RunRecord {
            seed,
            trace: trained.trace,
            params: trained.params,
            test_metric: eval.cost,
            metrics,
            wall_time_s: 0.0,
            stalled: trained.stalled,
            plan: Some(plan.clone()),
        },
        circuit,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn passive_circuit_gives_zero() {
        let c = SymplecticCircuit::random_orthogonal(3, 4);
        let t = Transfer::new(1, 2, c.matrix()).unwrap();
        let e = entangler_cost(&t, &EntanglerSpec::new(2, 1)).unwrap();
        assert_eq!(e.cost, 0.0);
        assert!(e.transient_settled);
    }

    #[test]
    fn squeezer_into_memory_entangles_neighbours() {
        let c = SymplecticCircuit::new(
            2,
            vec![
                Gate::Squeezer { r: 0.5, phi: 0.0, mode: 0 },
                Gate::BeamSplitter { theta: std::f64::consts::FRAC_PI_4, modes: (0, 1) },
            ],
        )
        .unwrap();
        let t = Transfer::new(1, 1, c.matrix()).unwrap();
        let spec = EntanglerSpec::new(1, 1);
        let e = entangler_cost(&t, &spec).unwrap();
        assert!(e.cost < 0.0);
        let (v, _) = entangler_cost_with_gradient(&t, &spec).unwrap();
        assert_abs_diff_eq!(v, e.cost, epsilon = 1e-12);
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let c = SymplecticCircuit::random_symplectic(2, 3, 0.4);
        let spec = EntanglerSpec::new(1, 1);
        let cost = |c: &SymplecticCircuit| {
            entangler_cost_with_gradient(&Transfer::new(1, 1, c.matrix()).unwrap(), &spec).unwrap().0
        };
        let (_, g) = entangler_cost_with_gradient(&Transfer::new(1, 1, c.matrix()).unwrap(), &spec).unwrap();
        let analytic = c.backprop(&g);
        let p0 = c.params();
        let h = 1e-6;
        let mut work = c.clone();
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            work.set_params(&p).unwrap();
            let up = cost(&work);
            p[i] -= 2.0 * h;
            work.set_params(&p).unwrap();
            let down = cost(&work);
            assert_abs_diff_eq!((up - down) / (2.0 * h), analytic[i], epsilon = 1e-6);
        }
    }
}
