//! Emulator of a loop-based time-multiplexed interferometer running the channel
//! equalization task with one memory mode in both encoder and decoder.
//!
//! A single squeezer emits one pulse per time bin. Each pulse passes three
//! loops in sequence; loop `i` has a phase shifter on the incoming path, a beam
//! splitter and a delay line holding `d_i` pulses. Loop phases are realized
//! virtually by ramping the phase shifters in front of the loops over time.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::circuit::{Gate, SymplecticCircuit};
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::stream::{Stream, Transfer};

pub const ITERATIONS: usize = 216;
pub const DELAYS: [usize; 3] = [1, 6, 36];
/// Bins between consecutive inputs, which stretches the first loop to the length of the second.
pub const INPUT_PERIOD: usize = 6;
/// Candidate outputs per program.
pub const OUTPUTS: usize = ITERATIONS / INPUT_PERIOD;
/// Leading outputs discarded as transient.
pub const TRANSIENT: usize = 10;
pub const USABLE: usize = OUTPUTS - TRANSIENT;
/// Squeezing magnitude of an input carrying bit 1.
pub const INPUT_SQUEEZING: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePolicy {
    Unrestricted,
    /// Phase shifters accept only `[−π/2, π/2]`; other values are shifted by π.
    Restricted,
}

/// Wrap to `[−π, π]`, then shift values outside `[−π/2, π/2]` by π.
pub fn fold_phase(x: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y < -FRAC_PI_2 {
        y += PI;
    }
    if y > FRAC_PI_2 {
        y -= PI;
    }
    y
}

/// Gate schedule of the three loops over all time bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopProgram {
    /// Beam-splitter angle of each loop at every bin.
    pub theta: [Vec<f64>; 3],
    /// Phase of the shifter in front of each loop at every bin.
    pub phi: [Vec<f64>; 3],
    pub delays: [usize; 3],
    /// Squeezing magnitude used at each bin when the input bit is 1.
    pub squeeze: Vec<f64>,
}

impl LoopProgram {
    /// All beam splitters at 0 and no phases: every pulse passes straight through.
    pub fn passthrough() -> Self {
        let squeeze = (0..ITERATIONS)
            .map(|t| if t % INPUT_PERIOD == 0 { INPUT_SQUEEZING } else { 0.0 })
            .collect();
        Self {
            theta: [vec![0.0; ITERATIONS], vec![0.0; ITERATIONS], vec![0.0; ITERATIONS]],
            phi: [vec![0.0; ITERATIONS], vec![0.0; ITERATIONS], vec![0.0; ITERATIONS]],
            delays: DELAYS,
            squeeze,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if self.theta[i].len() != ITERATIONS || self.phi[i].len() != ITERATIONS {
                return Err(Error::InvalidArgument(format!("loop {i} schedule must have {ITERATIONS} entries")));
            }
            if self.theta[i].iter().chain(&self.phi[i]).any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("loop {i} schedule is not finite")));
            }
            if self.delays[i] == 0 {
                return Err(Error::InvalidArgument("loop delays must be positive".into()));
            }
        }
        if self.squeeze.len() != ITERATIONS || self.squeeze.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("squeezing schedule must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Bins that carry an input state.
    pub fn input_bins(&self) -> Vec<usize> {
        (0..ITERATIONS).filter(|&t| self.squeeze[t] > 0.0).collect()
    }

    fn loop_enabled(&self, i: usize) -> bool {
        self.theta[i].iter().any(|&x| x != 0.0)
    }
}

/// Update the phase shifters in front of the loops so that loop `i` behaves as if it
/// applied `targets[i]` per round trip, given its actual phase `offsets[i]`.
///
/// The correction of loop `i` at bin `t` is `⌊t / d_i⌋ (offsets[i] − targets[i])`,
/// minus the correction already carried in from the previous loop.
pub fn apply_virtual_phases(
    program: &LoopProgram,
    targets: [f64; 3],
    offsets: [f64; 3],
    policy: PhasePolicy,
) -> LoopProgram {
    let mut out = program.clone();
    let mut previous = vec![0.0; ITERATIONS];
    for i in 0..3 {
        let offset = offsets[i] - targets[i];
        let corr: Vec<f64> = (0..ITERATIONS)
            .map(|t| (t / program.delays[i]) as f64 * offset)
            .collect();
        for t in 0..ITERATIONS {
            let v = out.phi[i][t] + corr[t] - previous[t];
            out.phi[i][t] = match policy {
                PhasePolicy::Unrestricted => v,
                PhasePolicy::Restricted => fold_phase(v),
            };
        }
        previous = corr;
    }
    out
}

/// Hardware settings that are not part of the gate schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hardware {
    /// Actual phase picked up per round trip in each loop.
    #[serde(default)]
    pub offsets: [f64; 3],
    /// Overall transmission from source to detector.
    #[serde(default = "one")]
    pub transmission: f64,
    /// Relative drop of the squeezing magnitude from the first to the last bin.
    #[serde(default)]
    pub pump_decay: f64,
    /// Average this many Poisson samples per detection instead of reading the exact mean.
    #[serde(default)]
    pub shots: Option<usize>,
}

fn one() -> f64 {
    1.0
}

impl Default for Hardware {
    fn default() -> Self {
        Self {
            offsets: [0.0; 3],
            transmission: 1.0,
            pump_decay: 0.0,
            shots: None,
        }
    }
}

impl Hardware {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.transmission) || !(0.0..=1.0).contains(&self.pump_decay) {
            return Err(Error::InvalidArgument("transmission and pump decay must lie in [0, 1]".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::InvalidArgument("shots must be positive".into()));
        }
        Ok(())
    }
}

/// Schedule for the encoder in the first loop and the decoder in the second.
///
/// The encoder splitter is active only at input bins and idles for the
/// `INPUT_PERIOD − 1` bins in between, so its memory makes `INPUT_PERIOD`
/// round trips per input; its virtual phase per round trip is `φ_enc / INPUT_PERIOD`.
pub fn map_qce_to_loops(
    theta_enc: f64,
    phi_enc: f64,
    theta_dec: f64,
    phi_dec: f64,
    offsets: [f64; 3],
    policy: PhasePolicy,
) -> LoopProgram {
    let mut p = LoopProgram::passthrough();
    for t in 0..ITERATIONS {
        p.theta[0][t] = if t % INPUT_PERIOD == 0 { theta_enc } else { 0.0 };
        p.theta[1][t] = theta_dec;
    }
    apply_virtual_phases(&p, [phi_enc / INPUT_PERIOD as f64, phi_dec, 0.0], offsets, policy)
}

/// `σ ← L σ Lᵀ` on the quadratures `idx`.
fn conjugate(cov: &mut DMatrix<f64>, l: &DMatrix<f64>, idx: &[usize]) {
    let n = cov.nrows();
    let k = idx.len();
    let mut tmp = [0.0; 4];
    for j in 0..n {
        for a in 0..k {
            tmp[a] = (0..k).map(|b| l[(a, b)] * cov[(idx[b], j)]).sum();
        }
        for a in 0..k {
            cov[(idx[a], j)] = tmp[a];
        }
    }
    for i in 0..n {
        for a in 0..k {
            tmp[a] = (0..k).map(|b| l[(a, b)] * cov[(i, idx[b])]).sum();
        }
        for a in 0..k {
            cov[(i, idx[a])] = tmp[a];
        }
    }
}

fn rotate(cov: &mut DMatrix<f64>, mode: usize, phi: f64) {
    if phi != 0.0 {
        let l = Gate::PhaseShifter { phi, mode: 0 }.local_matrix();
        conjugate(cov, &l, &[2 * mode, 2 * mode + 1]);
    }
}

/// Mean photon number detected at every bin for one squeezing sequence.
///
/// `bits[t]` scales the programmed squeezing of bin `t`.
pub fn emulate_bins(program: &LoopProgram, bits: &[f64], hw: &Hardware) -> Result<Vec<f64>> {
    program.validate()?;
    hw.validate()?;
    if bits.len() != ITERATIONS {
        return Err(Error::InvalidArgument(format!("need {ITERATIONS} input bits")));
    }
    let loops: Vec<usize> = (0..3).filter(|&i| i < 2 || program.loop_enabled(i)).collect();
    // mode 0 is the travelling pulse, then the delay-line slots of each simulated loop
    let mut first_slot = Vec::new();
    let mut m = 1;
    for &i in &loops {
        first_slot.push(m);
        m += program.delays[i];
    }
    let mut cov = DMatrix::identity(2 * m, 2 * m);
    let mut out = Vec::with_capacity(ITERATIONS);
    for t in 0..ITERATIONS {
        // fresh pulse from the squeezer
        let decay = 1.0 - hw.pump_decay * t as f64 / (ITERATIONS - 1) as f64;
        let r = program.squeeze[t] * bits[t] * decay;
        for j in 0..2 * m {
            for a in 0..2 {
                cov[(a, j)] = 0.0;
                cov[(j, a)] = 0.0;
            }
        }
        let (e2r, em2r) = ((2.0 * r).exp(), (-2.0 * r).exp());
        cov[(0, 0)] = e2r;
        cov[(1, 1)] = em2r;
        for (li, &i) in loops.iter().enumerate() {
            rotate(&mut cov, 0, program.phi[i][t]);
            let slot = first_slot[li] + t % program.delays[i];
            rotate(&mut cov, slot, hw.offsets[i]);
            let theta = program.theta[i][t];
            if theta != 0.0 {
                let l = Gate::BeamSplitter { theta, modes: (0, 1) }.local_matrix();
                conjugate(&mut cov, &l, &[0, 1, 2 * slot, 2 * slot + 1]);
            }
        }
        let n = (cov[(0, 0)] + cov[(1, 1)] - 2.0) / 4.0;
        out.push(hw.transmission * n);
    }
    Ok(out)
}

/// Per-run detector readings at the input bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Emulation {
    /// Input bit of every input bin, per run.
    pub bits: Vec<Vec<u8>>,
    /// Detected mean photon number at every input bin, per run.
    pub photons: Vec<Vec<f64>>,
}

impl Emulation {
    /// Readings after the transient.
    pub fn usable(&self, run: usize) -> &[f64] {
        &self.photons[run][TRANSIENT..]
    }

    /// Usable readings averaged over runs.
    pub fn mean_usable(&self) -> Vec<f64> {
        let runs = self.photons.len() as f64;
        (0..USABLE)
            .map(|k| self.photons.iter().map(|p| p[TRANSIENT + k]).sum::<f64>() / runs)
            .collect()
    }

    /// Photon numbers of the inputs `delay` slots before each usable output.
    pub fn targets(&self, run: usize, delay: usize) -> Vec<f64> {
        let n1 = INPUT_SQUEEZING.sinh().powi(2);
        (TRANSIENT..OUTPUTS)
            .map(|k| {
                if k >= delay {
                    self.bits[run][k - delay] as f64 * n1
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Emulate `runs` random bit strings, one bit per input bin.
pub fn run_emulation(program: &LoopProgram, hw: &Hardware, seed: u64, runs: usize) -> Result<Emulation> {
    program.validate()?;
    let inputs = program.input_bins();
    let mut bit_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shot_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut em = Emulation {
        bits: Vec::with_capacity(runs),
        photons: Vec::with_capacity(runs),
    };
    for _ in 0..runs {
        let bits: Vec<u8> = inputs.iter().map(|_| bit_rng.gen_range(0..=1u8)).collect();
        let mut per_bin = vec![0.0; ITERATIONS];
        for (&t, &b) in inputs.iter().zip(&bits) {
            per_bin[t] = b as f64;
        }
        let detected = emulate_bins(program, &per_bin, hw)?;
        let mut readings: Vec<f64> = inputs.iter().map(|&t| detected[t]).collect();
        if let Some(shots) = hw.shots {
            for x in readings.iter_mut() {
                *x = if *x > 0.0 {
                    let pois = Poisson::new(*x).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    (0..shots).map(|_| pois.sample(&mut shot_rng)).sum::<f64>() / shots as f64
                } else {
                    0.0
                };
            }
        }
        em.bits.push(bits);
        em.photons.push(readings);
    }
    Ok(em)
}

/// `Σ_k |n_out^k − n_target^k|`.
pub fn qce_photon_cost(output: &[f64], target: &[f64]) -> Result<f64> {
    if output.len() != target.len() {
        return Err(Error::InvalidArgument(format!(
            "output has {} entries but target has {}",
            output.len(),
            target.len()
        )));
    }
    Ok(output.iter().zip(target).map(|(a, b)| (a - b).abs()).sum())
}

/// Photon cost over the usable slots, averaged over runs.
pub fn emulation_cost(em: &Emulation, delay: usize) -> Result<f64> {
    if em.photons.is_empty() {
        return Err(Error::Empty("emulation runs"));
    }
    let mut total = 0.0;
    for run in 0..em.photons.len() {
        total += qce_photon_cost(em.usable(run), &em.targets(run, delay))?;
    }
    Ok(total / em.photons.len() as f64)
}

/// Compensate slow drifts in measured series.
///
/// `raw[run][k]` is the reading of run `run` at slot `k`. A degree-2 polynomial is
/// fitted to the run-averaged readings; every reading is divided by it, and the
/// result is scaled so that its overall mean equals `input_mean`.
pub fn rescale_measurements(raw: &[Vec<f64>], input_mean: f64) -> Result<Vec<Vec<f64>>> {
    let runs = raw.len();
    if runs == 0 {
        return Err(Error::Empty("measurement runs"));
    }
    let len = raw[0].len();
    if len < 3 || raw.iter().any(|r| r.len() != len) {
        return Err(Error::InvalidArgument("need at least 3 slots per run and equal lengths".into()));
    }
    let avg = DVector::from_fn(len, |k, _| raw.iter().map(|r| r[k]).sum::<f64>() / runs as f64);
    if avg.iter().all(|&x| x == 0.0) {
        return Err(Error::Numerical("cannot fit drift to all-zero readings".into()));
    }
    let x = DMatrix::from_fn(len, 3, |k, j| (k as f64).powi(j as i32));
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&avg, 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let fit = &x * coef;
    if fit.iter().any(|&f| !(f.abs() > 1e-12)) {
        return Err(Error::Numerical("drift fit vanishes".into()));
    }
    let mut out: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| r.iter().zip(fit.iter()).map(|(v, f)| v / f).collect())
        .collect();
    let mean = out.iter().flatten().sum::<f64>() / (runs * len) as f64;
    if !(mean.abs() > 0.0) {
        return Err(Error::Numerical("rescaled series has zero mean".into()));
    }
    let scale = input_mean / mean;
    for r in out.iter_mut() {
        for v in r.iter_mut() {
            *v *= scale;
        }
    }
    Ok(out)
}

/// One network of the loop realization: a loop phase on the memory followed by a splitter.
pub fn loop_network(theta: f64, phi: f64) -> SymplecticCircuit {
    SymplecticCircuit::new(
        2,
        vec![
            Gate::PhaseShifter { phi, mode: 1 },
            Gate::BeamSplitter { theta, modes: (0, 1) },
        ],
    )
    .expect("two-mode network")
}

/// Output photon numbers of the encoder-decoder cascade simulated directly by the
/// stream engine, one per input.
pub fn stream_reference(theta_enc: f64, phi_enc: f64, theta_dec: f64, phi_dec: f64, bits: &[u8]) -> Result<Vec<f64>> {
    let enc = Transfer::new(1, 1, loop_network(theta_enc, phi_enc).matrix())?;
    let dec = Transfer::new(1, 1, loop_network(theta_dec, phi_dec).matrix())?;
    let mut stream = Stream::new(Transfer::cascade(&enc, &dec)?, 1)?;
    let mut out = Vec::with_capacity(bits.len());
    for &b in bits {
        let input = GaussianState::squeezed_thermal(0.0, b as f64 * INPUT_SQUEEZING, 0.0)?;
        let k = stream.step(&input)?;
        out.push(stream.output_marginal(k)?.mean_photon_number());
    }
    Ok(out)
}

/// Emulation settings of a channel-equalization landscape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdmConfig {
    pub delay: usize,
    pub runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub hardware: Hardware,
}

impl Default for TdmConfig {
    fn default() -> Self {
        Self {
            delay: 1,
            runs: 10,
            seed: 0,
            hardware: Hardware::default(),
        }
    }
}

/// One point of a cost landscape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdmPoint {
    pub theta_enc: f64,
    pub phi_enc: f64,
    pub theta_dec: f64,
    pub phi_dec: f64,
    pub policy: PhasePolicy,
    pub cost: f64,
}

/// Cost of one encoder-decoder setting, with the same input bits for every setting.
pub fn qce_tdm_cost(
    theta_enc: f64,
    phi_enc: f64,
    theta_dec: f64,
    phi_dec: f64,
    policy: PhasePolicy,
    cfg: &TdmConfig,
) -> Result<TdmPoint> {
    let program = map_qce_to_loops(theta_enc, phi_enc, theta_dec, phi_dec, cfg.hardware.offsets, policy);
    let em = run_emulation(&program, &cfg.hardware, cfg.seed, cfg.runs)?;
    Ok(TdmPoint {
        theta_enc,
        phi_enc,
        theta_dec,
        phi_dec,
        policy,
        cost: emulation_cost(&em, cfg.delay)?,
    })
}

/// Cost over a grid of decoder settings for a fixed encoder.
pub fn decoder_landscape(
    theta_enc: f64,
    phi_enc: f64,
    theta_dec: &[f64],
    phi_dec: &[f64],
    policy: PhasePolicy,
    cfg: &TdmConfig,
) -> Result<Vec<TdmPoint>> {
    use rayon::prelude::*;
    let grid: Vec<(f64, f64)> = theta_dec
        .iter()
        .flat_map(|&t| phi_dec.iter().map(move |&p| (t, p)))
        .collect();
    grid.into_par_iter()
        .map(|(t, p)| qce_tdm_cost(theta_enc, phi_enc, t, p, policy, cfg))
        .collect()
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn fold_examples() {
        assert_abs_diff_eq!(fold_phase(3.0 * FRAC_PI_4), -FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(fold_phase(FRAC_PI_4), FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(fold_phase(-3.0 * FRAC_PI_4), FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(fold_phase(2.0 * PI + 0.1), 0.1, epsilon = 1e-12);
        for k in 0..200 {
            let x = -20.0 + 0.2 * k as f64;
            let y = fold_phase(x);
            assert!(y.abs() <= FRAC_PI_2 + 1e-12);
            let d = (x - y) / PI;
            assert_abs_diff_eq!(d, d.round(), epsilon = 1e-9);
        }
    }

    #[test]
    fn matching_targets_leave_phases_untouched() {
        let p = map_qce_to_loops(0.3, 0.0, 0.4, 0.0, [0.0; 3], PhasePolicy::Restricted);
        let q = apply_virtual_phases(&p, [0.2, -0.7, 1.1], [0.2, -0.7, 1.1], PhasePolicy::Unrestricted);
        assert_eq!(p, q);
    }

    #[test]
    fn program_shape() {
        let p = map_qce_to_loops(0.3, 0.5, 0.4, 0.2, [0.0; 3], PhasePolicy::Unrestricted);
        p.validate().unwrap();
        assert_eq!(p.input_bins().len(), OUTPUTS);
        assert_eq!(OUTPUTS, 36);
        assert_eq!(USABLE, 26);
        assert!(p.theta[2].iter().all(|&x| x == 0.0));
        assert_eq!(p.theta[0].iter().filter(|&&x| x != 0.0).count(), 36);
        let em = run_emulation(&p, &Hardware::default(), 1, 2).unwrap();
        assert_eq!(em.photons[0].len(), 36);
        assert_eq!(em.usable(0).len(), 26);
    }

    #[test]
    fn passthrough_reproduces_inputs() {
        let p = LoopProgram::passthrough();
        let em = run_emulation(&p, &Hardware::default(), 3, 2).unwrap();
        for run in 0..2 {
            for (b, n) in em.bits[run].iter().zip(&em.photons[run]) {
                assert_abs_diff_eq!(*n, *b as f64 * 1f64.sinh().powi(2), epsilon = 1e-12);
            }
            assert_abs_diff_eq!(qce_photon_cost(em.usable(run), &em.targets(run, 0)).unwrap(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_squeezing_gives_dark_outputs() {
        let mut p = map_qce_to_loops(0.7, 0.3, 1.1, 0.9, [0.0; 3], PhasePolicy::Restricted);
        p.squeeze = vec![0.0; ITERATIONS];
        let out = emulate_bins(&p, &[1.0; ITERATIONS], &Hardware::default()).unwrap();
        assert!(out.iter().all(|&n| n.abs() < 1e-12));
    }

    #[test]
    fn encoder_swap_is_a_one_slot_delay() {
        let p = map_qce_to_loops(FRAC_PI_2, 0.0, 0.0, 0.0, [0.0; 3], PhasePolicy::Unrestricted);
        let em = run_emulation(&p, &Hardware::default(), 5, 1).unwrap();
        assert_abs_diff_eq!(emulation_cost(&em, 1).unwrap(), 0.0, epsilon = 1e-10);
        assert!(emulation_cost(&em, 0).unwrap() > 1.0);
    }

    #[test]
    fn unrestricted_emulation_matches_stream_engine() {
        for (i, &(te, pe, td, pd)) in [(0.3, 1.2, 0.8, -0.4), (1.3, 4.1, 0.2, 2.5), (FRAC_PI_2, 0.0, FRAC_PI_4, 3.0)].iter().enumerate() {
            let hw = Hardware { offsets: [0.4, -0.2, 0.0], ..Hardware::default() };
            let p = map_qce_to_loops(te, pe, td, pd, hw.offsets, PhasePolicy::Unrestricted);
            let em = run_emulation(&p, &hw, i as u64, 1).unwrap();
            let direct = stream_reference(te, pe, td, pd, &em.bits[0]).unwrap();
            for (a, b) in em.photons[0].iter().zip(&direct) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cost_examples() {
        assert_eq!(qce_photon_cost(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(qce_photon_cost(&[1.0, 2.5], &[1.0, 2.0]).unwrap(), 0.5);
        assert!(qce_photon_cost(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rescaling() {
        let flat = vec![vec![2.0; 30]; 3];
        let out = rescale_measurements(&flat, 1.5).unwrap();
        assert!(out.iter().flatten().all(|&v| (v - 1.5).abs() < 1e-12));
        let decayed: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..36).map(|k| 1.2 * (1.0 - 0.3 * k as f64 / 35.0)).collect())
            .collect();
        let out = rescale_measurements(&decayed, 1.2).unwrap();
        assert!(out.iter().flatten().all(|&v| (v / 1.2 - 1.0).abs() < 0.02));
        assert!(rescale_measurements(&[vec![0.0; 5]], 1.0).is_err());
        assert!(rescale_measurements(&[], 1.0).is_err());
    }

    #[test]
    fn loss_scales_readings() {
        let p = map_qce_to_loops(0.4, 0.2, 0.9, 0.1, [0.0; 3], PhasePolicy::Unrestricted);
        let ideal = run_emulation(&p, &Hardware::default(), 2, 1).unwrap();
        let hw = Hardware { transmission: 0.5, ..Hardware::default() };
        let lossy = run_emulation(&p, &hw, 2, 1).unwrap();
        for (a, b) in ideal.photons[0].iter().zip(&lossy.photons[0]) {
            assert_abs_diff_eq!(0.5 * a, *b, epsilon = 1e-12);
        }
    }
}
