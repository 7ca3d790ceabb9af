//! Bosonic memory channel with Gauss-Markov additive noise, Holevo rates under an
//! energy constraint, the separable-input baseline and the superadditivity gain of
//! a trained carrier-generating network.
//!
//! `K` channel uses are treated as one `K`-mode channel. The carrier covariance
//! `γ_in`, the classical modulation covariance `γ_mod` and the noise covariance
//! `γ_env` are `2K x 2K` matrices in interleaved ordering (vacuum = identity).

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::circuit::SymplecticCircuit;
use crate::error::{Error, Result};
use crate::gaussian::{entropy_of_cov, entropy_with_gradient, squeezer_matrix};
use crate::linalg::{frob_dot, interleave, symmetrize, symmetrized};
use crate::optim::{train, TrainPlan};
use crate::stream::{unrolled_output_covariance, unrolled_output_covariance_with_gradient, Transfer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussMarkovEnv {
    /// Noise variance `N` (vacuum variance = 1).
    pub noise: f64,
    /// Correlation between neighbouring uses, in `[0, 1)`.
    pub phi: f64,
    pub uses: usize,
}

impl GaussMarkovEnv {
    pub fn new(noise: f64, phi: f64, uses: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&phi) {
            return Err(Error::InvalidArgument(format!("phi = {phi} outside [0, 1)")));
        }
        if !(noise >= 0.0) || uses == 0 {
            return Err(Error::InvalidArgument(
                "noise must be non-negative and uses at least 1".into(),
            ));
        }
        Ok(Self { noise, phi, uses })
    }

    /// `M_ij(φ) = N φ^{|i−j|}`.
    pub fn correlation_matrix(&self, phi: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.uses, self.uses, |i, j| {
            self.noise * phi.powi((i as i32 - j as i32).abs())
        })
    }

    /// `diag(M(φ), M(−φ))` in block ordering `(q1..qK, p1..pK)`.
    pub fn block_covariance(&self) -> DMatrix<f64> {
        let k = self.uses;
        let mut out = DMatrix::zeros(2 * k, 2 * k);
        out.view_mut((0, 0), (k, k))
            .copy_from(&self.correlation_matrix(self.phi));
        out.view_mut((k, k), (k, k))
            .copy_from(&self.correlation_matrix(-self.phi));
        out
    }

    /// Noise covariance in interleaved ordering.
    pub fn covariance(&self) -> DMatrix<f64> {
        interleave(&self.block_covariance())
    }
}

pub fn energy_per_use(gamma_in: &DMatrix<f64>, gamma_mod: &DMatrix<f64>) -> f64 {
    let n = gamma_in.nrows() as f64;
    (gamma_in.trace() - n + gamma_mod.trace()) / (2.0 * n)
}

/// Modulation trace that spends exactly `n_bar` photons per use on top of the carrier.
pub fn modulation_budget(gamma_in: &DMatrix<f64>, n_bar: f64) -> f64 {
    let n = gamma_in.nrows() as f64;
    2.0 * n * n_bar - (gamma_in.trace() - n)
}

/// Holevo rate per use in nats: `[S(γin + γmod + γenv) − S(γin + γenv)] / K`.
pub fn holevo_rate(gamma_in: &DMatrix<f64>, gamma_mod: &DMatrix<f64>, gamma_env: &DMatrix<f64>) -> Result<f64> {
    let k = (gamma_in.nrows() / 2) as f64;
    let base = gamma_in + gamma_env;
    let s_out = entropy_of_cov(&(&base + gamma_mod))?;
    let s_noise = entropy_of_cov(&base)?;
    Ok((s_out - s_noise) / k)
}

/// Rate with gradients with respect to `γ_in` and `γ_mod`.
pub fn holevo_rate_with_gradients(
    gamma_in: &DMatrix<f64>,
    gamma_mod: &DMatrix<f64>,
    gamma_env: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    let k = (gamma_in.nrows() / 2) as f64;
    let base = gamma_in + gamma_env;
    let (s_out, g_out) = entropy_with_gradient(&(&base + gamma_mod))?;
    let (s_noise, g_noise) = entropy_with_gradient(&base)?;
    let g_mod = &g_out / k;
    let g_in = (g_out - g_noise) / k;
    Ok(((s_out - s_noise) / k, g_in, g_mod))
}

/// Euclidean projection onto `{x ≥ 0, Σx = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - total) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection onto positive semidefinite matrices with trace `total`.
fn project_spectraplex(x: &DMatrix<f64>, total: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrized(x));
    let vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    let proj = project_simplex(&vals, total);
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(proj)) * v.transpose();
    symmetrize(&mut out);
    out
}

/// Settings of the inner modulation optimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    pub max_iter: usize,
    /// Stop when one accepted step gains less than this (nats per use).
    pub tol: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-12,
        }
    }
}

/// Best modulation covariance for a fixed carrier, spending trace `budget`.
///
/// The rate is concave in `γ_mod`, so projected gradient ascent with a
/// backtracking step reaches the global optimum. `start` warm-starts the search.
pub fn optimal_modulation(
    gamma_in: &DMatrix<f64>,
    gamma_env: &DMatrix<f64>,
    budget: f64,
    start: Option<&DMatrix<f64>>,
    opts: InnerOptions,
) -> Result<(f64, DMatrix<f64>)> {
    let n = gamma_in.nrows();
    if budget <= 0.0 {
        return Ok((0.0, DMatrix::zeros(n, n)));
    }
    let mut x = match start {
        Some(s) => project_spectraplex(s, budget),
        None => DMatrix::identity(n, n) * (budget / n as f64),
    };
    let (mut value, _, mut grad) = holevo_rate_with_gradients(gamma_in, &x, gamma_env)?;
    let mut step = budget;
    for _ in 0..opts.max_iter {
        let mut accepted = false;
        while step > 1e-14 * budget.max(1.0) {
            let y = project_spectraplex(&(&x + &grad * step), budget);
            let (v, _, g) = holevo_rate_with_gradients(gamma_in, &y, gamma_env)?;
            if v >= value {
                let gain = v - value;
                x = y;
                value = v;
                grad = g;
                step *= 1.5;
                accepted = true;
                if gain < opts.tol {
                    return Ok((value, x));
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((value, x))
}

/// Per-use covariance of a squeezed vacuum, repeated over `uses` modes.
fn product_carrier(uses: usize, r: f64, angle: f64) -> DMatrix<f64> {
    let s = squeezer_matrix(r, angle);
    let s = DMatrix::from_row_slice(2, 2, &[s[0][0], s[0][1], s[1][0], s[1][1]]);
    let single = &s * s.transpose();
    let mut out = DMatrix::zeros(2 * uses, 2 * uses);
    for k in 0..uses {
        out.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&single);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineResult {
    pub rate: f64,
    /// Squeezing of the best per-use carrier.
    pub r: f64,
    pub angle: f64,
    pub gamma_mod: DMatrix<f64>,
}

/// Best rate for product carriers: identical squeezed vacua on every use, with the
/// modulation covariance optimized freely.
pub fn separable_baseline(env: &GaussMarkovEnv, n_bar: f64, opts: InnerOptions) -> Result<BaselineResult> {
    if !(n_bar > 0.0) {
        return Err(Error::InvalidArgument("photon budget must be positive".into()));
    }
    let gamma_env = env.covariance();
    let r_max = n_bar.sqrt().asinh();
    let mut best: Option<BaselineResult> = None;
    for angle in [0.0, std::f64::consts::FRAC_PI_2] {
        let mut warm: Option<DMatrix<f64>> = None;
        let eval = |r: f64, warm: &mut Option<DMatrix<f64>>| -> Result<(f64, DMatrix<f64>)> {
            let gin = product_carrier(env.uses, r, angle);
            let budget = modulation_budget(&gin, n_bar);
            let out = optimal_modulation(&gin, &gamma_env, budget, warm.as_ref(), opts)?;
            *warm = Some(out.1.clone());
            Ok(out)
        };
        // coarse grid, then golden-section refinement around the best point
        let grid = 12;
        let pts: Vec<f64> = (0..=grid).map(|i| r_max * i as f64 / grid as f64).collect();
        let mut vals = Vec::with_capacity(pts.len());
        for &r in &pts {
            vals.push(eval(r, &mut warm)?.0);
        }
        let ib = (0..vals.len())
            .max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
            .unwrap();
        let mut lo = pts[ib.saturating_sub(1)];
        let mut hi = pts[(ib + 1).min(grid)];
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - gr * (hi - lo);
        let mut d = lo + gr * (hi - lo);
        let mut fc = eval(c, &mut warm)?.0;
        let mut fd = eval(d, &mut warm)?.0;
        for _ in 0..30 {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - gr * (hi - lo);
                fc = eval(c, &mut warm)?.0;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + gr * (hi - lo);
                fd = eval(d, &mut warm)?.0;
            }
        }
        let mut candidates = vec![(pts[ib], vals[ib]), (c, fc), (d, fd)];
        candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let r = candidates[0].0;
        let (rate, gamma_mod) = eval(r, &mut warm)?;
        if best.as_ref().map_or(true, |b| rate > b.rate) {
            best = Some(BaselineResult {
                rate,
                r,
                angle,
                gamma_mod,
            });
        }
    }
    Ok(best.expect("two angles evaluated"))
}

/// Settings of the superadditivity optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperadditiveOptions {
    pub warmup: usize,
    /// Squeezing bound of random initial circuits.
    pub init_max_r: f64,
    /// Also train from the identity circuit (vacuum carrier).
    pub include_vacuum_start: bool,
    pub inner: InnerOptions,
}

impl Default for SuperadditiveOptions {
    fn default() -> Self {
        Self {
            warmup: crate::stream::DEFAULT_WARMUP,
            init_max_r: 0.3,
            include_vacuum_start: true,
            inner: InnerOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuperadditiveResult {
    pub gain: f64,
    pub rate: f64,
    pub baseline_rate: f64,
    pub circuit: SymplecticCircuit,
    pub gamma_in: DMatrix<f64>,
    pub gamma_mod: DMatrix<f64>,
    /// Seed of the best member (`None` for the vacuum start).
    pub seed: Option<u64>,
    /// Rate reached by each member, in the order vacuum start (if any) then seeds.
    pub member_rates: Vec<f64>,
}

/// Rate of a carrier network after optimizing the modulation exactly.
pub fn carrier_rate(
    circuit: &SymplecticCircuit,
    env: &GaussMarkovEnv,
    n_bar: f64,
    opts: &SuperadditiveOptions,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    let t = Transfer::new(1, circuit.num_modes() - 1, circuit.matrix())?;
    let gin = unrolled_output_covariance(&t, env.uses, opts.warmup)?;
    let budget = modulation_budget(&gin, n_bar);
    let (rate, gmod) = optimal_modulation(&gin, &env.covariance(), budget, None, opts.inner)?;
    Ok((rate, gin, gmod))
}

/// Cost assigned to carriers whose covariance overflows during the warmup
/// (squeezing amplified by the memory); such steps are always rejected.
const UNSTABLE_COST: f64 = 1e6;

/// Training objective of a carrier network and a modulation factor `L`: minus the
/// rate with `γ_mod = E(θ) L Lᵀ / ‖L‖²`, where `E(θ)` is the photon budget left by
/// the carrier. Carriers that exceed the budget cost their excess trace instead.
///
/// Returns the value and its gradient over the circuit parameters followed by
/// the entries of `L` in column-major order.
pub fn joint_objective(
    circuit: &SymplecticCircuit,
    l: &DMatrix<f64>,
    env: &GaussMarkovEnv,
    n_bar: f64,
    warmup: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = 2 * env.uses;
    let num = circuit.num_params() + n * n;
    let gamma_env = env.covariance();
    let q = l * l.transpose();
    let c = q.trace();
    let t = Transfer::new(1, circuit.num_modes() - 1, circuit.matrix())?;
    let l_grad = std::cell::RefCell::new(DMatrix::zeros(n, n));
    let unrolled = unrolled_output_covariance_with_gradient(&t, env.uses, warmup, |gin| {
        let budget = modulation_budget(gin, n_bar);
        if budget <= 0.0 {
            return Ok((-budget, DMatrix::identity(n, n)));
        }
        let gmod = &q * (budget / c);
        let (rate, g_in, g_mod) = holevo_rate_with_gradients(gin, &gmod, &gamma_env)?;
        let tr_gq = frob_dot(&g_mod, &q);
        *l_grad.borrow_mut() = (&g_mod * l) * (2.0 * budget / c) - l * (2.0 * budget * tr_gq / (c * c));
        let g = g_in - DMatrix::identity(n, n) * (tr_gq / c);
        Ok((-rate, -g))
    });
    let (value, gt) = match unrolled {
        Err(Error::Numerical(_)) => return Ok((UNSTABLE_COST, vec![0.0; num])),
        other => other?,
    };
    let mut grad = circuit.backprop(&gt);
    grad.extend(l_grad.borrow().iter().map(|x| -x));
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Ok((UNSTABLE_COST, vec![0.0; num]));
    }
    Ok((value, grad))
}

/// Train one carrier network jointly with a modulation factor `L`
/// (`γ_mod = E(θ) L Lᵀ / ‖L‖²` with `E(θ)` the remaining photon budget), then
/// re-optimize the modulation exactly for the trained carrier.
pub fn train_carrier(
    start: SymplecticCircuit,
    env: &GaussMarkovEnv,
    n_bar: f64,
    plan: &TrainPlan,
    opts: &SuperadditiveOptions,
) -> Result<(f64, SymplecticCircuit, DMatrix<f64>, DMatrix<f64>)> {
    let n = 2 * env.uses;
    let (_, _, gmod0) = carrier_rate(&start, env, n_bar, opts)?;
    // L starts as a square root of the optimal modulation for the initial carrier
    let l0 = {
        let eig = SymmetricEigen::new(symmetrized(&gmod0));
        let v = &eig.eigenvectors;
        let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt() + 1e-3);
        v * DMatrix::from_diagonal(&d) * v.transpose()
    };
    let n_circ = start.num_params();
    let mut init = start.params();
    init.extend(l0.iter());
    let mut work = start.clone();
    let trained = train(plan, init, |p| {
        work.set_params(&p[..n_circ])?;
        let l = DMatrix::from_column_slice(n, n, &p[n_circ..]);
        joint_objective(&work, &l, env, n_bar, opts.warmup)
    })?;
    work.set_params(&trained.params[..n_circ])?;
    let (rate, gin, gmod) = carrier_rate(&work, env, n_bar, opts)?;
    Ok((rate, work, gin, gmod))
}

/// Train carrier networks with one io and one memory mode and report the gain
/// over the separable baseline.
pub fn optimize_superadditive(
    env: &GaussMarkovEnv,
    n_bar: f64,
    plan: &TrainPlan,
    opts: &SuperadditiveOptions,
) -> Result<SuperadditiveResult> {
    let baseline = separable_baseline(env, n_bar, opts.inner)?;
    if !(baseline.rate > 0.0) {
        return Err(Error::InvalidArgument("baseline rate is zero".into()));
    }
    let mut starts: Vec<(Option<u64>, SymplecticCircuit)> = Vec::new();
    if opts.include_vacuum_start {
        let mut c = SymplecticCircuit::random_symplectic(2, plan.seed_root, 0.0);
        let zeros = vec![0.0; c.num_params()];
        c.set_params(&zeros)?;
        starts.push((None, c));
    }
    for seed in plan.seeds() {
        starts.push((Some(seed), SymplecticCircuit::random_symplectic(2, seed, opts.init_max_r)));
    }
    use rayon::prelude::*;
    let results: Vec<_> = starts
        .into_par_iter()
        .map(|(seed, c)| (seed, train_carrier(c, env, n_bar, plan, opts)))
        .collect();
    let mut best: Option<SuperadditiveResult> = None;
    let mut rates = Vec::new();
    for (seed, res) in results {
        let (rate, circuit, gin, gmod) = match res {
            Ok(v) => v,
            Err(_) => {
                rates.push(f64::NAN);
                continue;
            }
        };
        rates.push(rate);
        if best.as_ref().map_or(true, |b| rate > b.rate) {
            best = Some(SuperadditiveResult {
                gain: rate / baseline.rate,
                rate,
                baseline_rate: baseline.rate,
                circuit,
                gamma_in: gin,
                gamma_mod: gmod,
                seed,
                member_rates: Vec::new(),
            });
        }
    }
    let mut best = best.ok_or(Error::Empty("every carrier member failed"))?;
    best.member_rates = rates;
    Ok(best)
}
