//! Gradient-descent training loop, ensembles over seeds and best-member selection.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    /// Halve the learning rate when the best cost has not improved by
    /// `min_improvement` over `patience` updates, and after any step that would
    /// increase the cost (such steps are rejected). Stops once the rate drops below `min_lr`.
    DecayOnPlateau {
        patience: usize,
        min_improvement: f64,
        factor: f64,
        min_lr: f64,
    },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::DecayOnPlateau {
            patience: 50,
            min_improvement: 1e-6,
            factor: 0.5,
            min_lr: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub updates: usize,
    pub lr: f64,
    #[serde(default)]
    pub schedule: Schedule,
    pub ensemble: usize,
    pub seed_root: u64,
    #[serde(default)]
    pub cost: String,
}

impl TrainPlan {
    pub fn new(updates: usize, lr: f64, ensemble: usize, seed_root: u64) -> Self {
        Self {
            updates,
            lr,
            schedule: Schedule::default(),
            ensemble,
            seed_root,
            cost: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.updates == 0 || !(self.lr > 0.0) || self.ensemble == 0 {
            return Err(Error::InvalidArgument(format!(
                "plan needs updates >= 1, lr > 0 and ensemble >= 1 (got {}, {}, {})",
                self.updates, self.lr, self.ensemble
            )));
        }
        Ok(())
    }

    /// Seeds of the ensemble members.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.ensemble as u64)
            .map(|i| self.seed_root.wrapping_add(i))
            .collect()
    }
}

/// Result of one optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    /// Parameters with the lowest cost seen.
    pub params: Vec<f64>,
    pub cost: f64,
    /// Cost at the start of every update.
    pub trace: Vec<f64>,
    /// No parameter ever moved (zero gradient from the start).
    pub stalled: bool,
    pub final_lr: f64,
}

/// Minimize `cost` by gradient descent from `init`.
///
/// `cost(params)` returns the value and its gradient. A non-finite value aborts.
pub fn train<F>(plan: &TrainPlan, init: Vec<f64>, mut cost: F) -> Result<Trained>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    plan.validate()?;
    let mut params = init;
    let mut lr = plan.lr;
    let (mut value, mut grad) = cost(&params)?;
    check_finite(0, value, &grad)?;
    let mut trace = Vec::with_capacity(plan.updates + 1);
    let mut best = (value, params.clone());
    let mut last_improvement = (0usize, value);
    let mut moved = false;
    for update in 0..plan.updates {
        trace.push(value);
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 == 0.0 {
            continue;
        }
        let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - lr * g).collect();
        let (new_value, new_grad) = cost(&candidate)?;
        check_finite(update + 1, new_value, &new_grad)?;
        match &plan.schedule {
            Schedule::Constant => {
                params = candidate;
                value = new_value;
                grad = new_grad;
                moved = true;
            }
            Schedule::DecayOnPlateau {
                patience,
                min_improvement,
                factor,
                min_lr,
            } => {
                if new_value > value {
                    lr *= factor;
                } else {
                    moved |= candidate != params;
                    params = candidate;
                    value = new_value;
                    grad = new_grad;
                    if value < last_improvement.1 - min_improvement {
                        last_improvement = (update, value);
                    } else if update - last_improvement.0 >= *patience {
                        lr *= factor;
                        last_improvement = (update, value);
                    }
                }
                if lr < *min_lr {
                    break;
                }
            }
        }
        if value < best.0 {
            best = (value, params.clone());
        }
    }
    trace.push(value);
    Ok(Trained {
        params: best.1,
        cost: best.0,
        trace,
        stalled: !moved,
        final_lr: lr,
    })
}

fn check_finite(update: usize, value: f64, grad: &[f64]) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite {
            update,
            detail: format!("cost = {value}"),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            update,
            detail: format!("gradient component {i} = {}", grad[i]),
        });
    }
    Ok(())
}

/// Outcome of one ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub trace: Vec<f64>,
    pub params: Vec<f64>,
    /// Lower is better; tasks that maximize a score store its negative or `1 − score`.
    pub test_metric: f64,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    pub wall_time_s: f64,
    #[serde(default)]
    pub stalled: bool,
    #[serde(default)]
    pub plan: Option<TrainPlan>,
}

impl RunRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Run `member(seed)` for every seed of the plan in parallel.
///
/// Members that fail are returned as errors alongside their seed; the wall time
/// of successful members is filled in here.
pub fn run_ensemble<F>(plan: &TrainPlan, member: F) -> Vec<(u64, Result<RunRecord>)>
where
    F: Fn(u64) -> Result<RunRecord> + Sync,
{
    plan.seeds()
        .into_par_iter()
        .map(|seed| {
            let start = Instant::now();
            let rec = member(seed).map(|mut r| {
                r.wall_time_s = start.elapsed().as_secs_f64();
                r
            });
            (seed, rec)
        })
        .collect()
}

/// Member with the lowest finite test metric; ties go to the lowest seed.
pub fn best_of_ensemble(records: &[RunRecord]) -> Result<&RunRecord> {
    records
        .iter()
        .filter(|r| r.test_metric.is_finite())
        .min_by(|a, b| {
            a.test_metric
                .partial_cmp(&b.test_metric)
                .unwrap()
                .then(a.seed.cmp(&b.seed))
        })
        .ok_or(Error::Empty("no ensemble member with a finite metric"))
}
