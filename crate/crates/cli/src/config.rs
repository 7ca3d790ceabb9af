//! Experiment configuration: one TOML file with a section per task.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qornn::optim::{Schedule, TrainPlan};
use qornn::tdm::{Hardware, PhasePolicy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Stqm,
    Entangler,
    Superadditivity,
    Qce,
    QceTdm,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Stqm => "stqm",
            Task::Entangler => "entangler",
            Task::Superadditivity => "superadditivity",
            Task::Qce => "qce",
            Task::QceTdm => "qce-tdm",
        }
    }
}

/// Optimizer settings; the seed root comes from the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub updates: usize,
    pub lr: f64,
    pub ensemble: usize,
    #[serde(default)]
    pub schedule: Schedule,
}

impl PlanConfig {
    fn new(updates: usize, lr: f64, ensemble: usize) -> Self {
        Self {
            updates,
            lr,
            ensemble,
            schedule: Schedule::default(),
        }
    }

    pub fn to_plan(&self, seed_root: u64, task: Task) -> TrainPlan {
        let mut plan = TrainPlan::new(self.updates, self.lr, self.ensemble, seed_root);
        plan.schedule = self.schedule.clone();
        plan.cost = task.name().to_string();
        plan
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StqmConfig {
    pub m_io: Vec<usize>,
    pub m_mem: Vec<usize>,
    pub delay: usize,
    pub test_size: usize,
    pub test_seed: u64,
    pub plan: PlanConfig,
}

impl Default for StqmConfig {
    fn default() -> Self {
        Self {
            m_io: vec![1, 2, 3, 4],
            m_mem: vec![1, 2, 3, 4],
            delay: 1,
            test_size: 100,
            test_seed: 1_000_003,
            plan: PlanConfig::new(4000, 0.01, 20),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntanglerConfig {
    pub m_mem: Vec<usize>,
    pub gap: Vec<usize>,
    pub warmup: usize,
    pub init_max_r: f64,
    pub plan: PlanConfig,
}

impl Default for EntanglerConfig {
    fn default() -> Self {
        Self {
            m_mem: vec![1, 2, 3],
            gap: vec![1, 2, 3],
            warmup: 10,
            init_max_r: 0.1,
            plan: PlanConfig::new(2000, 0.01, 10),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperadditivityConfig {
    /// Channel uses `K` per block.
    pub uses: usize,
    /// Ratio of mean photon number to noise variance.
    pub snr: f64,
    pub phi: Vec<f64>,
    pub n_bar: Vec<f64>,
    pub warmup: usize,
    pub init_max_r: f64,
    pub plan: PlanConfig,
}

impl Default for SuperadditivityConfig {
    fn default() -> Self {
        Self {
            uses: 15,
            snr: 3.0,
            phi: vec![0.0, 0.5, 0.9, 0.99],
            n_bar: vec![1.0, 3.0, 10.0],
            warmup: qornn::stream::DEFAULT_WARMUP,
            init_max_r: 0.3,
            plan: PlanConfig::new(600, 0.02, 3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QceConfig {
    pub encoders: Vec<u64>,
    pub m_mem_enc: usize,
    pub m_mem_dec: usize,
    pub delays: Vec<usize>,
    pub plan: PlanConfig,
}

impl Default for QceConfig {
    fn default() -> Self {
        Self {
            encoders: (0..20).collect(),
            m_mem_enc: 2,
            m_mem_dec: 3,
            delays: (0..=6).collect(),
            plan: PlanConfig::new(600, 0.05, 2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QceTdmConfig {
    /// Encoder settings `[θ_enc, φ_enc]` in radians, one landscape each.
    pub encoders: Vec<[f64; 2]>,
    pub theta_points: usize,
    pub phi_points: usize,
    pub policies: Vec<PhasePolicy>,
    pub delay: usize,
    pub runs: usize,
    pub hardware: Hardware,
}

impl Default for QceTdmConfig {
    fn default() -> Self {
        Self {
            encoders: vec![[0.25 * PI, 1.33 * PI], [0.33 * PI, 0.22 * PI], [0.5 * PI, 0.0]],
            theta_points: 11,
            phi_points: 13,
            policies: vec![PhasePolicy::Unrestricted, PhasePolicy::Restricted],
            delay: 1,
            runs: 10,
            hardware: Hardware::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Seed root shared by every ensemble and random input set.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub stqm: StqmConfig,
    pub entangler: EntanglerConfig,
    pub superadditivity: SuperadditivityConfig,
    pub qce: QceConfig,
    pub qce_tdm: QceTdmConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Check the section of `task` for empty grids and out-of-range values.
    pub fn validate(&self, task: Task) -> Result<()> {
        fn nonempty<T>(v: &[T], what: &str) -> Result<()> {
            if v.is_empty() {
                bail!("empty grid: {what}");
            }
            Ok(())
        }
        fn plan(p: &PlanConfig) -> Result<()> {
            if p.updates == 0 || !(p.lr > 0.0) || p.ensemble == 0 {
                bail!("plan needs updates >= 1, lr > 0 and ensemble >= 1");
            }
            Ok(())
        }
        match task {
            Task::Stqm => {
                let c = &self.stqm;
                nonempty(&c.m_io, "stqm.m_io")?;
                nonempty(&c.m_mem, "stqm.m_mem")?;
                if c.delay == 0 || c.test_size == 0 {
                    bail!("stqm.delay and stqm.test_size must be positive");
                }
                plan(&c.plan)
            }
            Task::Entangler => {
                let c = &self.entangler;
                nonempty(&c.m_mem, "entangler.m_mem")?;
                nonempty(&c.gap, "entangler.gap")?;
                plan(&c.plan)
            }
            Task::Superadditivity => {
                let c = &self.superadditivity;
                nonempty(&c.phi, "superadditivity.phi")?;
                nonempty(&c.n_bar, "superadditivity.n_bar")?;
                if c.uses == 0 || !(c.snr > 0.0) {
                    bail!("superadditivity.uses and superadditivity.snr must be positive");
                }
                plan(&c.plan)
            }
            Task::Qce => {
                let c = &self.qce;
                nonempty(&c.encoders, "qce.encoders")?;
                nonempty(&c.delays, "qce.delays")?;
                plan(&c.plan)
            }
            Task::QceTdm => {
                let c = &self.qce_tdm;
                nonempty(&c.encoders, "qce_tdm.encoders")?;
                nonempty(&c.policies, "qce_tdm.policies")?;
                if c.theta_points == 0 || c.phi_points == 0 || c.runs == 0 {
                    bail!("empty grid: qce_tdm.theta_points, phi_points and runs must be positive");
                }
                Ok(())
            }
        }
    }

    /// The part of the configuration that determines the results of `task`.
    pub fn task_section(&self, task: Task) -> serde_json::Value {
        let section = match task {
            Task::Stqm => serde_json::to_value(&self.stqm),
            Task::Entangler => serde_json::to_value(&self.entangler),
            Task::Superadditivity => serde_json::to_value(&self.superadditivity),
            Task::Qce => serde_json::to_value(&self.qce),
            Task::QceTdm => serde_json::to_value(&self.qce_tdm),
        };
        serde_json::json!({
            "task": task.name(),
            "seed": self.seed,
            "section": section.expect("config sections serialize"),
        })
    }

    /// Short SHA-256 digest of the task section and seed.
    pub fn hash(&self, task: Task) -> String {
        let text = serde_json::to_string(&self.task_section(task)).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn sections_override_fields() {
        let c = ExperimentConfig::parse("seed = 4\n[stqm]\nm_io = [1]\n[stqm.plan]\nupdates = 10\nlr = 0.1\nensemble = 2\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.stqm.m_io, vec![1]);
        assert_eq!(c.stqm.m_mem, StqmConfig::default().m_mem);
        assert_eq!(c.stqm.plan.updates, 10);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = ExperimentConfig::parse("seed = 1\n[stqm]\nm_oi = [1]\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn empty_grids_are_rejected() {
        let c = ExperimentConfig::parse("[qce]\nencoders = []\n").unwrap();
        assert!(c.validate(Task::Qce).is_err());
        assert!(c.validate(Task::Stqm).is_ok());
    }

    #[test]
    fn hash_tracks_only_the_task_section() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.qce.m_mem_dec = 4;
        assert_eq!(a.hash(Task::Stqm), b.hash(Task::Stqm));
        assert_ne!(a.hash(Task::Qce), b.hash(Task::Qce));
        assert_eq!(a.hash(Task::Qce).len(), 16);
    }
}
