//! Re-check stored artifacts: circuit symplecticity, covariance physicality,
//! energy constraints and the per-task thresholds.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use qornn::channel::energy_per_use;
use qornn::linalg::{min_eigenvalue, symplectic_defect};
use qornn::{GaussianState, SymplecticCircuit};
use serde::Deserialize;

use crate::config::{ExperimentConfig, Task};
use crate::output::{matrix_from_rows, Manifest, Table};

/// Tolerance on the symplectic condition of stored matrices.
pub const SYMPLECTIC_TOL: f64 = 1e-8;
/// Relative slack on the photon budget.
pub const ENERGY_TOL: f64 = 1e-6;
pub const STQM_THRESHOLD: f64 = 0.999;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    fn add(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(f, "{}: {} | {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail)?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

#[derive(Deserialize)]
struct CircuitFile {
    circuit: SymplecticCircuit,
    matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct CovarianceFile {
    n_bar: f64,
    gamma_in: Vec<Vec<f64>>,
    gamma_mod: Vec<Vec<f64>>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("missing artifact {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed artifact {}", path.display()))
}

fn field(row: &std::collections::BTreeMap<&str, &str>, key: &str) -> f64 {
    row.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn task_of(name: &str) -> Result<Task> {
    Ok(match name {
        "stqm" => Task::Stqm,
        "entangler" => Task::Entangler,
        "superadditivity" => Task::Superadditivity,
        "qce" => Task::Qce,
        "qce-tdm" => Task::QceTdm,
        other => bail!("unknown task {other:?} in manifest"),
    })
}

/// Verify the run stored in `dir`. With `config`, also check that it matches the
/// configuration the run was made with.
pub fn verify(dir: &Path, config: Option<&ExperimentConfig>) -> Result<Report> {
    let manifest = Manifest::load(dir)?;
    let task = task_of(&manifest.task)?;
    for f in &manifest.files {
        if !dir.join(f).exists() {
            bail!("missing artifact {}", dir.join(f).display());
        }
    }
    let mut report = Report::default();
    if let Some(cfg) = config {
        let hash = cfg.hash(task);
        report.add("config hash", hash == manifest.config_hash, format!("manifest {} vs config {hash}", manifest.config_hash));
    }
    for f in manifest.files.iter().filter(|f| f.starts_with("circuits/")) {
        let file: CircuitFile = read_json(&dir.join(f))?;
        let stored = matrix_from_rows(&file.matrix).context("ragged circuit matrix")?;
        let defect = if stored.is_square() && stored.nrows() % 2 == 0 { symplectic_defect(&stored) } else { f64::INFINITY };
        let rebuilt = file.circuit.matrix();
        let mismatch = if rebuilt.shape() == stored.shape() { (&rebuilt - &stored).amax() } else { f64::INFINITY };
        report.add(
            format!("symplectic {f}"),
            defect < SYMPLECTIC_TOL && mismatch < SYMPLECTIC_TOL,
            format!("defect {defect:.2e}, distance to gate list {mismatch:.2e}"),
        );
    }
    for f in manifest.files.iter().filter(|f| f.starts_with("covariances/")) {
        let file: CovarianceFile = read_json(&dir.join(f))?;
        let (gin, gmod) = match (matrix_from_rows(&file.gamma_in), matrix_from_rows(&file.gamma_mod)) {
            (Some(a), Some(b)) if a.is_square() && a.shape() == b.shape() && a.nrows() % 2 == 0 => (a, b),
            _ => bail!("malformed covariance artifact {f}"),
        };
        let physical = GaussianState::new(DVector::zeros(gin.nrows()), gin.clone()).is_ok();
        let psd = min_eigenvalue(&symmetrize(&gmod)) > -1e-9 * gmod.amax().max(1.0);
        let energy = energy_per_use(&gin, &gmod);
        report.add(format!("physical {f}"), physical && psd, format!("carrier physical {physical}, modulation positive {psd}"));
        report.add(
            format!("energy {f}"),
            energy <= file.n_bar * (1.0 + ENERGY_TOL),
            format!("{energy:.6} photons per use, budget {}", file.n_bar),
        );
    }
    thresholds(task, dir, &manifest, &mut report)?;
    Ok(report)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn thresholds(task: Task, dir: &Path, manifest: &Manifest, report: &mut Report) -> Result<()> {
    let summary = Table::read(&dir.join("summary.csv"))?;
    let rows = summary.records();
    match task {
        Task::Stqm => {
            for r in &rows {
                let (io, mem) = (field(r, "m_io") as usize, field(r, "m_mem") as usize);
                let fid = field(r, "fidelity");
                let pass = if io <= mem { fid >= STQM_THRESHOLD } else { fid < STQM_THRESHOLD };
                let need = if io <= mem { ">=" } else { "<" };
                report.add(format!("stqm fidelity ({io}, {mem})"), pass, format!("{fid:.6}, need {need} {STQM_THRESHOLD}"));
            }
        }
        Task::Entangler => {
            for r in &rows {
                let ln = field(r, "log_negativity");
                report.add(
                    format!("entangler LN (m_mem {}, gap {})", r["m_mem"], r["gap"]),
                    ln > 0.0,
                    format!("{ln:.4}, need > 0"),
                );
            }
        }
        Task::Superadditivity => {
            for r in &rows {
                let (phi, gain) = (field(r, "phi"), field(r, "gain"));
                let pass = if phi == 0.0 { (gain - 1.0).abs() <= 1e-3 } else { gain >= 1.0 - 1e-3 };
                let need = if phi == 0.0 { "1 ± 1e-3" } else { ">= 1" };
                report.add(format!("gain (φ {phi}, n̄ {})", r["n_bar"]), pass, format!("{gain:.5}, need {need}"));
            }
        }
        Task::Qce => {
            let best = Table::read(&dir.join("best_delay.csv"))?;
            let delays = manifest.config["section"]["delays"].as_array().map_or(0, Vec::len);
            for r in best.records() {
                let (fid, zero) = (field(&r, "fidelity"), field(&r, "fidelity_at_zero"));
                if zero.is_nan() || delays < 2 {
                    report.add(format!("qce encoder {}", r["encoder"]), !fid.is_nan(), format!("best fidelity {fid:.4}"));
                } else {
                    report.add(
                        format!("qce encoder {}", r["encoder"]),
                        r["best_delay"] != "0" && fid > zero,
                        format!("best delay {} fidelity {fid:.4} vs {zero:.4} at D = 0", r["best_delay"]),
                    );
                }
            }
            if let Some(rho) = manifest.statistics.get("spearman_i_enc_fidelity") {
                report.add("qce Spearman(I_enc, fidelity)", *rho > 0.0, format!("{rho:.3}, need > 0"));
            }
        }
        Task::QceTdm => {
            let land = Table::read(&dir.join("landscape.csv"))?;
            let recs = land.records();
            let negative = recs.iter().filter(|r| !(field(r, "cost") >= 0.0)).count();
            report.add("qce-tdm costs", negative == 0, format!("{negative} negative or missing costs"));
            let mut worst: f64 = 0.0;
            let mut compared = 0;
            for u in recs.iter().filter(|r| r["policy"] == "unrestricted" && field(r, "phi_enc") == 0.0 && field(r, "phi_dec") == 0.0) {
                if let Some(r) = recs.iter().find(|r| {
                    r["policy"] == "restricted" && r["column"] == u["column"] && r["theta_dec"] == u["theta_dec"] && r["phi_dec"] == u["phi_dec"]
                }) {
                    worst = worst.max((field(u, "cost") - field(r, "cost")).abs());
                    compared += 1;
                }
            }
            if compared > 0 {
                report.add("qce-tdm φ = 0 slice", worst <= 1e-9, format!("max policy difference {worst:.2e} over {compared} points"));
            }
        }
    }
    Ok(())
}
