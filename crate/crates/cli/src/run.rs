//! Task sweeps. Grid points run on the worker pool; rows are merged in grid order.

use anyhow::Result;
use qornn::channel::{optimize_superadditive, GaussMarkovEnv, SuperadditiveOptions};
use qornn::optim::{best_of_ensemble, run_ensemble, RunRecord, TrainPlan};
use qornn::tasks::entangler::{train_entangler_member, EntanglerSpec};
use qornn::tasks::qce::{spearman, train_qce_member, QceSpec};
use qornn::tasks::stqm::{train_stqm_member, StqmSpec, TestSet};
use qornn::tdm::{decoder_landscape, linspace, map_qce_to_loops, TdmConfig, TdmPoint};
use qornn::SymplecticCircuit;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ExperimentConfig, Task};
use crate::output::{matrix_rows, num, Artifacts, Table};

pub fn run(task: Task, cfg: &ExperimentConfig) -> Result<Artifacts> {
    cfg.validate(task)?;
    let hash = cfg.hash(task);
    Ok(match task {
        Task::Stqm => stqm(cfg, &hash),
        Task::Entangler => entangler(cfg, &hash),
        Task::Superadditivity => superadditivity(cfg, &hash),
        Task::Qce => qce(cfg, &hash),
        Task::QceTdm => qce_tdm(cfg, &hash)?,
    })
}

/// Stored circuit: gate list plus the matrix it produced.
pub fn circuit_artifact(c: &SymplecticCircuit) -> serde_json::Value {
    json!({ "circuit": c, "matrix": matrix_rows(&c.matrix()) })
}

fn status(r: &qornn::Result<RunRecord>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("failed: {e}"),
    }
}

fn metric(r: &qornn::Result<RunRecord>, key: &str) -> String {
    num(r.as_ref().ok().and_then(|r| r.metrics.get(key).copied()).unwrap_or(f64::NAN))
}

fn updates_run(r: &qornn::Result<RunRecord>) -> String {
    r.as_ref().map_or(String::new(), |r| r.trace.len().saturating_sub(1).to_string())
}

/// Members of one grid point and the best of them, if any succeeded.
struct PointRun {
    members: Vec<(u64, qornn::Result<RunRecord>)>,
    best: Option<RunRecord>,
}

fn ensemble<F>(plan: &TrainPlan, member: F) -> PointRun
where
    F: Fn(u64) -> qornn::Result<RunRecord> + Sync,
{
    let members = run_ensemble(plan, member);
    let ok: Vec<RunRecord> = members.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();
    let best = best_of_ensemble(&ok).ok().cloned();
    PointRun { members, best }
}

fn with_params(mut c: SymplecticCircuit, params: &[f64]) -> SymplecticCircuit {
    c.set_params(params).expect("stored parameters match the circuit");
    c
}

fn stqm(cfg: &ExperimentConfig, hash: &str) -> Artifacts {
    let c = &cfg.stqm;
    let plan = c.plan.to_plan(cfg.seed, Task::Stqm);
    let test = TestSet { size: c.test_size, seed: c.test_seed };
    let points: Vec<(usize, usize)> = c.m_io.iter().flat_map(|&io| c.m_mem.iter().map(move |&mem| (io, mem))).collect();
    let runs: Vec<PointRun> = points
        .par_iter()
        .map(|&(io, mem)| {
            let spec = StqmSpec::new(io, mem, c.delay);
            ensemble(&plan, |seed| train_stqm_member(&spec, &plan, seed, test).map(|(r, _)| r))
        })
        .collect();
    let cols = ["m_io", "m_mem", "delay", "seed", "fidelity", "cost", "updates_run", "status", "config_hash"];
    let mut members = Table::new(&cols);
    let mut summary = Table::new(&cols);
    let mut out = Artifacts::default();
    for (&(io, mem), run) in points.iter().zip(&runs) {
        let key = |seed: String, r: &qornn::Result<RunRecord>| {
            vec![io.to_string(), mem.to_string(), c.delay.to_string(), seed, metric(r, "fidelity"), metric(r, "cost"), updates_run(r), status(r), hash.to_string()]
        };
        for (seed, r) in &run.members {
            members.push(key(seed.to_string(), r));
        }
        match &run.best {
            Some(best) => {
                summary.push(key(best.seed.to_string(), &Ok(best.clone())));
                let circuit = with_params(SymplecticCircuit::random_orthogonal(io + mem, best.seed), &best.params);
                out.json(format!("circuits/stqm_io{io}_mem{mem}.json"), circuit_artifact(&circuit));
            }
            None => {
                out.failures += 1;
                summary.push(key(String::new(), &Err(qornn::Error::Empty("every ensemble member failed"))));
            }
        }
    }
    out.table("members", members);
    out.table("summary", summary);
    out
}

fn entangler(cfg: &ExperimentConfig, hash: &str) -> Artifacts {
    let c = &cfg.entangler;
    let plan = c.plan.to_plan(cfg.seed, Task::Entangler);
    let points: Vec<(usize, usize)> = c.m_mem.iter().flat_map(|&m| c.gap.iter().map(move |&g| (m, g))).collect();
    let spec_of = |m: usize, g: usize| EntanglerSpec {
        warmup: c.warmup,
        init_max_r: c.init_max_r,
        ..EntanglerSpec::new(m, g)
    };
    let runs: Vec<PointRun> = points
        .par_iter()
        .map(|&(m, g)| {
            let spec = spec_of(m, g);
            ensemble(&plan, |seed| train_entangler_member(&spec, &plan, seed).map(|(r, _)| r))
        })
        .collect();
    let cols = ["m_mem", "gap", "seed", "log_negativity", "transient_settled", "updates_run", "status", "config_hash"];
    let mut members = Table::new(&cols);
    let mut summary = Table::new(&cols);
    let mut out = Artifacts::default();
    for (&(m, g), run) in points.iter().zip(&runs) {
        let key = |seed: String, r: &qornn::Result<RunRecord>| {
            vec![m.to_string(), g.to_string(), seed, metric(r, "log_negativity"), metric(r, "transient_settled"), updates_run(r), status(r), hash.to_string()]
        };
        for (seed, r) in &run.members {
            members.push(key(seed.to_string(), r));
        }
        match &run.best {
            Some(best) => {
                summary.push(key(best.seed.to_string(), &Ok(best.clone())));
                let start = SymplecticCircuit::random_symplectic(1 + m, best.seed, c.init_max_r);
                out.json(format!("circuits/entangler_mem{m}_gap{g}.json"), circuit_artifact(&with_params(start, &best.params)));
            }
            None => {
                out.failures += 1;
                summary.push(key(String::new(), &Err(qornn::Error::Empty("every ensemble member failed"))));
            }
        }
    }
    out.table("members", members);
    out.table("summary", summary);
    out
}

fn superadditivity(cfg: &ExperimentConfig, hash: &str) -> Artifacts {
    let c = &cfg.superadditivity;
    let plan = c.plan.to_plan(cfg.seed, Task::Superadditivity);
    let opts = SuperadditiveOptions {
        warmup: c.warmup,
        init_max_r: c.init_max_r,
        ..SuperadditiveOptions::default()
    };
    let points: Vec<(f64, f64)> = c.phi.iter().flat_map(|&p| c.n_bar.iter().map(move |&n| (p, n))).collect();
    let results: Vec<_> = points
        .par_iter()
        .map(|&(phi, n_bar)| {
            GaussMarkovEnv::new(n_bar / c.snr, phi, c.uses).and_then(|env| optimize_superadditive(&env, n_bar, &plan, &opts))
        })
        .collect();
    let mut members = Table::new(&["phi", "n_bar", "member", "rate", "status", "config_hash"]);
    let mut summary = Table::new(&["phi", "n_bar", "uses", "gain", "rate", "baseline_rate", "best_member", "status", "config_hash"]);
    let mut out = Artifacts::default();
    let labels: Vec<String> = std::iter::once("vacuum".to_string())
        .filter(|_| opts.include_vacuum_start)
        .chain(plan.seeds().iter().map(u64::to_string))
        .collect();
    for (idx, (&(phi, n_bar), res)) in points.iter().zip(&results).enumerate() {
        match res {
            Ok(r) => {
                for (label, rate) in labels.iter().zip(&r.member_rates) {
                    let st = if rate.is_finite() { "ok" } else { "failed" };
                    members.push(vec![num(phi), num(n_bar), label.clone(), num(*rate), st.into(), hash.into()]);
                }
                let best = r.seed.map_or("vacuum".to_string(), |s| s.to_string());
                summary.push(vec![num(phi), num(n_bar), c.uses.to_string(), num(r.gain), num(r.rate), num(r.baseline_rate), best, "ok".into(), hash.into()]);
                out.json(format!("circuits/superadditivity_{idx}.json"), circuit_artifact(&r.circuit));
                out.json(
                    format!("covariances/superadditivity_{idx}.json"),
                    json!({ "phi": phi, "n_bar": n_bar, "gamma_in": matrix_rows(&r.gamma_in), "gamma_mod": matrix_rows(&r.gamma_mod) }),
                );
            }
            Err(e) => {
                out.failures += 1;
                let nan = num(f64::NAN);
                summary.push(vec![num(phi), num(n_bar), c.uses.to_string(), nan.clone(), nan.clone(), nan, String::new(), format!("failed: {e}"), hash.into()]);
            }
        }
    }
    out.table("members", members);
    out.table("summary", summary);
    out
}

fn qce(cfg: &ExperimentConfig, hash: &str) -> Artifacts {
    let c = &cfg.qce;
    let plan = c.plan.to_plan(cfg.seed, Task::Qce);
    let points: Vec<(u64, usize)> = c.encoders.iter().flat_map(|&e| c.delays.iter().map(move |&d| (e, d))).collect();
    let runs: Vec<PointRun> = points
        .par_iter()
        .map(|&(enc, d)| {
            let spec = QceSpec::new(c.m_mem_enc, c.m_mem_dec, d, enc);
            ensemble(&plan, |seed| train_qce_member(&spec, &plan, seed).map(|(r, _)| r))
        })
        .collect();
    let cols = ["encoder", "delay", "seed", "fidelity", "train_fidelity", "i_enc", "updates_run", "status", "config_hash"];
    let mut members = Table::new(&cols);
    let mut summary = Table::new(&cols);
    let mut out = Artifacts::default();
    for (&(enc, d), run) in points.iter().zip(&runs) {
        let key = |seed: String, r: &qornn::Result<RunRecord>| {
            vec![enc.to_string(), d.to_string(), seed, metric(r, "fidelity"), metric(r, "train_fidelity"), metric(r, "i_enc"), updates_run(r), status(r), hash.to_string()]
        };
        for (seed, r) in &run.members {
            members.push(key(seed.to_string(), r));
        }
        match &run.best {
            Some(best) => summary.push(key(best.seed.to_string(), &Ok(best.clone()))),
            None => {
                out.failures += 1;
                summary.push(key(String::new(), &Err(qornn::Error::Empty("every ensemble member failed"))));
            }
        }
    }
    // Best delay per encoder, compared with the decoder forced to D = 0.
    let mut best_delay = Table::new(&["encoder", "best_delay", "fidelity", "i_enc", "fidelity_at_zero", "seed", "config_hash"]);
    let (mut iencs, mut fids) = (Vec::new(), Vec::new());
    for &enc in &c.encoders {
        let of_enc: Vec<(usize, &RunRecord)> = points
            .iter()
            .zip(&runs)
            .filter(|((e, _), _)| *e == enc)
            .filter_map(|((_, d), r)| r.best.as_ref().map(|b| (*d, b)))
            .collect();
        let at_zero = of_enc.iter().find(|(d, _)| *d == 0).map_or(f64::NAN, |(_, r)| r.metrics["fidelity"]);
        let Some(&(d, best)) = of_enc
            .iter()
            .max_by(|a, b| a.1.metrics["fidelity"].total_cmp(&b.1.metrics["fidelity"]).then(b.0.cmp(&a.0)))
        else {
            continue;
        };
        let (fid, ienc) = (best.metrics["fidelity"], best.metrics["i_enc"]);
        iencs.push(ienc);
        fids.push(fid);
        best_delay.push(vec![enc.to_string(), d.to_string(), num(fid), num(ienc), num(at_zero), best.seed.to_string(), hash.into()]);
        let spec = QceSpec::new(c.m_mem_enc, c.m_mem_dec, d, enc);
        let start = SymplecticCircuit::random_orthogonal(1 + spec.m_mem_dec, best.seed);
        out.json(format!("circuits/qce_enc{enc}_delay{d}.json"), circuit_artifact(&with_params(start, &best.params)));
    }
    if let Ok(rho) = spearman(&iencs, &fids) {
        out.statistics.insert("spearman_i_enc_fidelity".into(), rho);
    }
    out.table("members", members);
    out.table("summary", summary);
    out.table("best_delay", best_delay);
    out
}

fn qce_tdm(cfg: &ExperimentConfig, hash: &str) -> Result<Artifacts> {
    let c = &cfg.qce_tdm;
    let tdm = TdmConfig {
        delay: c.delay,
        runs: c.runs,
        seed: cfg.seed,
        hardware: c.hardware.clone(),
    };
    let theta = linspace(0.0, std::f64::consts::FRAC_PI_2, c.theta_points);
    let phi = linspace(0.0, 2.0 * std::f64::consts::PI, c.phi_points);
    let mut landscape = Table::new(&["column", "theta_enc", "phi_enc", "theta_dec", "phi_dec", "policy", "cost", "seed", "config_hash"]);
    let mut summary = Table::new(&["column", "theta_enc", "phi_enc", "policy", "best_theta_dec", "best_phi_dec", "min_cost", "max_cost", "seed", "config_hash"]);
    let mut out = Artifacts::default();
    for (col, &[te, pe]) in c.encoders.iter().enumerate() {
        for &policy in &c.policies {
            let points: Vec<TdmPoint> = decoder_landscape(te, pe, &theta, &phi, policy, &tdm)?;
            let policy_name = serde_json::to_value(policy)?.as_str().unwrap_or_default().to_string();
            for p in &points {
                landscape.push(vec![
                    col.to_string(),
                    num(p.theta_enc),
                    num(p.phi_enc),
                    num(p.theta_dec),
                    num(p.phi_dec),
                    policy_name.clone(),
                    num(p.cost),
                    cfg.seed.to_string(),
                    hash.into(),
                ]);
            }
            let best = points.iter().min_by(|a, b| a.cost.total_cmp(&b.cost)).expect("non-empty grid");
            let worst = points.iter().map(|p| p.cost).fold(f64::MIN, f64::max);
            summary.push(vec![
                col.to_string(),
                num(te),
                num(pe),
                policy_name.clone(),
                num(best.theta_dec),
                num(best.phi_dec),
                num(best.cost),
                num(worst),
                cfg.seed.to_string(),
                hash.into(),
            ]);
            let program = map_qce_to_loops(te, pe, best.theta_dec, best.phi_dec, c.hardware.offsets, policy);
            out.json(format!("programs/column{col}_{policy_name}.json"), serde_json::to_value(&program)?);
        }
    }
    out.table("landscape", landscape);
    out.table("summary", summary);
    Ok(out)
}
