#[path = "support/fock.rs"]
mod fock;

use fock::{OracleSample, TOL};

#[test]
fn gaussian_formulas_agree_with_fock_oracle() {
    let set = fock::oracle_samples(16, 7);
    use rayon::prelude::*;
    let reports: Vec<_> = (0..set.len())
        .into_par_iter()
        .map(|i| set[i].compare(&set[(i + 2) % set.len()]))
        .collect();
    let mut entangled = 0;
    for (i, report) in reports.iter().enumerate() {
        assert!(report.worst() < TOL, "sample {i}: {report:?}");
        if report.log_negativity.map_or(false, |(_, f)| f > 0.01) {
            entangled += 1;
        }
    }
    assert!(entangled >= 3, "only {entangled} entangled samples");
}

#[test]
fn oracle_detects_a_wrong_covariance() {
    let set = fock::oracle_samples(2, 3);
    let OracleSample { rho, state, modes, cutoff } = &set[0];
    let mut cov = state.cov().clone();
    cov[(0, 0)] += 0.05;
    let skewed = qornn::GaussianState::new(state.mean().clone(), cov).unwrap();
    let n_fock = fock::photon_number(rho, *modes, *cutoff);
    assert!((skewed.mean_photon_number() - n_fock).abs() > 0.01);
}
