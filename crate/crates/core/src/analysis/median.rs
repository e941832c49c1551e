use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_triplet_from, Aggregation, PairwiseMoments};
use crate::ising::IsingModel;
use crate::seeds::{derive_rng, tag};

/// Monte-Carlo estimate of the worst per-source MSE of median aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianMse {
    /// `max_i E[(a~_i^M - a_i)^2]`.
    pub rho: f64,
    pub mse: Vec<f64>,
    /// `None` for population moments.
    #[serde(rename = "n_U")]
    pub n_u: Option<u64>,
    pub trials: usize,
    pub failures: usize,
    /// Whether `m > 5` and `d < (m-1)(m-2)/4` hold.
    pub applicable: bool,
    pub c_rho: f64,
    /// `c_rho m rho + B_I`.
    #[serde(rename = "R_M")]
    pub bound: f64,
}

/// Conditions under which median aggregation is unaffected by misspecification.
pub fn median_conditions_hold(m: usize, d: usize) -> bool {
    m > 5 && 4 * d < (m - 1) * (m - 2)
}

/// `n_u = None` evaluates the population moments once.
pub fn median_mse(model: &IsingModel, n_u: Option<u64>, trials: usize, seed: u64) -> Result<MedianMse> {
    let diag = model.diagnostics();
    let m = model.m();
    let a_max = diag.max_accuracy();
    let c_rho = 1.0 / (2.0 * (1.0 - a_max * a_max));
    let per_trial = |mom: &PairwiseMoments, t: u64| -> Option<Vec<f64>> {
        let mut rng = derive_rng(seed, &[tag("median-mse"), t]);
        estimate_triplet_from(mom, Aggregation::Median, &mut rng, &[])
            .ok()
            .map(|e| e.a_hat.iter().zip(&diag.a).map(|(x, a)| (x - a).powi(2)).collect())
    };
    let results: Vec<Option<Vec<f64>>> = match n_u {
        None => vec![per_trial(&PairwiseMoments::population(model), 0)],
        Some(n) => {
            if trials < 30 {
                return Err(Error::InvalidInput(format!(
                    "median MSE needs at least 30 trials, got {trials}"
                )));
            }
            (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = derive_rng(seed, &[tag("median-mse-sample"), n, t]);
                    let counts = model.sample_counts(n as usize, &mut rng).ok()?;
                    per_trial(&PairwiseMoments::from_counts(&counts).ok()?, t)
                })
                .collect()
        }
    };
    let ok: Vec<&Vec<f64>> = results.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Estimation("every median-MSE trial failed".into()));
    }
    let mut mse = vec![0.0; m];
    for r in &ok {
        for (acc, v) in mse.iter_mut().zip(r.iter()) {
            *acc += v;
        }
    }
    mse.iter_mut().for_each(|v| *v /= ok.len() as f64);
    let rho = mse.iter().cloned().fold(0.0, f64::max);
    Ok(MedianMse {
        rho,
        mse,
        n_u,
        trials: results.len(),
        failures: results.len() - ok.len(),
        applicable: median_conditions_hold(m, diag.d()),
        c_rho,
        bound: c_rho * m as f64 * rho + diag.b_i,
    })
}
