//! Monte-Carlo harness: excess-error curves, data value ratios and
//! labelled/unlabelled combination sweeps over an exactly known model.
//!
//! Fitted models are scored in empirical-denominator mode with `P^r` set to
//! the true configuration marginal, so the observable-noise term vanishes and
//! the excess is exactly `B_I` plus the parameter-estimation error.
//!
//! Every trial draws its sample from a stream derived from the root seed and
//! `(kind, n, trial)`, so results are identical for any worker count. Labelled
//! and unlabelled samples use separate streams; all unlabelled estimators at
//! a given `n` see the same samples.

mod config;
mod output;

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    canonical_hash, canonical_json, dvr_grid, f1_target, sha256_hex, AlphaMode, CombinedSpec,
    DvrSpec, Estimator, ExperimentConfig, ModelSpec, DEFAULT_SEED, F1_ACCURACIES, F1_EPS,
};
pub use output::{ExperimentManifest, ExperimentOutputs};

pub use crate::analysis::{approx_data_value_ratio, Setting};

use crate::analysis::conditional_entropy;
use crate::data::StateCounts;
use crate::error::{Error, Result};
use crate::estimators::{
    combine_green_strawderman, combine_linear, estimate_labeled_from, estimate_triplet_from,
    AccuracyEstimate, LabeledMoments, PairwiseMoments,
};
use crate::ising::{IsingModel, ModelDiagnostics};
use crate::label_model::{ConfigDistribution, LabelModel};
use crate::seeds::{derive_rng, tag};

/// Steps of the combination-weight scan.
pub const ALPHA_STEPS: usize = 100;

/// Mean of per-trial values with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub failures: usize,
}

impl Summary {
    /// Summarises in trial order; `None` entries count as failures.
    pub fn from_trials(values: &[Option<f64>]) -> Self {
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        let k = ok.len();
        let failures = values.len() - k;
        if k == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                trials: 0,
                failures,
            };
        }
        let mean = ok.iter().sum::<f64>() / k as f64;
        let stderr = if k > 1 {
            let var = ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            trials: k,
            failures,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessPoint {
    pub estimator: Estimator,
    pub n: u64,
    #[serde(flatten)]
    pub summary: Summary,
}

/// How `V` relates to the true data value ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DvrBound {
    /// The qualifying `n_L` is an interior grid point.
    Exact,
    /// The first grid point already qualifies, so `V >= n_U / grid[0]`.
    AtLeast,
    /// No grid point qualifies, so `V < n_U / grid[last]`; `f_n_u` is the last point.
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvrStep {
    pub n_l: u64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvrResult {
    pub estimator: Estimator,
    #[serde(rename = "n_U")]
    pub n_u: u64,
    /// Unlabelled expected excess at `n_U`.
    pub target: Summary,
    /// Least qualifying `n_L` on the grid.
    #[serde(rename = "f_n_U")]
    pub f_n_u: u64,
    #[serde(rename = "V")]
    pub v: f64,
    pub bound: DvrBound,
    /// Every grid point evaluated, in scan order.
    pub trace: Vec<DvrStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRow {
    pub estimator: String,
    #[serde(rename = "n_L")]
    pub n_l: u64,
    #[serde(rename = "n_U")]
    pub n_u: u64,
    #[serde(flatten)]
    pub summary: Summary,
    /// Fixed or selected weight; the trial mean for Green-Strawderman.
    pub alpha: Option<f64>,
}

/// A model plus everything needed to score fitted label models against it.
pub struct Experiment {
    config: ExperimentConfig,
    model: IsingModel,
    diagnostics: ModelDiagnostics,
    h_cond: f64,
    marginal: ConfigDistribution,
    labeled_cache: Mutex<HashMap<u64, Summary>>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model.build()?;
        Self::with_model(config, model)
    }

    /// Uses `model` in place of building `config.model`.
    pub fn with_model(config: ExperimentConfig, model: IsingModel) -> Result<Self> {
        let diagnostics = model.diagnostics();
        let h_cond = conditional_entropy(&model);
        let marginal = ConfigDistribution::from_probabilities(model.m(), model.lambda_marginal())?;
        Ok(Self {
            config,
            model,
            diagnostics,
            h_cond,
            marginal,
            labeled_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn model(&self) -> &IsingModel {
        &self.model
    }

    pub fn diagnostics(&self) -> &ModelDiagnostics {
        &self.diagnostics
    }

    /// The sample a given trial sees.
    pub fn sample(&self, labeled: bool, n: u64, trial: usize) -> Result<StateCounts> {
        let kind = tag(if labeled { "labeled" } else { "unlabeled" });
        let mut rng = derive_rng(self.config.seed, &[kind, n, trial as u64]);
        self.model.sample_counts(n as usize, &mut rng)
    }

    /// Accuracy estimate of one trial.
    pub fn fit(&self, estimator: Estimator, n: u64, trial: usize) -> Result<AccuracyEstimate> {
        let counts = self.sample(estimator.is_labeled(), n, trial)?;
        match estimator.aggregation() {
            None => Ok(estimate_labeled_from(&LabeledMoments::from_counts(&counts)?)),
            Some(agg) => {
                let moments = PairwiseMoments::from_counts(&counts)?;
                let mut rng = derive_rng(self.config.seed, &[tag("select"), n, trial as u64]);
                estimate_triplet_from(&moments, agg, &mut rng, &[])
            }
        }
    }

    /// Label model of an estimate: true class balance, true `P^r`.
    pub fn label_model(&self, a: &AccuracyEstimate) -> Result<LabelModel> {
        LabelModel::from_accuracies(a, self.model.class_balance())?.with_empirical(self.marginal.clone())
    }

    /// Exact expected loss of [`Self::label_model`] minus `H(Y | lambda)`.
    pub fn excess(&self, a: &AccuracyEstimate) -> Result<f64> {
        let lm = self.label_model(a)?;
        let half = self.model.num_configs();
        let joint = self.model.joint();
        let mut loss = 0.0;
        for c in 0..half {
            let (pn, pp) = (joint[c], joint[c | half]);
            if pn + pp == 0.0 {
                continue;
            }
            let post = lm.posterior_pair(c as u64)?;
            loss += pn * lm.pointwise_loss(post, -1.0) + pp * lm.pointwise_loss(post, 1.0);
        }
        Ok(loss - self.h_cond)
    }

    fn trial_excess(&self, estimator: Estimator, n: u64, trial: usize) -> Option<f64> {
        self.fit(estimator, n, trial)
            .and_then(|a| self.excess(&a))
            .ok()
            .filter(|v| v.is_finite())
    }

    /// Per-trial excess errors, in trial order; failures are `None`.
    pub fn excess_trials(&self, estimator: Estimator, n: u64) -> Vec<Option<f64>> {
        (0..self.config.trials)
            .into_par_iter()
            .map(|t| self.trial_excess(estimator, n, t))
            .collect()
    }

    /// Mean excess over trials with its standard error.
    pub fn expected_excess_error(&self, estimator: Estimator, n: u64) -> Result<ExcessPoint> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        let summary = if estimator.is_labeled() {
            self.labeled_summary(n)
        } else {
            Summary::from_trials(&self.excess_trials(estimator, n))
        };
        Ok(ExcessPoint {
            estimator,
            n,
            summary,
        })
    }

    fn labeled_summary(&self, n: u64) -> Summary {
        if let Some(s) = self.labeled_cache.lock().expect("cache lock").get(&n) {
            return *s;
        }
        let s = Summary::from_trials(&self.excess_trials(Estimator::Labeled, n));
        self.labeled_cache.lock().expect("cache lock").insert(n, s);
        s
    }

    /// Every roster estimator at every grid size.
    pub fn curves(&self) -> Result<Vec<ExcessPoint>> {
        let mut out = Vec::new();
        for &est in &self.config.estimators {
            for &n in &self.config.n_grid {
                out.push(self.expected_excess_error(est, n)?);
            }
        }
        Ok(out)
    }

    /// Least `n_L` on `grid` whose labelled expected excess is at most the
    /// unlabelled one at `n_u`. The grid is scanned upwards and stops at the
    /// first qualifying point, so every earlier point in the trace fails.
    pub fn data_value_ratio(&self, n_u: u64, unlabeled: Estimator, grid: &[u64]) -> Result<DvrResult> {
        if unlabeled.is_labeled() {
            return Err(Error::InvalidInput("data value ratio needs an unlabelled estimator".into()));
        }
        if grid.is_empty() {
            return Err(Error::InvalidInput("empty n_L grid".into()));
        }
        let target = self.expected_excess_error(unlabeled, n_u)?.summary;
        if target.trials == 0 {
            return Err(Error::Estimation(format!(
                "every {unlabeled} trial failed at n_U = {n_u}"
            )));
        }
        let mut trace = Vec::new();
        for (idx, &n_l) in grid.iter().enumerate() {
            let s = self.labeled_summary(n_l);
            trace.push(DvrStep {
                n_l,
                mean: s.mean,
                stderr: s.stderr,
            });
            if s.trials > 0 && s.mean <= target.mean {
                return Ok(DvrResult {
                    estimator: unlabeled,
                    n_u,
                    target,
                    f_n_u: n_l,
                    v: n_u as f64 / n_l as f64,
                    bound: if idx == 0 { DvrBound::AtLeast } else { DvrBound::Exact },
                    trace,
                });
            }
        }
        let last = *grid.last().expect("nonempty grid");
        Ok(DvrResult {
            estimator: unlabeled,
            n_u,
            target,
            f_n_u: last,
            v: n_u as f64 / last as f64,
            bound: DvrBound::AtMost,
            trace,
        })
    }

    /// Runs the configured data value ratio study, if any.
    pub fn dvr(&self) -> Result<Vec<DvrResult>> {
        let Some(spec) = &self.config.dvr else {
            return Ok(Vec::new());
        };
        let n_u = if spec.n_u.is_empty() { &self.config.n_grid } else { &spec.n_u };
        let default_grid;
        let grid = if spec.grid.is_empty() {
            default_grid = dvr_grid();
            &default_grid
        } else {
            &spec.grid
        };
        let mut out = Vec::new();
        for &est in &spec.unlabeled {
            for &n in n_u {
                out.push(self.data_value_ratio(n, est, grid)?);
            }
        }
        Ok(out)
    }

    /// Labelled-only, unlabelled-only and combined excess at each `n_L`,
    /// with `n_U` fixed.
    pub fn combined_sweep(&self, spec: &CombinedSpec) -> Result<Vec<CombinedRow>> {
        let trials = self.config.trials;
        let unl: Vec<Option<AccuracyEstimate>> = (0..trials)
            .into_par_iter()
            .map(|t| self.fit(spec.unlabeled, spec.n_u, t).ok())
            .collect();
        let unl_excess: Vec<Option<f64>> = unl
            .par_iter()
            .map(|a| a.as_ref().and_then(|a| self.excess(a).ok()))
            .collect();
        let unl_summary = Summary::from_trials(&unl_excess);
        let mut rows = Vec::new();
        for &n_l in &spec.n_l {
            let row = |estimator: String, summary: Summary, alpha: Option<f64>| CombinedRow {
                estimator,
                n_l,
                n_u: spec.n_u,
                summary,
                alpha,
            };
            let lab: Vec<Option<LabeledMoments>> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    self.sample(true, n_l, t)
                        .and_then(|c| LabeledMoments::from_counts(&c))
                        .ok()
                })
                .collect();
            rows.push(row(Estimator::Labeled.to_string(), self.labeled_summary(n_l), None));
            rows.push(row(spec.unlabeled.to_string(), unl_summary, None));
            for mode in &spec.modes {
                match *mode {
                    AlphaMode::Fixed { alpha } => {
                        let vals = self.combined_trials(&unl, &lab, |u, l| {
                            combine_linear(u, &estimate_labeled_from(l), alpha)
                        });
                        let s = Summary::from_trials(&vals.iter().map(|v| v.map(|x| x.0)).collect::<Vec<_>>());
                        rows.push(row(mode.name().into(), s, Some(alpha)));
                    }
                    AlphaMode::GreenStrawderman { radius } => {
                        let vals = self.combined_trials(&unl, &lab, |u, l| combine_green_strawderman(u, l, radius));
                        let s = Summary::from_trials(&vals.iter().map(|v| v.map(|x| x.0)).collect::<Vec<_>>());
                        let alphas: Vec<f64> = vals.iter().flatten().map(|x| x.1).collect();
                        let mean_alpha = (!alphas.is_empty()).then(|| alphas.iter().sum::<f64>() / alphas.len() as f64);
                        rows.push(row(mode.name().into(), s, mean_alpha));
                    }
                    AlphaMode::GridOptimal => {
                        let (alpha, s) = self.grid_optimal(&unl, &lab)?;
                        rows.push(row(mode.name().into(), s, Some(alpha)));
                    }
                }
            }
        }
        Ok(rows)
    }

    fn combined_trials<F>(
        &self,
        unl: &[Option<AccuracyEstimate>],
        lab: &[Option<LabeledMoments>],
        combine: F,
    ) -> Vec<Option<(f64, f64)>>
    where
        F: Fn(&AccuracyEstimate, &LabeledMoments) -> Result<AccuracyEstimate> + Sync,
    {
        unl.par_iter()
            .zip(lab.par_iter())
            .map(|(u, l)| {
                let (u, l) = (u.as_ref()?, l.as_ref()?);
                let c = combine(u, l).ok()?;
                let e = self.excess(&c).ok().filter(|v| v.is_finite())?;
                Some((e, c.alpha.unwrap_or(f64::NAN)))
            })
            .collect()
    }

    /// Weight minimising the trial-averaged excess over the 0.01 grid, and
    /// the excess summary at that weight. Ties go to the smaller weight.
    fn grid_optimal(
        &self,
        unl: &[Option<AccuracyEstimate>],
        lab: &[Option<LabeledMoments>],
    ) -> Result<(f64, Summary)> {
        let per_trial: Vec<Option<Vec<f64>>> = unl
            .par_iter()
            .zip(lab.par_iter())
            .map(|(u, l)| {
                let (u, l) = (u.as_ref()?, l.as_ref()?);
                let a_l = estimate_labeled_from(l);
                (0..=ALPHA_STEPS)
                    .map(|k| {
                        let c = combine_linear(u, &a_l, k as f64 / ALPHA_STEPS as f64).ok()?;
                        self.excess(&c).ok().filter(|v| v.is_finite())
                    })
                    .collect()
            })
            .collect();
        let ok: Vec<&Vec<f64>> = per_trial.iter().flatten().collect();
        if ok.is_empty() {
            return Err(Error::Estimation("every combined trial failed".into()));
        }
        let mut best = (0, f64::INFINITY);
        for k in 0..=ALPHA_STEPS {
            let mean = ok.iter().map(|v| v[k]).sum::<f64>() / ok.len() as f64;
            if mean < best.1 {
                best = (k, mean);
            }
        }
        let at_best: Vec<Option<f64>> = per_trial.iter().map(|v| v.as_ref().map(|v| v[best.0])).collect();
        Ok((best.0 as f64 / ALPHA_STEPS as f64, Summary::from_trials(&at_best)))
    }

    /// Runs every configured study.
    pub fn run(&self) -> Result<ExperimentOutputs> {
        let curves = self.curves()?;
        let dvr = self.dvr()?;
        let combined = match &self.config.combined {
            Some(spec) => self.combined_sweep(spec)?,
            None => Vec::new(),
        };
        ExperimentOutputs::new(self, curves, dvr, combined)
    }
}
