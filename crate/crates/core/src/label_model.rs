//! Naive-Bayes inference over source votes.
//!
//! The posterior is `prod_i P(lambda_i | y) * Pr(y)` divided either by the
//! empirical probability of the observed configuration (`Empirical`, the
//! literal product-form estimate, which need not be a probability) or by the
//! sum of both numerators (`Normalized`).

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{config_of, SourceMatrix, StateCounts};
use crate::error::{Error, Result};
use crate::estimators::{AccuracyEstimate, ClassConditionalEstimate};
use crate::ising::MAX_SOURCES;

/// Clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;
/// Accuracies are kept inside `[-1 + ACC_CLAMP, 1 - ACC_CLAMP]`.
pub const ACC_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Smoothing {
    #[default]
    None,
    Laplace { kappa: f64 },
}

impl std::str::FromStr for Smoothing {
    type Err = String;

    /// `none`, `laplace` (kappa = 1) or `laplace:<kappa>`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Smoothing::None),
            "laplace" => Ok(Smoothing::Laplace { kappa: 1.0 }),
            _ => match s.strip_prefix("laplace:").map(str::parse::<f64>) {
                Some(Ok(kappa)) if kappa > 0.0 => Ok(Smoothing::Laplace { kappa }),
                _ => Err(format!("unknown smoothing {s:?} (none|laplace|laplace:<kappa>)")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMode {
    Empirical,
    #[default]
    Normalized,
}

impl std::str::FromStr for InferenceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "empirical" => Ok(Self::Empirical),
            "normalized" => Ok(Self::Normalized),
            other => Err(format!("unknown inference mode {other:?} (empirical|normalized)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Table {
    Dense(Vec<f64>),
    Sparse(HashMap<u64, f64>),
}

/// Distribution over source configurations, `P^r(lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDistribution {
    m: usize,
    smoothing: Smoothing,
    table: Table,
}

impl ConfigDistribution {
    fn from_config_counts(m: usize, n: u64, counts: Vec<u64>, smoothing: Smoothing) -> Self {
        let table = match smoothing {
            Smoothing::None => counts.iter().map(|&c| c as f64 / n as f64).collect(),
            Smoothing::Laplace { kappa } => {
                let denom = n as f64 + kappa * counts.len() as f64;
                counts.iter().map(|&c| (c as f64 + kappa) / denom).collect()
            }
        };
        Self {
            m,
            smoothing,
            table: Table::Dense(table),
        }
    }

    /// Explicit probabilities (for example a model's exact marginal).
    pub fn from_probabilities(m: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << m {
            return Err(Error::InvalidInput("probability table has the wrong length".into()));
        }
        Ok(Self {
            m,
            smoothing: Smoothing::None,
            table: Table::Dense(probs),
        })
    }

    pub fn from_counts(counts: &StateCounts, smoothing: Smoothing) -> Result<Self> {
        check_smoothing(smoothing)?;
        Ok(Self::from_config_counts(
            counts.m(),
            counts.n(),
            counts.config_counts(),
            smoothing,
        ))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn prob(&self, config: u64) -> f64 {
        match &self.table {
            Table::Dense(v) => v.get(config as usize).copied().unwrap_or(0.0),
            Table::Sparse(map) => map.get(&config).copied().unwrap_or(0.0),
        }
    }

    /// Dense table; `None` for sparse storage.
    pub fn dense(&self) -> Option<&[f64]> {
        match &self.table {
            Table::Dense(v) => Some(v),
            Table::Sparse(_) => None,
        }
    }

    pub fn has_full_support(&self) -> bool {
        match &self.table {
            Table::Dense(v) => v.iter().all(|&p| p > 0.0),
            Table::Sparse(map) => {
                self.m < 64 && map.values().filter(|&&p| p > 0.0).count() as u64 == 1u64 << self.m
            }
        }
    }
}

fn check_smoothing(smoothing: Smoothing) -> Result<()> {
    match smoothing {
        Smoothing::Laplace { kappa } if !(kappa > 0.0 && kappa.is_finite()) => Err(
            Error::InvalidInput(format!("Laplace pseudo-count must be positive, got {kappa}")),
        ),
        _ => Ok(()),
    }
}

/// Empirical configuration frequencies, optionally smoothed to full support.
pub fn fit_empirical_lambda(data: &SourceMatrix, smoothing: Smoothing) -> Result<ConfigDistribution> {
    check_smoothing(smoothing)?;
    let (n, m) = (data.n(), data.m());
    if n == 0 {
        return Err(Error::InvalidInput("no rows".into()));
    }
    if m <= MAX_SOURCES {
        let mut counts = vec![0u64; 1usize << m];
        for r in 0..n {
            counts[data.config_index(r) as usize] += 1;
        }
        return Ok(ConfigDistribution::from_config_counts(m, n as u64, counts, smoothing));
    }
    if smoothing != Smoothing::None {
        return Err(Error::Capacity {
            what: "m (full-support smoothing)",
            value: m,
            limit: MAX_SOURCES,
        });
    }
    let mut map: HashMap<u64, f64> = HashMap::new();
    for r in 0..n {
        *map.entry(data.config_index(r)).or_default() += 1.0;
    }
    map.values_mut().for_each(|v| *v /= n as f64);
    Ok(ConfigDistribution {
        m,
        smoothing,
        table: Table::Sparse(map),
    })
}

/// Fitted product-form label model.
#[derive(Debug, Clone)]
pub struct LabelModel {
    class_balance: f64,
    /// Per source, `Pr(lambda_i = +1 | Y = y)` indexed `[y = -1, y = +1]`.
    on: Vec<[f64; 2]>,
    mode: InferenceMode,
    lambda: Option<ConfigDistribution>,
}

impl LabelModel {
    /// Symmetric sources from accuracies `E[lambda_i Y]`.
    pub fn from_accuracies(estimate: &AccuracyEstimate, class_balance: f64) -> Result<Self> {
        check_balance(class_balance)?;
        let on = estimate
            .a_hat
            .iter()
            .map(|&a| {
                let a = a.clamp(-1.0 + ACC_CLAMP, 1.0 - ACC_CLAMP);
                [0.5 * (1.0 - a), 0.5 * (1.0 + a)]
            })
            .collect();
        Ok(Self {
            class_balance,
            on,
            mode: InferenceMode::Normalized,
            lambda: None,
        })
    }

    /// Class-conditional sources; probabilities are kept in the same open
    /// interval as symmetric ones.
    pub fn from_class_conditional(estimate: &ClassConditionalEstimate) -> Result<Self> {
        check_balance(estimate.class_balance)?;
        let lo = 0.5 * ACC_CLAMP;
        let on = estimate
            .pos_given_neg
            .iter()
            .zip(&estimate.pos_given_pos)
            .map(|(&n, &p)| [n.clamp(lo, 1.0 - lo), p.clamp(lo, 1.0 - lo)])
            .collect();
        Ok(Self {
            class_balance: estimate.class_balance,
            on,
            mode: InferenceMode::Normalized,
            lambda: None,
        })
    }

    /// Switch to empirical-denominator inference with `lambda` as `P^r`.
    pub fn with_empirical(mut self, lambda: ConfigDistribution) -> Result<Self> {
        if lambda.m() != self.m() {
            return Err(Error::InvalidInput(format!(
                "configuration distribution has m = {}, model has m = {}",
                lambda.m(),
                self.m()
            )));
        }
        self.mode = InferenceMode::Empirical;
        self.lambda = Some(lambda);
        Ok(self)
    }

    pub fn normalized(mut self) -> Self {
        self.mode = InferenceMode::Normalized;
        self
    }

    pub fn m(&self) -> usize {
        self.on.len()
    }

    pub fn mode(&self) -> InferenceMode {
        self.mode
    }

    pub fn class_balance(&self) -> f64 {
        self.class_balance
    }

    pub fn lambda(&self) -> Option<&ConfigDistribution> {
        self.lambda.as_ref()
    }

    /// `P~(lambda_i = vote | Y = y)` as used by inference.
    pub fn conditional(&self, i: usize, vote: f64, y: f64) -> f64 {
        let on = self.on[i][usize::from(y > 0.0)];
        if vote > 0.0 {
            on
        } else {
            1.0 - on
        }
    }

    /// Implied accuracies `E[lambda_i Y]` of the inference parameters.
    pub fn accuracies(&self) -> Vec<f64> {
        let p = self.class_balance;
        self.on
            .iter()
            .map(|o| p * (2.0 * o[1] - 1.0) - (1.0 - p) * (2.0 * o[0] - 1.0))
            .collect()
    }

    pub fn class_conditional(&self) -> ClassConditionalEstimate {
        ClassConditionalEstimate::new(
            self.on.iter().map(|o| o[1]).collect(),
            self.on.iter().map(|o| o[0]).collect(),
            self.class_balance,
        )
        .expect("validated at construction")
    }

    /// Numerators `Pr(y) prod_i P~(lambda_i | y)` for `[y = -1, y = +1]`.
    pub fn numerators(&self, config: u64) -> [f64; 2] {
        let mut num = [1.0 - self.class_balance, self.class_balance];
        for (i, o) in self.on.iter().enumerate() {
            if config >> i & 1 == 1 {
                num[0] *= o[0];
                num[1] *= o[1];
            } else {
                num[0] *= 1.0 - o[0];
                num[1] *= 1.0 - o[1];
            }
        }
        num
    }

    /// `[P~(Y = -1 | lambda), P~(Y = +1 | lambda)]` for a packed configuration.
    pub fn posterior_pair(&self, config: u64) -> Result<[f64; 2]> {
        let num = self.numerators(config);
        match self.mode {
            InferenceMode::Normalized => {
                let z = num[0] + num[1];
                Ok([num[0] / z, num[1] / z])
            }
            InferenceMode::Empirical => {
                let lambda = self.lambda.as_ref().ok_or_else(|| {
                    Error::Contract("empirical inference needs a configuration distribution".into())
                })?;
                let pr = lambda.prob(config);
                if pr <= 0.0 {
                    return Err(Error::UnseenConfiguration { config });
                }
                Ok([num[0] / pr, num[1] / pr])
            }
        }
    }

    /// `P~(Y = 1 | lambda = row)`.
    pub fn posterior(&self, row: &[i8]) -> Result<f64> {
        if row.len() != self.m() {
            return Err(Error::InvalidInput(format!(
                "row has {} votes, model has {} sources",
                row.len(),
                self.m()
            )));
        }
        Ok(self.posterior_pair(config_of(row))?[1])
    }

    /// Posterior pairs for every configuration, indexed by packed config.
    pub fn posterior_table(&self) -> Result<Vec<[f64; 2]>> {
        let m = self.m();
        if m > MAX_SOURCES {
            return Err(Error::Capacity {
                what: "m",
                value: m,
                limit: MAX_SOURCES,
            });
        }
        (0..1u64 << m).map(|c| self.posterior_pair(c)).collect()
    }

    /// Loss of a posterior pair against label `y`, clamped as in [`cross_entropy`].
    pub fn pointwise_loss(&self, post: [f64; 2], y: f64) -> f64 {
        let p = post[usize::from(y > 0.0)];
        let p = match self.mode {
            InferenceMode::Normalized => p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP),
            InferenceMode::Empirical => p.max(PROB_CLAMP),
        };
        -p.ln()
    }

    pub fn soft_labels(&self, data: &SourceMatrix) -> Result<SoftLabels> {
        let p_y1 = (0..data.n())
            .into_par_iter()
            .map(|r| self.posterior(data.row(r)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(SoftLabels { p_y1 })
    }
}

fn check_balance(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("class balance must lie in (0, 1), got {p}")))
    }
}

/// Mean cross-entropy against the label column.
///
/// Normalised posteriors are clamped to `[1e-12, 1 - 1e-12]` before the log.
/// Empirical-denominator posteriors are only floored at `1e-12`: they may
/// exceed one, and capping them would break the exact error decomposition.
pub fn cross_entropy(model: &LabelModel, data: &SourceMatrix) -> Result<f64> {
    let labels = data.require_labels("cross-entropy")?;
    let total = (0..data.n())
        .into_par_iter()
        .map(|r| {
            let post = model.posterior_pair(data.config_index(r))?;
            Ok(model.pointwise_loss(post, f64::from(labels[r])))
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>();
    Ok(total / data.n() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Set when there are neither positive predictions nor positive labels.
    pub undefined: bool,
}

/// F1 on the positive class, predicting `+1` iff the posterior is at least
/// `threshold`.
pub fn f1_score(model: &LabelModel, data: &SourceMatrix, threshold: f64) -> Result<F1Score> {
    let labels = data.require_labels("F1")?;
    let preds = (0..data.n())
        .into_par_iter()
        .map(|r| Ok(model.posterior_pair(data.config_index(r))?[1] >= threshold))
        .collect::<Result<Vec<bool>>>()?;
    Ok(f1_from_predictions(&preds, labels))
}

pub fn f1_from_predictions(preds: &[bool], labels: &[i8]) -> F1Score {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y > 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    F1Score {
        f1,
        precision,
        recall,
        undefined: tp + fp == 0 && tp + fneg == 0,
    }
}

/// Posterior probabilities `P~(Y = 1 | lambda(x))` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabels {
    pub p_y1: Vec<f64>,
}

impl SoftLabels {
    /// `2 P~(Y = 1 | lambda) - 1`.
    pub fn soft_labels(&self) -> Vec<f64> {
        self.p_y1.iter().map(|p| 2.0 * p - 1.0).collect()
    }

    /// CSV with columns `row_id, p_y1, soft_label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["row_id", "p_y1", "soft_label"])?;
        for (r, p) in self.p_y1.iter().enumerate() {
            w.write_record([r.to_string(), p.to_string(), (2.0 * p - 1.0).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
