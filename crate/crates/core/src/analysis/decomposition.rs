use serde::{Deserialize, Serialize};

use crate::data::sign_at;
use crate::error::{Error, Result};
use crate::ising::IsingModel;
use crate::label_model::{InferenceMode, LabelModel};

/// The four error terms of a fitted product-form model under a known truth,
/// plus their sum and the directly computed expected loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// `H(Y | lambda)`.
    #[serde(rename = "H_cond")]
    pub irreducible: f64,
    /// `KL(Pr(lambda) || P^r(lambda))`.
    pub observable_noise: f64,
    /// `B_I`: total correlation of the votes given the label.
    #[serde(rename = "B_I")]
    pub inference_bias: f64,
    /// `sum_i E_Y KL(Pr(lambda_i | Y) || P~(lambda_i | Y))`.
    pub param_est_error: f64,
    /// `irreducible - observable_noise + inference_bias + param_est_error`.
    pub total: f64,
    /// `E[loss]` summed directly over every `(y, lambda)`.
    pub independent_loss: f64,
    pub residual: f64,
}

/// Expected loss of a fitted model and its excess over `H(Y | lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub loss: f64,
    #[serde(rename = "H_cond")]
    pub irreducible: f64,
    pub excess: f64,
}

/// `H(Y | lambda)` from the joint table.
pub fn conditional_entropy(model: &IsingModel) -> f64 {
    let half = model.num_configs();
    let joint = model.joint();
    let mut h = 0.0;
    for c in 0..half {
        let (pn, pp) = (joint[c], joint[c | half]);
        let pc = pn + pp;
        for p in [pn, pp] {
            if p > 0.0 {
                h -= p * (p / pc).ln();
            }
        }
    }
    h
}

/// Exact expected cross-entropy of `fitted` under `truth`.
///
/// In empirical mode a configuration with positive true probability and zero
/// `P^r` makes the loss infinite, reported as [`Error::IdentityUndefined`].
pub fn exact_generalization_error(truth: &IsingModel, fitted: &LabelModel) -> Result<ExcessReport> {
    check_shapes(truth, fitted)?;
    let half = truth.num_configs();
    let joint = truth.joint();
    let mut loss = 0.0;
    for c in 0..half {
        let (pn, pp) = (joint[c], joint[c | half]);
        if pn + pp == 0.0 {
            continue;
        }
        let post = match fitted.posterior_pair(c as u64) {
            Ok(p) => p,
            Err(Error::UnseenConfiguration { config }) => {
                return Err(Error::IdentityUndefined(format!(
                    "configuration {config:#x} has zero empirical probability"
                )))
            }
            Err(e) => return Err(e),
        };
        loss += pn * fitted.pointwise_loss(post, -1.0) + pp * fitted.pointwise_loss(post, 1.0);
    }
    let irreducible = conditional_entropy(truth);
    Ok(ExcessReport {
        loss,
        irreducible,
        excess: loss - irreducible,
    })
}

fn check_shapes(truth: &IsingModel, fitted: &LabelModel) -> Result<()> {
    if truth.m() != fitted.m() {
        return Err(Error::InvalidInput(format!(
            "true model has m = {}, fitted model has m = {}",
            truth.m(),
            fitted.m()
        )));
    }
    Ok(())
}

/// Computes each term by enumeration and checks the identity against the
/// directly evaluated loss.
///
/// Requires empirical-denominator inference, a configuration distribution
/// with full support, and the fitted class balance equal to the true one.
pub fn decompose(truth: &IsingModel, fitted: &LabelModel) -> Result<DecompositionReport> {
    check_shapes(truth, fitted)?;
    if fitted.mode() != InferenceMode::Empirical {
        return Err(Error::Contract(
            "decomposition needs empirical-denominator inference".into(),
        ));
    }
    let lambda = fitted
        .lambda()
        .ok_or_else(|| Error::Contract("fitted model has no configuration distribution".into()))?;
    let p_true = truth.class_balance();
    if (fitted.class_balance() - p_true).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "fitted class balance {} differs from the true {}",
            fitted.class_balance(),
            p_true
        )));
    }
    let m = truth.m();
    let half = truth.num_configs();
    let joint = truth.joint();
    let py = [1.0 - p_true, p_true];

    // Pr(lambda_i = +1 | y), indexed [i][y]
    let mut on = vec![[0.0f64; 2]; m];
    for c in 0..half {
        for i in 0..m {
            if sign_at(c as u64, i) > 0.0 {
                on[i][0] += joint[c];
                on[i][1] += joint[c | half];
            }
        }
    }
    for o in on.iter_mut() {
        o[0] /= py[0];
        o[1] /= py[1];
    }

    let mut noise = 0.0;
    let mut bias = 0.0;
    for c in 0..half {
        let pr = joint[c] + joint[c | half];
        if pr > 0.0 {
            let q = lambda.prob(c as u64);
            if q <= 0.0 {
                return Err(Error::IdentityUndefined(format!(
                    "configuration {c:#x} has zero empirical probability"
                )));
            }
            noise += pr * (pr / q).ln();
        }
        for yb in 0..2 {
            let p = joint[c | (yb << m)];
            if p <= 0.0 {
                continue;
            }
            let mut prod = 1.0;
            for (i, o) in on.iter().enumerate() {
                prod *= if sign_at(c as u64, i) > 0.0 { o[yb] } else { 1.0 - o[yb] };
            }
            bias += p * (p / py[yb] / prod).ln();
        }
    }

    let mut param = 0.0;
    for (i, o) in on.iter().enumerate() {
        for (yb, &y) in [-1.0, 1.0].iter().enumerate() {
            for vote in [1.0, -1.0] {
                let p = if vote > 0.0 { o[yb] } else { 1.0 - o[yb] };
                if p > 0.0 {
                    param += py[yb] * p * (p / fitted.conditional(i, vote, y)).ln();
                }
            }
        }
    }

    let irreducible = conditional_entropy(truth);
    let total = irreducible - noise + bias + param;
    let independent_loss = exact_generalization_error(truth, fitted)?.loss;
    Ok(DecompositionReport {
        irreducible,
        observable_noise: noise,
        inference_bias: bias,
        param_est_error: param,
        total,
        independent_loss,
        residual: (total - independent_loss).abs(),
    })
}
