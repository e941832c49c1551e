//! Fitting canonical parameters to target accuracies, per-edge
//! misspecification and class balance.
//!
//! The label-flipped pair `(lambda_i Y, lambda_j Y)` of an edge component is
//! independent of `Y` and of every other component, and its four-state law
//! `(1 + u a_i + v a_j + u v M_ij) / 4` is an arbitrary positive 2x2
//! distribution under the log-linear parameters `(theta_i, theta_j,
//! theta_ij)`. So each edge is solved in closed form from its targets, an
//! edgeless source gets `atanh(a_i)`, and `theta_Y = atanh(2p - 1)`. The
//! assembled model is checked against full enumeration.

use serde::{Deserialize, Serialize};

use super::{Edge, IsingModel};
use crate::error::{Error, Result};

const POST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub accuracies: Vec<f64>,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
    /// One target per edge.
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default = "half")]
    pub class_balance: f64,
}

fn half() -> f64 {
    0.5
}

impl CalibrationTarget {
    pub fn independent(accuracies: Vec<f64>) -> Self {
        Self {
            accuracies,
            edges: Vec::new(),
            eps: Vec::new(),
            class_balance: 0.5,
        }
    }
}

fn infeasible(residuals: Vec<f64>) -> Error {
    let max_residual = residuals
        .iter()
        .cloned()
        .fold(0.0, |acc: f64, r| if r.is_nan() { acc } else { acc.max(r) });
    Error::Calibration {
        iterations: 0,
        max_residual,
        residuals,
    }
}

/// `(theta_i, theta_j, theta_ij)` reproducing `(a_i, a_j, a_i a_j + eps)` on a
/// two-source component, or `None` when some state would need probability
/// zero or a potential would turn negative.
fn solve_pair(ai: f64, aj: f64, eps: f64) -> Option<(f64, f64, f64)> {
    let mij = ai * aj + eps;
    let p = |u: f64, v: f64| 0.25 * (1.0 + u * ai + v * aj + u * v * mij);
    let (pp, pn, np, nn) = (p(1.0, 1.0), p(1.0, -1.0), p(-1.0, 1.0), p(-1.0, -1.0));
    if [pp, pn, np, nn].iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let ti = 0.25 * (pp * pn / (np * nn)).ln();
    let tj = 0.25 * (pp * np / (pn * nn)).ln();
    let tij = 0.25 * (pp * nn / (pn * np)).ln();
    let tol = -1e-12;
    (ti >= tol && tj >= tol && tij >= tol).then_some((ti.max(0.0), tj.max(0.0), tij.max(0.0)))
}

/// Solves for a model whose exact diagnostics hit every target.
pub fn calibrate(target: &CalibrationTarget) -> Result<IsingModel> {
    let m = target.accuracies.len();
    if m == 0 {
        return Err(Error::InvalidInput("no accuracy targets".into()));
    }
    for (i, &a) in target.accuracies.iter().enumerate() {
        if !(a > 0.5 && a < 1.0) {
            return Err(Error::InvalidInput(format!(
                "accuracy target {a} for source {i} is outside (0.5, 1)"
            )));
        }
    }
    if target.eps.len() != target.edges.len() {
        return Err(Error::InvalidInput(format!(
            "{} edges but {} misspecification targets",
            target.edges.len(),
            target.eps.len()
        )));
    }
    if target.eps.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidInput("misspecification targets must be >= 0".into()));
    }
    let p = target.class_balance;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("class balance {p} is outside (0, 1)")));
    }

    let mut theta: Vec<f64> = target.accuracies.iter().map(|a| a.atanh()).collect();
    let mut in_edge = vec![false; m];
    let mut edges = Vec::with_capacity(target.edges.len());
    let mut residuals = vec![f64::NAN; m + target.edges.len()];

    for (e, (&(i, j), &eps)) in target.edges.iter().zip(&target.eps).enumerate() {
        if i >= m || j >= m || i == j || in_edge[i] || in_edge[j] {
            return Err(Error::InvalidInput(format!(
                "edge ({i}, {j}) breaks the one-edge-per-source constraint"
            )));
        }
        in_edge[i] = true;
        in_edge[j] = true;
        let (ai, aj) = (target.accuracies[i], target.accuracies[j]);
        let Some((ti, tj, tij)) = solve_pair(ai, aj, eps) else {
            residuals[m + e] = eps;
            return Err(infeasible(residuals));
        };
        theta[i] = ti;
        theta[j] = tj;
        edges.push(Edge { i, j, theta_ij: tij });
    }

    // Pr(Y=1) = e^tY / (e^tY + e^-tY): flipping every sign maps the Y=1 half
    // of the table onto the Y=-1 half without changing source potentials.
    let theta_y = (2.0 * p - 1.0).atanh();

    let model = IsingModel::new(theta_y, theta, edges)?;
    let diag = model.diagnostics();
    let mut worst = (diag.class_balance - p).abs();
    for i in 0..m {
        residuals[i] = (diag.a[i] - target.accuracies[i]).abs();
        worst = worst.max(residuals[i]);
    }
    for (e, &eps) in target.eps.iter().enumerate() {
        residuals[m + e] = (diag.eps[e] - eps).abs();
        worst = worst.max(residuals[m + e]);
    }
    if worst > POST_TOL {
        return Err(infeasible(residuals));
    }
    Ok(model)
}
