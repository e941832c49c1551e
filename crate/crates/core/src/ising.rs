//! Binary Ising ground truth `Pr(Y, lambda; theta)`.
//!
//! The density is proportional to
//! `exp(theta_Y * y + sum_i theta_i * s_i * y + sum_(i,j) theta_ij * s_i * s_j)`
//! with every source in at most one edge. The full joint table is enumerated
//! at construction and cached; all moments, entropies and samples are taken
//! from that table.
//!
//! Joint state layout: bit `k` of the index is source `k` (`1` = `+1`), bit
//! `m` is the label.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{sign_at, SourceMatrix, StateCounts};
use crate::error::{Error, Result};

/// Largest source count the enumerator accepts.
pub const MAX_SOURCES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub theta_ij: f64,
}

/// On-disk form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    #[serde(rename = "theta_Y")]
    pub theta_y: f64,
    pub theta: Vec<f64>,
    pub edges: Vec<Edge>,
    pub class_balance: f64,
}

#[derive(Debug, Clone)]
pub struct IsingModel {
    m: usize,
    theta_y: f64,
    theta: Vec<f64>,
    edges: Vec<Edge>,
    partner: Vec<Option<usize>>,
    joint: Vec<f64>,
    cdf: Vec<f64>,
    log_z: f64,
}

impl IsingModel {
    /// Validates parameters and enumerates the joint table.
    pub fn new(theta_y: f64, theta: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        let m = theta.len();
        if m == 0 {
            return Err(Error::InvalidModel("at least one source is required".into()));
        }
        if m > MAX_SOURCES {
            return Err(Error::Capacity {
                what: "m",
                value: m,
                limit: MAX_SOURCES,
            });
        }
        if !theta_y.is_finite() {
            return Err(Error::InvalidModel("theta_Y is not finite".into()));
        }
        for (i, &t) in theta.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "theta_{i} = {t} must be finite and non-negative"
                )));
            }
        }
        let mut partner = vec![None; m];
        for e in &edges {
            if e.i >= m || e.j >= m || e.i == e.j {
                return Err(Error::InvalidModel(format!(
                    "edge ({}, {}) is not a pair of distinct sources below {m}",
                    e.i, e.j
                )));
            }
            if !(e.theta_ij.is_finite() && e.theta_ij >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "theta_({},{}) = {} must be finite and non-negative",
                    e.i, e.j, e.theta_ij
                )));
            }
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                if partner[a].is_some() {
                    return Err(Error::InvalidModel(format!(
                        "source {a} is in more than one edge"
                    )));
                }
                partner[a] = Some(b);
            }
        }
        let (joint, log_z) = enumerate_joint(m, theta_y, &theta, &edges)?;
        let mut cdf = Vec::with_capacity(joint.len());
        let mut acc = 0.0;
        for &p in &joint {
            acc += p;
            cdf.push(acc);
        }
        Ok(Self {
            m,
            theta_y,
            theta,
            edges,
            partner,
            joint,
            cdf,
            log_z,
        })
    }

    /// Model with no source-source edges.
    pub fn independent(theta_y: f64, theta: Vec<f64>) -> Result<Self> {
        Self::new(theta_y, theta, Vec::new())
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        if f.theta.len() != f.m {
            return Err(Error::InvalidModel(format!(
                "m = {} but {} source potentials given",
                f.m,
                f.theta.len()
            )));
        }
        let model = Self::new(f.theta_y, f.theta.clone(), f.edges.clone())?;
        if (model.class_balance() - f.class_balance).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "class_balance {} disagrees with theta_Y (implies {})",
                f.class_balance,
                model.class_balance()
            )));
        }
        Ok(model)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            m: self.m,
            theta_y: self.theta_y,
            theta: self.theta.clone(),
            edges: self.edges.clone(),
            class_balance: self.class_balance(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn theta_y(&self) -> f64 {
        self.theta_y
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The source sharing an edge with `i`, if any.
    pub fn partner(&self, i: usize) -> Option<usize> {
        self.partner[i]
    }

    /// Normalised joint table, indexed as described in the module docs.
    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    pub fn num_configs(&self) -> usize {
        1 << self.m
    }

    /// Unnormalised log density of `(y, config)`.
    pub fn log_potential(&self, y: f64, config: u64) -> f64 {
        log_potential(self.theta_y, &self.theta, &self.edges, y, config)
    }

    pub fn prob(&self, y: f64, config: u64) -> f64 {
        self.joint[state_index(self.m, y, config)]
    }

    /// `Pr(Y = 1)`.
    pub fn class_balance(&self) -> f64 {
        let half = self.num_configs();
        self.joint[half..].iter().sum()
    }

    /// Marginal distribution of the source configuration.
    pub fn lambda_marginal(&self) -> Vec<f64> {
        let half = self.num_configs();
        (0..half).map(|c| self.joint[c] + self.joint[c | half]).collect()
    }

    /// Exact moments and misspecification summaries.
    pub fn diagnostics(&self) -> ModelDiagnostics {
        ModelDiagnostics::from_model(self)
    }

    /// `n` labelled i.i.d. rows by inverse-CDF lookup into the cached table.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SourceMatrix> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        let m = self.m;
        let mut values = Vec::with_capacity(n * m);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let s = self.draw_state(rng);
            for k in 0..m {
                values.push(if s >> k & 1 == 1 { 1 } else { -1 });
            }
            labels.push(if s >> m & 1 == 1 { 1 } else { -1 });
        }
        SourceMatrix::new(m, values, Some(labels))
    }

    /// Per-state counts of `n` i.i.d. draws.
    ///
    /// Small samples are drawn row by row; once `n` exceeds the number of
    /// states the counts are drawn directly from the multinomial by
    /// conditional binomials. Both routes are exact.
    pub fn sample_counts<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<StateCounts> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        let states = self.joint.len();
        let mut counts = vec![0u64; states];
        if n <= states {
            for _ in 0..n {
                counts[self.draw_state(rng)] += 1;
            }
        } else {
            let mut remaining = n as u64;
            let mut mass = 1.0f64;
            for (s, &p) in self.joint.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                if s + 1 == states || mass <= p {
                    counts[s] = remaining;
                    break;
                }
                let q = (p / mass).clamp(0.0, 1.0);
                let k = Binomial::new(remaining, q)
                    .map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?
                    .sample(rng);
                counts[s] = k;
                remaining -= k;
                mass -= p;
            }
        }
        StateCounts::new(self.m, counts)
    }

    fn draw_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

#[inline]
pub fn state_index(m: usize, y: f64, config: u64) -> usize {
    if y > 0.0 {
        config as usize | (1 << m)
    } else {
        config as usize
    }
}

fn log_potential(theta_y: f64, theta: &[f64], edges: &[Edge], y: f64, config: u64) -> f64 {
    let mut e = theta_y * y;
    for (k, &t) in theta.iter().enumerate() {
        e += t * sign_at(config, k) * y;
    }
    for ed in edges {
        e += ed.theta_ij * sign_at(config, ed.i) * sign_at(config, ed.j);
    }
    e
}

/// Normalised joint table over `2^(m+1)` states and `ln Z`.
pub fn enumerate_joint(
    m: usize,
    theta_y: f64,
    theta: &[f64],
    edges: &[Edge],
) -> Result<(Vec<f64>, f64)> {
    if m > MAX_SOURCES {
        return Err(Error::Capacity {
            what: "m",
            value: m,
            limit: MAX_SOURCES,
        });
    }
    let states = 1usize << (m + 1);
    let mut logp: Vec<f64> = (0..states)
        .map(|s| {
            let y = if s >> m & 1 == 1 { 1.0 } else { -1.0 };
            log_potential(theta_y, theta, edges, y, (s & ((1 << m) - 1)) as u64)
        })
        .collect();
    let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in logp.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    for v in logp.iter_mut() {
        *v /= z;
    }
    Ok((logp, max + z.ln()))
}

/// Moments of the two-source component `(s_i, s_j) = (lambda_i Y, lambda_j Y)`.
///
/// Returns `(E[lambda_i Y], E[lambda_j Y], E[lambda_i lambda_j])`. The pair
/// distribution of `lambda Y` does not depend on `theta_Y` or on any other
/// component, so these are the model's exact moments.
pub fn pair_moments(theta_i: f64, theta_j: f64, theta_ij: f64) -> (f64, f64, f64) {
    let mut z = 0.0;
    let (mut ei, mut ej, mut eij) = (0.0, 0.0, 0.0);
    for si in [1.0, -1.0] {
        for sj in [1.0, -1.0] {
            let w = (theta_i * si + theta_j * sj + theta_ij * si * sj).exp();
            z += w;
            ei += w * si;
            ej += w * sj;
            eij += w * si * sj;
        }
    }
    (ei / z, ej / z, eij / z)
}

/// Closed-form `eps_ij = E[lambda_i lambda_j] - E[lambda_i Y] E[lambda_j Y]`
/// for an edge, written through the shifts `Delta` from the edge-free model.
pub fn epsilon_closed_form(theta_i: f64, theta_j: f64, theta_ij: f64) -> f64 {
    let e = f64::exp;
    let z = pair_partition(theta_i, theta_j, theta_ij);
    let z0 = pair_partition(theta_i, theta_j, 0.0);
    let sh = e(theta_ij) - e(-theta_ij);
    let scale = 2.0 / (z * z0) * sh;
    let delta_i = scale * (e(2.0 * theta_j) - e(-2.0 * theta_j));
    let delta_j = scale * (e(2.0 * theta_i) - e(-2.0 * theta_i));
    let delta_ij = scale
        * (e(2.0 * theta_i) + e(-2.0 * theta_i) + e(2.0 * theta_j) + e(-2.0 * theta_j));
    let a_i0 = 2.0 / z0 * e(theta_i) * (e(theta_j) + e(-theta_j)) - 1.0;
    let a_j0 = 2.0 / z0 * e(theta_j) * (e(theta_i) + e(-theta_i)) - 1.0;
    delta_ij - delta_i * a_j0 - delta_j * a_i0 - delta_i * delta_j
}

fn pair_partition(theta_i: f64, theta_j: f64, theta_ij: f64) -> f64 {
    let mut z = 0.0;
    for si in [1.0, -1.0] {
        for sj in [1.0, -1.0] {
            z += (si * theta_i + sj * theta_j + si * sj * theta_ij).exp();
        }
    }
    z
}

/// Exact summaries of a model, all taken from its joint table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub m: usize,
    /// `a_i = E[lambda_i Y]`.
    pub a: Vec<f64>,
    /// `M_ij = E[lambda_i lambda_j]`, unit diagonal, row-major `m x m`.
    pub pairwise: Vec<f64>,
    pub a_min: f64,
    /// Smallest off-diagonal `M_ij`.
    pub b_min: f64,
    /// Largest per-source mean over triplets of the population triplet value.
    /// `None` below three sources.
    pub a_bar_max: Option<f64>,
    pub edges: Vec<(usize, usize)>,
    pub eps: Vec<f64>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub class_balance: f64,
    /// `H(Y | lambda)` in nats.
    pub h_cond: f64,
    /// Inference bias: `E[log Pr(lambda|Y) / prod_i Pr(lambda_i|Y)]`.
    pub b_i: f64,
}

impl ModelDiagnostics {
    fn from_model(model: &IsingModel) -> Self {
        let m = model.m();
        let half = model.num_configs();
        let joint = model.joint();

        let mut a = vec![0.0; m];
        let mut pairwise = vec![0.0; m * m];
        // per source, per label: Pr(lambda_i = +1, Y = y)
        let mut pos_given = vec![[0.0f64; 2]; m];
        let mut h_cond = 0.0;
        for c in 0..half {
            let pn = joint[c];
            let pp = joint[c | half];
            let pc = pn + pp;
            for (i, ai) in a.iter_mut().enumerate() {
                let si = sign_at(c as u64, i);
                *ai += si * (pp - pn);
                if si > 0.0 {
                    pos_given[i][0] += pn;
                    pos_given[i][1] += pp;
                }
                for j in (i + 1)..m {
                    pairwise[i * m + j] += si * sign_at(c as u64, j) * pc;
                }
            }
            for p in [pn, pp] {
                if p > 0.0 {
                    h_cond -= p * (p / pc).ln();
                }
            }
        }
        for i in 0..m {
            pairwise[i * m + i] = 1.0;
            for j in (i + 1)..m {
                pairwise[j * m + i] = pairwise[i * m + j];
            }
        }

        let class_balance = model.class_balance();
        let py = [1.0 - class_balance, class_balance];
        let cond_pos: Vec<[f64; 2]> = pos_given
            .iter()
            .map(|p| [p[0] / py[0], p[1] / py[1]])
            .collect();
        let mut b_i = 0.0;
        for c in 0..half {
            for (yb, &state) in [c, c | half].iter().enumerate() {
                let p = joint[state];
                if p <= 0.0 {
                    continue;
                }
                let cond = p / py[yb];
                let mut prod = 1.0;
                for (i, cp) in cond_pos.iter().enumerate() {
                    prod *= if sign_at(c as u64, i) > 0.0 {
                        cp[yb]
                    } else {
                        1.0 - cp[yb]
                    };
                }
                b_i += p * (cond / prod).ln();
            }
        }

        let a_min = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut b_min = f64::INFINITY;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    b_min = b_min.min(pairwise[i * m + j]);
                }
            }
        }
        if m < 2 {
            b_min = f64::NAN;
        }
        let a_bar_max = (m >= 3).then(|| {
            (0..m)
                .map(|i| {
                    let mut sum = 0.0;
                    let mut cnt = 0usize;
                    for j in 0..m {
                        for k in (j + 1)..m {
                            if j == i || k == i {
                                continue;
                            }
                            let v = (pairwise[i * m + j] * pairwise[i * m + k]
                                / pairwise[j * m + k])
                                .abs()
                                .sqrt();
                            sum += v.min(1.0);
                            cnt += 1;
                        }
                    }
                    sum / cnt as f64
                })
                .fold(f64::NEG_INFINITY, f64::max)
        });

        let edges: Vec<(usize, usize)> = model.edges().iter().map(|e| (e.i, e.j)).collect();
        let eps: Vec<f64> = edges
            .iter()
            .map(|&(i, j)| pairwise[i * m + j] - a[i] * a[j])
            .collect();
        let eps_min = if eps.is_empty() {
            0.0
        } else {
            eps.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let eps_max = eps.iter().cloned().fold(0.0, f64::max);

        Self {
            m,
            a,
            pairwise,
            a_min,
            b_min,
            a_bar_max,
            edges,
            eps,
            eps_min,
            eps_max,
            class_balance,
            h_cond,
            b_i,
        }
    }

    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pairwise[i * self.m + j]
    }

    /// `E[lambda_i lambda_j] - a_i a_j` for any pair.
    pub fn covariance_gap(&self, i: usize, j: usize) -> f64 {
        self.pair(i, j) - self.a[i] * self.a[j]
    }

    pub fn d(&self) -> usize {
        self.edges.len()
    }

    /// `max_i a_i`.
    pub fn max_accuracy(&self) -> f64 {
        self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

mod calibrate;
pub use calibrate::{calibrate, CalibrationTarget};
