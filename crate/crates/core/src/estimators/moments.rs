use crate::data::{sign_at, SourceMatrix, StateCounts};
use crate::error::{Error, Result};
use crate::ising::IsingModel;

/// First and second moments of the source votes.
///
/// `second` is row-major `m x m` with unit diagonal. Population moments
/// carry `n = None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMoments {
    m: usize,
    n: Option<u64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl PairwiseMoments {
    pub fn new(m: usize, n: Option<u64>, first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != m || second.len() != m * m {
            return Err(Error::InvalidInput("moment dimensions do not match m".into()));
        }
        Ok(Self {
            m,
            n,
            first,
            second,
        })
    }

    /// Empirical moments of a vote matrix (labels ignored).
    pub fn from_matrix(data: &SourceMatrix) -> Result<Self> {
        let (n, m) = (data.n(), data.m());
        if n == 0 {
            return Err(Error::InvalidInput("no rows".into()));
        }
        let mut first = vec![0.0; m];
        let mut upper = vec![0i64; m * m];
        for row in data.rows() {
            for i in 0..m {
                first[i] += f64::from(row[i]);
                let ri = i64::from(row[i]);
                for j in (i + 1)..m {
                    upper[i * m + j] += ri * i64::from(row[j]);
                }
            }
        }
        let nf = n as f64;
        first.iter_mut().for_each(|v| *v /= nf);
        let second = symmetric_from_upper(m, |i, j| upper[i * m + j] as f64 / nf);
        Ok(Self {
            m,
            n: Some(n as u64),
            first,
            second,
        })
    }

    /// Empirical moments of a counted sample (labels marginalised out).
    pub fn from_counts(counts: &StateCounts) -> Result<Self> {
        let m = counts.m();
        if counts.n() == 0 {
            return Err(Error::InvalidInput("no rows".into()));
        }
        let nf = counts.n() as f64;
        let mut first = vec![0.0; m];
        let mut upper = vec![0.0; m * m];
        for (c, &k) in counts.config_counts().iter().enumerate() {
            if k == 0 {
                continue;
            }
            let w = k as f64;
            for i in 0..m {
                let si = sign_at(c as u64, i);
                first[i] += w * si;
                for j in (i + 1)..m {
                    upper[i * m + j] += w * si * sign_at(c as u64, j);
                }
            }
        }
        first.iter_mut().for_each(|v| *v /= nf);
        let second = symmetric_from_upper(m, |i, j| upper[i * m + j] / nf);
        Ok(Self {
            m,
            n: Some(counts.n()),
            first,
            second,
        })
    }

    /// Exact moments of a model.
    pub fn population(model: &IsingModel) -> Self {
        let m = model.m();
        let marg = model.lambda_marginal();
        let mut first = vec![0.0; m];
        let mut upper = vec![0.0; m * m];
        for (c, &p) in marg.iter().enumerate() {
            for i in 0..m {
                let si = sign_at(c as u64, i);
                first[i] += p * si;
                for j in (i + 1)..m {
                    upper[i * m + j] += p * si * sign_at(c as u64, j);
                }
            }
        }
        let second = symmetric_from_upper(m, |i, j| upper[i * m + j]);
        Self {
            m,
            n: None,
            first,
            second,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> Option<u64> {
        self.n
    }

    /// `E[lambda_i]`.
    pub fn mean(&self, i: usize) -> f64 {
        self.first[i]
    }

    /// `E[lambda_i lambda_j]`.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.second[i * self.m + j]
    }

    /// `Pr(lambda_i = +1)`.
    pub fn prob_pos(&self, i: usize) -> f64 {
        0.5 * (1.0 + self.first[i])
    }

    /// `Pr(lambda_i = +1, lambda_j = +1)`.
    pub fn prob_both_pos(&self, i: usize, j: usize) -> f64 {
        0.25 * (1.0 + self.first[i] + self.first[j] + self.pair(i, j))
    }
}

fn symmetric_from_upper(m: usize, upper: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        out[i * m + i] = 1.0;
        for j in (i + 1)..m {
            let v = upper(i, j);
            out[i * m + j] = v;
            out[j * m + i] = v;
        }
    }
    out
}

/// Sufficient statistics of a labelled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMoments {
    m: usize,
    n: u64,
    /// Mean of `lambda_i * y`.
    agreement: Vec<f64>,
    /// Second moments `E[lambda_i lambda_j]`; equal to `E[z_i z_j]` for `z = lambda * y`.
    pairs: PairwiseMoments,
    n_pos: u64,
    /// Count of rows with `lambda_i = +1` and `y = +1`.
    on_pos: Vec<u64>,
    /// Count of rows with `lambda_i = +1` and `y = -1`.
    on_neg: Vec<u64>,
}

impl LabeledMoments {
    pub fn from_matrix(data: &SourceMatrix) -> Result<Self> {
        let labels = data.require_labels("labelled estimation")?;
        let (n, m) = (data.n(), data.m());
        if n == 0 {
            return Err(Error::InvalidInput("no rows".into()));
        }
        let mut agree = vec![0i64; m];
        let mut on_pos = vec![0u64; m];
        let mut on_neg = vec![0u64; m];
        let mut n_pos = 0u64;
        for (row, &y) in data.rows().zip(labels) {
            if y > 0 {
                n_pos += 1;
            }
            for i in 0..m {
                agree[i] += i64::from(row[i] * y);
                if row[i] > 0 {
                    if y > 0 {
                        on_pos[i] += 1;
                    } else {
                        on_neg[i] += 1;
                    }
                }
            }
        }
        Ok(Self {
            m,
            n: n as u64,
            agreement: agree.iter().map(|&s| s as f64 / n as f64).collect(),
            pairs: PairwiseMoments::from_matrix(data)?,
            n_pos,
            on_pos,
            on_neg,
        })
    }

    pub fn from_counts(counts: &StateCounts) -> Result<Self> {
        let m = counts.m();
        let n = counts.n();
        if n == 0 {
            return Err(Error::InvalidInput("no rows".into()));
        }
        let half = 1usize << m;
        let mut agree = vec![0.0; m];
        let mut on_pos = vec![0u64; m];
        let mut on_neg = vec![0u64; m];
        let mut n_pos = 0u64;
        for (s, &k) in counts.counts().iter().enumerate() {
            if k == 0 {
                continue;
            }
            let pos = s & half != 0;
            if pos {
                n_pos += k;
            }
            let y = if pos { 1.0 } else { -1.0 };
            for i in 0..m {
                let si = sign_at(s as u64, i);
                agree[i] += k as f64 * si * y;
                if si > 0.0 {
                    if pos {
                        on_pos[i] += k;
                    } else {
                        on_neg[i] += k;
                    }
                }
            }
        }
        Ok(Self {
            m,
            n,
            agreement: agree.iter().map(|&s| s / n as f64).collect(),
            pairs: PairwiseMoments::from_counts(counts)?,
            n_pos,
            on_pos,
            on_neg,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn n_pos(&self) -> u64 {
        self.n_pos
    }

    pub fn n_neg(&self) -> u64 {
        self.n - self.n_pos
    }

    pub fn agreement(&self) -> &[f64] {
        &self.agreement
    }

    pub fn on_pos(&self) -> &[u64] {
        &self.on_pos
    }

    pub fn on_neg(&self) -> &[u64] {
        &self.on_neg
    }

    pub fn pairs(&self) -> &PairwiseMoments {
        &self.pairs
    }

    /// Unbiased sample covariance of the rows `lambda(x) * y`, row-major.
    pub fn agreement_covariance(&self) -> Vec<f64> {
        let m = self.m;
        let n = self.n as f64;
        let denom = (n - 1.0).max(1.0);
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let zz = self.pairs.pair(i, j);
                cov[i * m + j] = n * (zz - self.agreement[i] * self.agreement[j]) / denom;
            }
        }
        cov
    }
}
