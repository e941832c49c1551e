//! Class-conditional triplets.
//!
//! With `q = 1 - p`, `d = p / q`, `c_x = Pr(lambda_x = +1) / q` and
//! `alpha_x = Pr(lambda_x = +1 | Y = +1)`, conditional independence gives
//! `Pr(lambda_x = +1 | Y = -1) = c_x - d alpha_x` and, for every pair,
//!
//! ```text
//! d alpha_x alpha_y - p c_y alpha_x - p c_x alpha_y + (q c_x c_y - O_xy) = 0
//! ```
//!
//! where `O_xy = Pr(lambda_x = +1, lambda_y = +1)`. For a triplet `(a, b, c)`
//! the `(a, b)` and `(c, b)` equations express `alpha_a`, `alpha_c` as
//! Möbius functions of `alpha_b`; substituting into the `(a, c)` equation
//! and clearing the common denominator leaves a quadratic in `alpha_b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::triplet::lower_median;
use super::{Aggregation, PairwiseMoments};
use crate::data::SourceMatrix;
use crate::error::{Error, Result};

const ROOT_TOL: f64 = 1e-9;
const DENOM_FLOOR: f64 = 1e-12;

/// Per-source class-conditional vote probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConditionalEstimate {
    /// `Pr(lambda_i = +1 | Y = +1)`.
    pub pos_given_pos: Vec<f64>,
    /// `Pr(lambda_i = +1 | Y = -1)`.
    pub pos_given_neg: Vec<f64>,
    /// `Pr(Y = +1)`.
    pub class_balance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    /// Triplets that produced a usable root, per source.
    #[serde(default)]
    pub used: Vec<usize>,
    /// Triplets skipped (negative discriminant, vanishing denominator or no
    /// root inside `[0, 1]`), per source.
    #[serde(default)]
    pub skipped: Vec<usize>,
    /// Triplets where both roots were admissible and the accuracy tie-break
    /// decided, per source.
    #[serde(default)]
    pub tie_breaks: Vec<usize>,
}

impl ClassConditionalEstimate {
    pub fn new(pos_given_pos: Vec<f64>, pos_given_neg: Vec<f64>, class_balance: f64) -> Result<Self> {
        if pos_given_pos.len() != pos_given_neg.len() {
            return Err(Error::InvalidInput("class-conditional vectors differ in length".into()));
        }
        check_balance(class_balance)?;
        let m = pos_given_pos.len();
        let clip = |v: Vec<f64>| v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        Ok(Self {
            pos_given_pos: clip(pos_given_pos),
            pos_given_neg: clip(pos_given_neg),
            class_balance,
            aggregation: None,
            used: vec![0; m],
            skipped: vec![0; m],
            tie_breaks: vec![0; m],
        })
    }

    /// Symmetric sources: `Pr(lambda_i = y | Y = y) = (1 + a_i) / 2`.
    pub fn from_accuracies(a: &[f64], class_balance: f64) -> Result<Self> {
        Self::new(
            a.iter().map(|x| 0.5 * (1.0 + x)).collect(),
            a.iter().map(|x| 0.5 * (1.0 - x)).collect(),
            class_balance,
        )
    }

    pub fn m(&self) -> usize {
        self.pos_given_pos.len()
    }

    /// `mu[v][y]` = `Pr(lambda_i = v | Y = y)` with index 0 for `+1`, 1 for `-1`.
    pub fn mu(&self, i: usize) -> [[f64; 2]; 2] {
        let (a, b) = (self.pos_given_pos[i], self.pos_given_neg[i]);
        [[a, b], [1.0 - a, 1.0 - b]]
    }

    /// `Pr(lambda_i = vote | Y = y)` for `vote, y` in `{-1, +1}`.
    pub fn conditional(&self, i: usize, vote: f64, y: f64) -> f64 {
        let on = if y > 0.0 {
            self.pos_given_pos[i]
        } else {
            self.pos_given_neg[i]
        };
        if vote > 0.0 {
            on
        } else {
            1.0 - on
        }
    }

    /// Implied `E[lambda_i Y]`.
    pub fn accuracy(&self, i: usize) -> f64 {
        let p = self.class_balance;
        p * (2.0 * self.pos_given_pos[i] - 1.0) - (1.0 - p) * (2.0 * self.pos_given_neg[i] - 1.0)
    }

    pub fn accuracies(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.accuracy(i)).collect()
    }

    /// `alpha * self + (1 - alpha) * other`, coordinate-wise.
    pub fn blend(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.m() != other.m() || (self.class_balance - other.class_balance).abs() > 1e-12 {
            return Err(Error::InvalidInput("cannot blend estimates of different shape".into()));
        }
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect()
        };
        Self::new(
            mix(&self.pos_given_pos, &other.pos_given_pos),
            mix(&self.pos_given_neg, &other.pos_given_neg),
            self.class_balance,
        )
    }
}

fn check_balance(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("class balance must lie in (0, 1), got {p}")))
    }
}

/// One admissible solution of a triplet system, ordered `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRoot {
    pub pos_given_pos: [f64; 3],
    pub pos_given_neg: [f64; 3],
    /// Implied accuracy of the middle source `b`.
    pub accuracy: f64,
}

fn mul(x: [f64; 2], y: [f64; 2]) -> [f64; 3] {
    [x[0] * y[0], x[0] * y[1] + x[1] * y[0], x[1] * y[1]]
}

fn real_roots(c0: f64, c1: f64, c2: f64) -> Option<Vec<f64>> {
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if scale == 0.0 {
        return None;
    }
    if c2.abs() <= 1e-14 * scale {
        if c1.abs() <= 1e-14 * scale {
            return None;
        }
        return Some(vec![-c0 / c1]);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        if disc > -1e-14 * scale * scale {
            return Some(vec![-c1 / (2.0 * c2)]);
        }
        return None;
    }
    let s = disc.sqrt();
    let t = -0.5 * (c1 + c1.signum() * s);
    if t == 0.0 {
        return Some(vec![0.0]);
    }
    Some(vec![t / c2, c0 / t])
}

/// All admissible solutions for the triplet `(a, b, c)` (middle slot `b`).
///
/// Returns `None` when the discriminant is negative or every branch hits a
/// vanishing denominator; the returned vector holds only roots whose
/// implied probabilities all lie in `[0, 1]` and may be empty.
pub fn solve_quadratic_triplet(
    moments: &PairwiseMoments,
    class_balance: f64,
    a: usize,
    b: usize,
    c: usize,
) -> Option<Vec<QuadraticRoot>> {
    let p = class_balance;
    let q = 1.0 - p;
    let d = p / q;
    let cc = |x: usize| moments.prob_pos(x) / q;
    let k = |x: usize, y: usize| q * cc(x) * cc(y) - moments.prob_both_pos(x, y);
    let (ca, cb, ccc) = (cc(a), cc(b), cc(c));
    let n_a = [-k(a, b), p * ca];
    let n_c = [-k(c, b), p * ccc];
    let den = [-p * cb, d];
    let nn = mul(n_a, n_c);
    let nd_a = mul(n_a, den);
    let nd_c = mul(n_c, den);
    let dd = mul(den, den);
    let kac = k(a, c);
    let coef: Vec<f64> = (0..3)
        .map(|t| d * nn[t] - p * ccc * nd_a[t] - p * ca * nd_c[t] + kac * dd[t])
        .collect();
    let roots = real_roots(coef[0], coef[1], coef[2])?;
    let mut out = Vec::new();
    let mut any_finite = false;
    for v in roots {
        let dv = den[0] + den[1] * v;
        if dv.abs() < DENOM_FLOOR {
            continue;
        }
        any_finite = true;
        let u = (n_a[0] + n_a[1] * v) / dv;
        let w = (n_c[0] + n_c[1] * v) / dv;
        let pos = [u, v, w];
        let neg = [ca - d * u, cb - d * v, ccc - d * w];
        let ok = pos
            .iter()
            .chain(&neg)
            .all(|x| x.is_finite() && (-ROOT_TOL..=1.0 + ROOT_TOL).contains(x));
        if ok {
            let pos = pos.map(|x| x.clamp(0.0, 1.0));
            let neg = neg.map(|x| x.clamp(0.0, 1.0));
            let accuracy = p * (2.0 * pos[1] - 1.0) - q * (2.0 * neg[1] - 1.0);
            out.push(QuadraticRoot {
                pos_given_pos: pos,
                pos_given_neg: neg,
                accuracy,
            });
        }
    }
    any_finite.then_some(out)
}

/// Pick among admissible roots; the flag reports whether the accuracy
/// tie-break was needed.
fn select(roots: &[QuadraticRoot]) -> Option<(QuadraticRoot, bool)> {
    match roots {
        [] => None,
        [r] => Some((*r, false)),
        [r0, r1, ..] => {
            let better = |x: &QuadraticRoot, y: &QuadraticRoot| {
                match (x.accuracy >= 0.0, y.accuracy >= 0.0) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => x.accuracy >= y.accuracy,
                }
            };
            if (r0.pos_given_pos[1] - r1.pos_given_pos[1]).abs() < 1e-12 {
                return Some((*r0, false));
            }
            Some((if better(r0, r1) { *r0 } else { *r1 }, true))
        }
    }
}

pub fn estimate_quadratic_triplet(
    data: &SourceMatrix,
    class_balance: f64,
    aggregation: Aggregation,
    seed: u64,
) -> Result<ClassConditionalEstimate> {
    let moments = PairwiseMoments::from_matrix(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    estimate_quadratic_triplet_from(&moments, class_balance, aggregation, &mut rng)
}

/// Estimate each source's class-conditional probabilities by placing it in
/// the middle slot of every triplet and aggregating the admissible roots.
pub fn estimate_quadratic_triplet_from<R: Rng + ?Sized>(
    moments: &PairwiseMoments,
    class_balance: f64,
    aggregation: Aggregation,
    rng: &mut R,
) -> Result<ClassConditionalEstimate> {
    check_balance(class_balance)?;
    let m = moments.m();
    if m < 3 {
        return Err(Error::InvalidInput(format!(
            "quadratic triplets need m >= 3, got {m}"
        )));
    }
    let mut pos = Vec::with_capacity(m);
    let mut neg = Vec::with_capacity(m);
    let mut used = vec![0; m];
    let mut skipped = vec![0; m];
    let mut ties = vec![0; m];
    for b in 0..m {
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for a in 0..m {
            for c in (a + 1)..m {
                if a == b || c == b {
                    continue;
                }
                let chosen = solve_quadratic_triplet(moments, class_balance, a, b, c)
                    .and_then(|roots| select(&roots));
                match chosen {
                    Some((r, tie)) => {
                        alphas.push(r.pos_given_pos[1]);
                        betas.push(r.pos_given_neg[1]);
                        ties[b] += usize::from(tie);
                    }
                    None => skipped[b] += 1,
                }
            }
        }
        if alphas.is_empty() {
            return Err(Error::Estimation(format!(
                "no usable quadratic triplet for source {b} ({} skipped)",
                skipped[b]
            )));
        }
        used[b] = alphas.len();
        let (x, y) = match aggregation {
            Aggregation::Single => {
                let t = rng.random_range(0..alphas.len());
                used[b] = 1;
                (alphas[t], betas[t])
            }
            Aggregation::Mean => {
                let k = alphas.len() as f64;
                (alphas.iter().sum::<f64>() / k, betas.iter().sum::<f64>() / k)
            }
            Aggregation::Median => (lower_median(&mut alphas), lower_median(&mut betas)),
        };
        pos.push(x);
        neg.push(y);
    }
    let mut out = ClassConditionalEstimate::new(pos, neg, class_balance)?;
    out.aggregation = Some(aggregation);
    out.used = used;
    out.skipped = skipped;
    out.tie_breaks = ties;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact moments of a conditionally independent model.
    fn ci_moments(pos: &[f64], neg: &[f64], p: f64) -> PairwiseMoments {
        let m = pos.len();
        let mean = |i: usize| p * (2.0 * pos[i] - 1.0) + (1.0 - p) * (2.0 * neg[i] - 1.0);
        let first: Vec<f64> = (0..m).map(mean).collect();
        let mut second = vec![1.0; m * m];
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    second[i * m + j] = p * (2.0 * pos[i] - 1.0) * (2.0 * pos[j] - 1.0)
                        + (1.0 - p) * (2.0 * neg[i] - 1.0) * (2.0 * neg[j] - 1.0);
                }
            }
        }
        PairwiseMoments::new(m, None, first, second).unwrap()
    }

    #[test]
    fn symmetric_sources_reduce_to_linear_triplets() {
        let a = [0.2, 0.4, 0.6, 0.5];
        let pos: Vec<f64> = a.iter().map(|x| 0.5 * (1.0 + x)).collect();
        let neg: Vec<f64> = a.iter().map(|x| 0.5 * (1.0 - x)).collect();
        let mom = ci_moments(&pos, &neg, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let est = estimate_quadratic_triplet_from(&mom, 0.5, Aggregation::Mean, &mut rng).unwrap();
        for i in 0..4 {
            assert!((est.pos_given_pos[i] - pos[i]).abs() < 1e-9);
            assert!((est.accuracy(i) - a[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_sources_with_skewed_balance() {
        let pos = [0.8, 0.55, 0.7, 0.9, 0.6];
        let neg = [0.3, 0.1, 0.45, 0.5, 0.2];
        let mom = ci_moments(&pos, &neg, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for agg in [Aggregation::Mean, Aggregation::Median, Aggregation::Single] {
            let est = estimate_quadratic_triplet_from(&mom, 0.3, agg, &mut rng).unwrap();
            for i in 0..5 {
                assert!((est.pos_given_pos[i] - pos[i]).abs() < 1e-9, "{agg:?} {i}");
                assert!((est.pos_given_neg[i] - neg[i]).abs() < 1e-9, "{agg:?} {i}");
            }
        }
    }

    #[test]
    fn perfect_source_is_recovered() {
        let pos = [1.0, 0.7, 0.65];
        let neg = [0.0, 0.2, 0.4];
        let mom = ci_moments(&pos, &neg, 0.5);
        let roots = solve_quadratic_triplet(&mom, 0.5, 1, 0, 2).unwrap();
        let (r, _) = select(&roots).unwrap();
        assert!((r.pos_given_pos[1] - 1.0).abs() < 1e-9);
        assert!(r.pos_given_neg[1].abs() < 1e-9);
    }

    #[test]
    fn columns_are_probabilities() {
        let est = ClassConditionalEstimate::from_accuracies(&[0.5, -0.2], 0.4).unwrap();
        for i in 0..2 {
            let mu = est.mu(i);
            assert!((mu[0][0] + mu[1][0] - 1.0).abs() < 1e-15);
            assert!((mu[0][1] + mu[1][1] - 1.0).abs() < 1e-15);
        }
        assert!((est.accuracy(0) - 0.5).abs() < 1e-15);
    }
}
