use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AccuracyEstimate, Aggregation, Method, PairwiseMoments, TripletCensus};
use crate::data::SourceMatrix;
use crate::error::{Error, Result};

/// Smallest `|E[lambda_j lambda_k]|` accepted as a triplet denominator.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// `sqrt(|M_ij M_ik / M_jk|)`, clipped to `[0, 1]`.
pub fn triplet_raw(
    moments: &PairwiseMoments,
    i: usize,
    j: usize,
    k: usize,
    floor: f64,
) -> Result<f64> {
    if i == j || i == k || j == k {
        return Err(Error::InvalidInput(format!(
            "triplet indices must be distinct, got ({i}, {j}, {k})"
        )));
    }
    let m = moments.m();
    if i >= m || j >= m || k >= m {
        return Err(Error::InvalidInput(format!("triplet index out of range for m = {m}")));
    }
    let den = moments.pair(j, k);
    if den.abs() < floor {
        return Err(Error::DegenerateTriplet {
            j,
            k,
            value: den.abs(),
            floor,
        });
    }
    let v = (moments.pair(i, j) * moments.pair(i, k) / den).abs().sqrt();
    Ok(v.min(1.0))
}

fn touches(known: &[(usize, usize)], a: usize, b: usize) -> bool {
    known
        .iter()
        .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
}

/// Triplet estimate from a vote matrix; `seed` drives single-random selection.
pub fn estimate_triplet(
    data: &SourceMatrix,
    aggregation: Aggregation,
    seed: u64,
    known_edges: &[(usize, usize)],
) -> Result<AccuracyEstimate> {
    let moments = PairwiseMoments::from_matrix(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    estimate_triplet_from(&moments, aggregation, &mut rng, known_edges)
}

/// Triplet estimate from precomputed moments.
///
/// Pairs `(j, k)` are skipped for source `i` when any of `(i,j)`, `(i,k)`,
/// `(j,k)` is a known edge, or when `|M_jk|` is below [`DEFAULT_FLOOR`].
/// Single-random aggregation draws uniformly among the remaining pairs.
pub fn estimate_triplet_from<R: Rng + ?Sized>(
    moments: &PairwiseMoments,
    aggregation: Aggregation,
    rng: &mut R,
    known_edges: &[(usize, usize)],
) -> Result<AccuracyEstimate> {
    let m = moments.m();
    if m < 3 {
        return Err(Error::InvalidInput(format!(
            "triplet estimation needs m >= 3, got {m}"
        )));
    }
    let mut census = TripletCensus {
        used: vec![0; m],
        degenerate: vec![0; m],
        excluded: vec![0; m],
    };
    let mut a_hat = Vec::with_capacity(m);
    let mut values = Vec::with_capacity((m - 1) * (m - 2) / 2);
    for i in 0..m {
        values.clear();
        for j in 0..m {
            for k in (j + 1)..m {
                if j == i || k == i {
                    continue;
                }
                if touches(known_edges, i, j) || touches(known_edges, i, k) || touches(known_edges, j, k)
                {
                    census.excluded[i] += 1;
                    continue;
                }
                match triplet_raw(moments, i, j, k, DEFAULT_FLOOR) {
                    Ok(v) => values.push(v),
                    Err(Error::DegenerateTriplet { .. }) => census.degenerate[i] += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        if values.is_empty() {
            return Err(Error::Estimation(format!(
                "no usable triplet for source {i} ({} degenerate, {} excluded)",
                census.degenerate[i], census.excluded[i]
            )));
        }
        let est = match aggregation {
            Aggregation::Single => {
                census.used[i] = 1;
                values[rng.random_range(0..values.len())]
            }
            Aggregation::Mean => {
                census.used[i] = values.len();
                values.iter().sum::<f64>() / values.len() as f64
            }
            Aggregation::Median => {
                census.used[i] = values.len();
                lower_median(&mut values)
            }
        };
        a_hat.push(est);
    }
    let mut out = AccuracyEstimate::new(a_hat, Method::triplet(aggregation));
    out.aggregation = Some(aggregation);
    out.census = Some(census);
    Ok(out)
}

pub(crate) fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorized(a: &[f64]) -> PairwiseMoments {
        let m = a.len();
        let mut second = vec![1.0; m * m];
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    second[i * m + j] = a[i] * a[j];
                }
            }
        }
        PairwiseMoments::new(m, None, vec![0.0; m], second).unwrap()
    }

    #[test]
    fn factorized_moments_give_exact_accuracy() {
        let mom = factorized(&[0.6, 0.7, 0.8]);
        assert!((triplet_raw(&mom, 0, 1, 2, DEFAULT_FLOOR).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn self_agreement_is_one() {
        // column i duplicates column j: M_ij = 1, M_ik = M_jk
        let second = vec![1.0, 1.0, 0.5, 1.0, 1.0, 0.5, 0.5, 0.5, 1.0];
        let mom = PairwiseMoments::new(3, None, vec![0.0; 3], second).unwrap();
        assert_eq!(triplet_raw(&mom, 0, 1, 2, DEFAULT_FLOOR).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        let mom = factorized(&[0.6, 0.0, 0.8]);
        let err = triplet_raw(&mom, 0, 1, 2, DEFAULT_FLOOR).unwrap_err();
        assert!(matches!(err, Error::DegenerateTriplet { j: 1, k: 2, .. }));
    }

    #[test]
    fn every_aggregation_is_exact_when_factorized() {
        let a = [0.3, 0.5, 0.65, 0.7, 0.9];
        let mom = factorized(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for agg in [Aggregation::Single, Aggregation::Mean, Aggregation::Median] {
            let est = estimate_triplet_from(&mom, agg, &mut rng, &[]).unwrap();
            for (x, y) in est.a_hat.iter().zip(&a) {
                assert!((x - y).abs() < 1e-12, "{agg:?}");
            }
        }
    }

    #[test]
    fn known_edges_are_counted() {
        let mom = factorized(&[0.6, 0.6, 0.6, 0.6]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = estimate_triplet_from(&mom, Aggregation::Mean, &mut rng, &[(0, 1)]).unwrap();
        let c = est.census.unwrap();
        // source 0: pairs (1,2),(1,3) excluded, (2,3) used
        assert_eq!((c.used[0], c.excluded[0]), (1, 2));
        // source 2: pair (0,1) excluded
        assert_eq!((c.used[2], c.excluded[2]), (2, 1));
    }

    #[test]
    fn lower_median_breaks_ties_low() {
        assert_eq!(lower_median(&mut [4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(lower_median(&mut [3.0, 1.0, 2.0]), 2.0);
    }
}
