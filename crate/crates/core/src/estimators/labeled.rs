use super::{AccuracyEstimate, ClassConditionalEstimate, LabeledMoments, Method};
use crate::data::SourceMatrix;
use crate::error::{Error, Result};

/// Mean of `lambda_i * y` over labelled rows.
pub fn estimate_labeled(data: &SourceMatrix) -> Result<AccuracyEstimate> {
    Ok(estimate_labeled_from(&LabeledMoments::from_matrix(data)?))
}

pub fn estimate_labeled_from(stats: &LabeledMoments) -> AccuracyEstimate {
    AccuracyEstimate::new(stats.agreement().to_vec(), Method::Labeled)
}

/// Class-conditional vote frequencies `Pr(lambda_i = +1 | Y = y)` counted
/// directly from labelled rows. `class_balance` is taken as given.
pub fn estimate_class_conditional_labeled(
    stats: &LabeledMoments,
    class_balance: f64,
) -> Result<ClassConditionalEstimate> {
    let (n_pos, n_neg) = (stats.n_pos(), stats.n_neg());
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Estimation(format!(
            "labelled sample needs both classes (got {n_pos} positive, {n_neg} negative)"
        )));
    }
    let pos = stats.on_pos().iter().map(|&c| c as f64 / n_pos as f64).collect();
    let neg = stats.on_neg().iter().map(|&c| c as f64 / n_neg as f64).collect();
    ClassConditionalEstimate::new(pos, neg, class_balance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_sources_have_unit_accuracy() {
        let rows = vec![vec![1, 1], vec![-1, -1], vec![1, 1]];
        let data = SourceMatrix::from_rows(&rows, Some(vec![1, -1, 1])).unwrap();
        assert_eq!(estimate_labeled(&data).unwrap().a_hat, vec![1.0, 1.0]);
    }

    #[test]
    fn direct_average() {
        let rows = vec![vec![1], vec![1], vec![-1], vec![1]];
        let data = SourceMatrix::from_rows(&rows, Some(vec![1, 1, 1, 1])).unwrap();
        assert_eq!(estimate_labeled(&data).unwrap().a_hat, vec![0.5]);
    }

    #[test]
    fn missing_labels_is_contract_error() {
        let data = SourceMatrix::from_rows(&[vec![1]], None).unwrap();
        assert!(matches!(estimate_labeled(&data), Err(Error::Contract(_))));
    }

    #[test]
    fn class_conditional_counts() {
        let rows = vec![vec![1], vec![-1], vec![1], vec![-1]];
        let data = SourceMatrix::from_rows(&rows, Some(vec![1, 1, -1, -1])).unwrap();
        let stats = LabeledMoments::from_matrix(&data).unwrap();
        let cc = estimate_class_conditional_labeled(&stats, 0.5).unwrap();
        assert_eq!(cc.pos_given_pos, vec![0.5]);
        assert_eq!(cc.pos_given_neg, vec![0.5]);
    }
}
