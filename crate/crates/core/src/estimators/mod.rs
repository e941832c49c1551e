//! Accuracy estimation: direct labelled moments, the triplet method with
//! three aggregation rules, class-conditional (quadratic) triplets, and
//! labelled/unlabelled combinations.

mod combine;
mod labeled;
mod moments;
mod quadratic;
mod triplet;

use serde::{Deserialize, Serialize};

pub use combine::{combine_green_strawderman, combine_linear, default_gs_radius, mahalanobis_norm};
pub use labeled::{estimate_class_conditional_labeled, estimate_labeled, estimate_labeled_from};
pub use moments::{LabeledMoments, PairwiseMoments};
pub use quadratic::{
    estimate_quadratic_triplet, estimate_quadratic_triplet_from, solve_quadratic_triplet,
    ClassConditionalEstimate, QuadraticRoot,
};
pub use triplet::{estimate_triplet, estimate_triplet_from, triplet_raw, DEFAULT_FLOOR};

/// How per-triplet values are reduced to one estimate per source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// One uniformly random pair `(j, k)`.
    Single,
    /// Mean over all usable pairs.
    Mean,
    /// Lower median over all usable pairs.
    Median,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "single-random" => Ok(Self::Single),
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => Err(format!("unknown aggregation {other:?} (single|mean|median)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Labeled,
    TripletSingle,
    TripletMean,
    TripletMedian,
    CombinedLinear,
    CombinedGreenStrawderman,
}

impl Method {
    pub fn triplet(agg: Aggregation) -> Self {
        match agg {
            Aggregation::Single => Method::TripletSingle,
            Aggregation::Mean => Method::TripletMean,
            Aggregation::Median => Method::TripletMedian,
        }
    }
}

/// Per-source bookkeeping of which triplets fed an estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TripletCensus {
    /// Triplets whose value entered the aggregate.
    pub used: Vec<usize>,
    /// Triplets skipped because the denominator fell below the floor.
    pub degenerate: Vec<usize>,
    /// Triplets skipped because they touch a known dependency.
    pub excluded: Vec<usize>,
}

/// Estimated accuracies `E[lambda_i Y]` with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimate {
    pub a_hat: Vec<f64>,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub census: Option<TripletCensus>,
    /// Weight on the unlabelled estimate for combined methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Shrinkage radius used by the Green-Strawderman combination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl AccuracyEstimate {
    pub fn new(a_hat: Vec<f64>, method: Method) -> Self {
        Self {
            a_hat: a_hat.into_iter().map(|a| a.clamp(-1.0, 1.0)).collect(),
            method,
            aggregation: None,
            census: None,
            alpha: None,
            radius: None,
        }
    }

    pub fn m(&self) -> usize {
        self.a_hat.len()
    }
}
