//! Exact error decomposition, exact generalisation error and bound evaluators.

mod bounds;
mod decomposition;
mod median;

pub use bounds::{
    approx_data_value_ratio, bound_labeled, bound_lower_unlabeled, bound_report, bound_unlabeled,
    BoundConstants, BoundInputs, BoundReport, Setting, UnlabeledBound, VTilde, DROPPED_TERMS_NOTE,
};
pub use decomposition::{
    conditional_entropy, decompose, exact_generalization_error, DecompositionReport, ExcessReport,
};
pub use median::{median_conditions_hold, median_mse, MedianMse};
