use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::Aggregation;
use crate::ising::{calibrate, CalibrationTarget, IsingModel, ModelFile};

/// Source accuracies of the reference synthetic model (m = 10).
pub const F1_ACCURACIES: [f64; 10] = [
    0.6893, 0.6072, 0.5954, 0.6603, 0.6939, 0.6346, 0.7462, 0.6870, 0.6462, 0.6284,
];

/// Misspecification of every edge in the reference model.
pub const F1_EPS: f64 = 0.1;

/// Unit of the reference `n_L` search grid: 10..100 step 1, 100..1000 step 2,
/// 1000..=5000 step 10.
pub fn dvr_grid() -> Vec<u64> {
    (10..100)
        .chain((100..1000).step_by(2))
        .chain((1000..=5000).step_by(10))
        .collect()
}

/// Reference model with edges `(0,1), (2,3), ...`, `d <= 5`.
pub fn f1_target(d: usize) -> CalibrationTarget {
    let edges: Vec<(usize, usize)> = (0..d).map(|k| (2 * k, 2 * k + 1)).collect();
    CalibrationTarget {
        accuracies: F1_ACCURACIES.to_vec(),
        eps: vec![F1_EPS; edges.len()],
        edges,
        class_balance: 0.5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Calibrated to target accuracies and edge misspecification.
    Targets(CalibrationTarget),
    /// Canonical parameters given directly.
    Explicit(ModelFile),
}

impl ModelSpec {
    pub fn f1(d: usize) -> Self {
        ModelSpec::Targets(f1_target(d))
    }

    pub fn build(&self) -> Result<IsingModel> {
        match self {
            ModelSpec::Targets(t) => calibrate(t),
            ModelSpec::Explicit(f) => IsingModel::from_file(f),
        }
    }
}

/// Estimators the harness can run per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Labeled,
    TripletSingle,
    TripletMean,
    TripletMedian,
}

impl Estimator {
    pub fn is_labeled(self) -> bool {
        self == Estimator::Labeled
    }

    pub fn aggregation(self) -> Option<Aggregation> {
        match self {
            Estimator::Labeled => None,
            Estimator::TripletSingle => Some(Aggregation::Single),
            Estimator::TripletMean => Some(Aggregation::Mean),
            Estimator::TripletMedian => Some(Aggregation::Median),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Labeled => "labeled",
            Estimator::TripletSingle => "triplet-single",
            Estimator::TripletMean => "triplet-mean",
            Estimator::TripletMedian => "triplet-median",
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "labeled" => Ok(Estimator::Labeled),
            "triplet-single" | "single" => Ok(Estimator::TripletSingle),
            "triplet-mean" | "mean" => Ok(Estimator::TripletMean),
            "triplet-median" | "median" => Ok(Estimator::TripletMedian),
            other => Err(format!(
                "unknown estimator {other:?} (labeled|triplet-single|triplet-mean|triplet-median)"
            )),
        }
    }
}

/// How the weight on the unlabelled estimate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum AlphaMode {
    Fixed { alpha: f64 },
    /// Scan `alpha in {0, 0.01, ..., 1}` against the trial-averaged excess.
    GridOptimal,
    GreenStrawderman {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

impl AlphaMode {
    pub fn name(&self) -> &'static str {
        match self {
            AlphaMode::Fixed { .. } => "combined-fixed",
            AlphaMode::GridOptimal => "combined-grid-optimal",
            AlphaMode::GreenStrawderman { .. } => "combined-gs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvrSpec {
    /// Unlabelled sample sizes; defaults to the config's `n_grid`.
    #[serde(default)]
    pub n_u: Vec<u64>,
    pub unlabeled: Vec<Estimator>,
    /// Candidate `n_L`; defaults to [`dvr_grid`].
    #[serde(default)]
    pub grid: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedSpec {
    pub n_u: u64,
    pub n_l: Vec<u64>,
    #[serde(default = "default_unlabeled")]
    pub unlabeled: Estimator,
    pub modes: Vec<AlphaMode>,
}

fn default_unlabeled() -> Estimator {
    Estimator::TripletMean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default = "default_roster")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dvr: Option<DvrSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<CombinedSpec>,
}

pub const DEFAULT_SEED: u64 = 20_190_527;

fn default_roster() -> Vec<Estimator> {
    vec![Estimator::Labeled, Estimator::TripletMean, Estimator::TripletMedian]
}

fn default_n_grid() -> Vec<u64> {
    vec![250, 500, 1000, 2000, 4000]
}

fn default_trials() -> usize {
    1000
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn check_grid(name: &str, grid: &[u64]) -> Result<()> {
    if grid.first() == Some(&0) {
        return Err(Error::InvalidInput(format!("{name} contains a zero sample size")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reference synthetic setup with `d` edges and default roster and grid.
    pub fn f1(d: usize) -> Self {
        Self {
            model: ModelSpec::f1(d),
            estimators: default_roster(),
            n_grid: default_n_grid(),
            trials: default_trials(),
            seed: DEFAULT_SEED,
            output: None,
            dvr: None,
            combined: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        check_grid("n_grid", &self.n_grid)?;
        if let Some(dvr) = &self.dvr {
            check_grid("dvr.n_u", &dvr.n_u)?;
            check_grid("dvr.grid", &dvr.grid)?;
            if let Some(e) = dvr.unlabeled.iter().find(|e| e.is_labeled()) {
                return Err(Error::InvalidInput(format!("dvr.unlabeled lists {e}")));
            }
        }
        if let Some(c) = &self.combined {
            check_grid("combined.n_l", &c.n_l)?;
            if c.n_u == 0 {
                return Err(Error::InvalidInput("combined.n_u must be positive".into()));
            }
            if c.unlabeled.is_labeled() {
                return Err(Error::InvalidInput("combined.unlabeled must be a triplet estimator".into()));
            }
            for mode in &c.modes {
                if let AlphaMode::Fixed { alpha } = mode {
                    if !(0.0..=1.0).contains(alpha) {
                        return Err(Error::InvalidInput(format!("fixed alpha {alpha} outside [0, 1]")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical (key-sorted, compact) JSON form.
    pub fn hash(&self) -> Result<String> {
        canonical_hash(&serde_json::to_value(self)?)
    }
}

/// Compact JSON with object keys sorted recursively.
pub fn canonical_json(value: &serde_json::Value) -> Result<String> {
    fn sort(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(map) => {
                let sorted: std::collections::BTreeMap<_, _> =
                    map.iter().map(|(k, v)| (k.clone(), sort(v))).collect();
                serde_json::Value::Object(sorted.into_iter().collect())
            }
            serde_json::Value::Array(items) => serde_json::Value::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    Ok(serde_json::to_string(&sort(value))?)
}

pub fn canonical_hash(value: &serde_json::Value) -> Result<String> {
    Ok(sha256_hex(canonical_json(value)?.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
