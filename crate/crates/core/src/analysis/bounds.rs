//! Upper and lower bounds on excess generalisation error. Lower-order
//! `o(1/n)` terms are dropped throughout; every report says so in `notes`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::ModelDiagnostics;

pub const DROPPED_TERMS_NOTE: &str = "o(1/n) terms omitted";

/// Constants of the unlabelled bound, functions of `a_min`, `b_min`, `a_bar_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `1 / (2 (1 - max_i a_i^2))`.
    pub c_rho: f64,
}

impl BoundConstants {
    pub fn from_diagnostics(diag: &ModelDiagnostics) -> Result<Self> {
        let a_bar = diag.a_bar_max.ok_or_else(|| {
            Error::DegenerateConstant("a_bar_max needs at least three sources".into())
        })?;
        Self::new(diag.a_min, diag.b_min, a_bar, diag.max_accuracy())
    }

    pub fn new(a_min: f64, b_min: f64, a_bar_max: f64, a_max: f64) -> Result<Self> {
        if !(a_bar_max.abs() < 1.0) {
            return Err(Error::DegenerateConstant(format!(
                "a_bar_max = {a_bar_max} must be below 1"
            )));
        }
        if !(a_max.abs() < 1.0) {
            return Err(Error::DegenerateConstant(format!("max_i a_i = {a_max} must be below 1")));
        }
        if !(a_min > 0.0 && b_min > 0.0 && b_min <= 1.0) {
            return Err(Error::DegenerateConstant(format!(
                "need a_min > 0 and b_min in (0, 1], got a_min = {a_min}, b_min = {b_min}"
            )));
        }
        let (a2, b2) = (a_min * a_min, b_min * b_min);
        let b4 = b2 * b2;
        let gap = 1.0 - a_bar_max * a_bar_max;
        let inv = 1.0 / b4 + 2.0 / b2;
        let c1 = 2.0 / (b2 * a2) * (1.0 + 1.0 / (gap * b2 * a2));
        let c2 = 1.0 / (gap * b2 * a2) * (3.0 * (1.0 - b2) / b2 * inv).sqrt();
        let c3 = 3.0 * (1.0 - b2) / (gap * gap * b4 * a2) * inv;
        let c4 = 3.0 * (1.0 - b2) / (8.0 * b2 * gap) * inv;
        let c_rho = 1.0 / (2.0 * (1.0 - a_max * a_max));
        Ok(Self {
            c1,
            c2,
            c3,
            c4,
            c_rho,
        })
    }
}

/// `m / (2 n_L) + B_I`.
pub fn bound_labeled(diag: &ModelDiagnostics, n_l: u64) -> Result<f64> {
    if n_l == 0 {
        return Err(Error::InvalidInput("n_L must be at least 1".into()));
    }
    Ok(diag.m as f64 / (2.0 * n_l as f64) + diag.b_i)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledBound {
    #[serde(flatten)]
    pub constants: BoundConstants,
    /// `eps_max (c1 d / m + c2 / sqrt(n_U) + c3 d / (m n_U))`.
    #[serde(rename = "B_est")]
    pub b_est: f64,
    /// `B_est + c4 m / n_U + B_I`.
    #[serde(rename = "R_U")]
    pub value: f64,
}

pub fn bound_unlabeled(diag: &ModelDiagnostics, n_u: u64, d: usize) -> Result<UnlabeledBound> {
    if n_u == 0 {
        return Err(Error::InvalidInput("n_U must be at least 1".into()));
    }
    let k = BoundConstants::from_diagnostics(diag)?;
    let (m, n, d) = (diag.m as f64, n_u as f64, d as f64);
    let b_est = diag.eps_max * (k.c1 * d / m + k.c2 / n.sqrt() + k.c3 * d / (m * n));
    Ok(UnlabeledBound {
        constants: k,
        b_est,
        value: b_est + k.c4 * m / n + diag.b_i,
    })
}

/// `(m - 2d) d^2 eps_min^2 b_min^4 / (2 (m-1)^2 (m-2)^2) + B_I`, valid as
/// `n_U -> infinity`.
pub fn bound_lower_unlabeled(diag: &ModelDiagnostics, d: usize) -> Result<f64> {
    let m = diag.m as f64;
    if diag.m < 3 {
        return Err(Error::InvalidInput("the lower bound needs m >= 3".into()));
    }
    let d = d as f64;
    let b4 = diag.b_min.powi(4);
    let first = (m - 2.0 * d) * d * d * diag.eps_min * diag.eps_min * b4
        / (2.0 * (m - 1.0).powi(2) * (m - 2.0).powi(2));
    Ok(first + diag.b_i)
}

/// Every bound for one model at one `(n_U, n_L)`, named after the symbols
/// in the theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    #[serde(flatten)]
    pub constants: BoundConstants,
    #[serde(rename = "B_I")]
    pub b_i: f64,
    #[serde(rename = "B_est")]
    pub b_est: f64,
    #[serde(rename = "R_L")]
    pub r_l: f64,
    #[serde(rename = "R_U")]
    pub r_u: f64,
    /// `c_rho m rho + B_I`; present when `rho` was supplied.
    #[serde(rename = "R_M", skip_serializing_if = "Option::is_none")]
    pub r_m: Option<f64>,
    pub lower: f64,
    #[serde(rename = "V_tilde")]
    pub v_tilde: VTilde,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m: usize,
    pub d: usize,
    #[serde(rename = "n_U")]
    pub n_u: u64,
    #[serde(rename = "n_L")]
    pub n_l: u64,
    pub eps_max: f64,
    pub eps_min: f64,
    pub a_min: f64,
    pub b_min: f64,
    pub a_bar_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

/// Approximate data value ratios per setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VTilde {
    pub well_specified: f64,
    pub misspecified: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    WellSpecified,
    Misspecified,
    Corrected,
}

/// Closed-form approximate data value ratio. `rho` is required for the
/// corrected setting.
pub fn approx_data_value_ratio(
    k: &BoundConstants,
    setting: Setting,
    m: usize,
    d: usize,
    eps_max: f64,
    n_u: u64,
    rho: Option<f64>,
) -> Result<f64> {
    let (m, d, n) = (m as f64, d as f64, n_u as f64);
    match setting {
        Setting::WellSpecified => Ok(2.0 * k.c4),
        Setting::Misspecified => Ok(2.0
            * eps_max
            * (k.c1 * d * n / m + k.c2 * n.sqrt() / m + k.c3 * d / (m * m))
            + 2.0 * k.c4),
        Setting::Corrected => {
            let rho = rho.ok_or_else(|| {
                Error::InvalidInput("the corrected setting needs an estimate of rho".into())
            })?;
            Ok(2.0 * n * k.c_rho * rho)
        }
    }
}

pub fn bound_report(
    diag: &ModelDiagnostics,
    n_u: u64,
    n_l: u64,
    rho: Option<f64>,
) -> Result<BoundReport> {
    let d = diag.d();
    let unl = bound_unlabeled(diag, n_u, d)?;
    let k = unl.constants;
    let v = |s| approx_data_value_ratio(&k, s, diag.m, d, diag.eps_max, n_u, rho);
    Ok(BoundReport {
        inputs: BoundInputs {
            m: diag.m,
            d,
            n_u,
            n_l,
            eps_max: diag.eps_max,
            eps_min: diag.eps_min,
            a_min: diag.a_min,
            b_min: diag.b_min,
            a_bar_max: diag.a_bar_max.unwrap_or(f64::NAN),
            rho,
        },
        constants: k,
        b_i: diag.b_i,
        b_est: unl.b_est,
        r_l: bound_labeled(diag, n_l)?,
        r_u: unl.value,
        r_m: rho.map(|r| k.c_rho * diag.m as f64 * r + diag.b_i),
        lower: bound_lower_unlabeled(diag, d)?,
        v_tilde: VTilde {
            well_specified: v(Setting::WellSpecified)?,
            misspecified: v(Setting::Misspecified)?,
            corrected: rho.map(|_| v(Setting::Corrected)).transpose()?,
        },
        notes: vec![
            DROPPED_TERMS_NOTE.to_string(),
            "b_min and a_bar_max are taken from population moments".to_string(),
        ],
    })
}
