use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CombinedRow, DvrResult, ExcessPoint, Experiment};
use crate::error::Result;

/// Deterministic description of a finished run: no timestamps, so identical
/// config and seed give byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub tool_version: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    #[serde(rename = "H_cond")]
    pub h_cond: f64,
    #[serde(rename = "B_I")]
    pub b_i: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutputs {
    pub manifest: ExperimentManifest,
    pub curves: Vec<ExcessPoint>,
    pub dvr: Vec<DvrResult>,
    pub combined: Vec<CombinedRow>,
}

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

impl ExperimentOutputs {
    pub(super) fn new(
        exp: &Experiment,
        curves: Vec<ExcessPoint>,
        dvr: Vec<DvrResult>,
        combined: Vec<CombinedRow>,
    ) -> Result<Self> {
        let config = serde_json::to_value(exp.config())?;
        let mut files = vec!["manifest.json".to_string()];
        if !curves.is_empty() {
            files.push("curves.csv".into());
        }
        if !dvr.is_empty() {
            files.push("dvr.csv".into());
            files.push("dvr_trace.csv".into());
        }
        if !combined.is_empty() {
            files.push("combined.csv".into());
        }
        Ok(Self {
            manifest: ExperimentManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: super::canonical_hash(&config)?,
                config,
                seed: exp.config().seed,
                trials: exp.config().trials,
                h_cond: exp.h_cond,
                b_i: exp.diagnostics().b_i,
                files,
            },
            curves,
            dvr,
            combined,
        })
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("estimator,n,mean,stderr,trials,failures\n");
        for p in &self.curves {
            let q = &p.summary;
            s += &format!("{},{},{},{},{},{}\n", p.estimator, p.n, fmt(q.mean), fmt(q.stderr), q.trials, q.failures);
        }
        s
    }

    pub fn dvr_csv(&self) -> String {
        let mut s = String::from("estimator,n_U,target_mean,target_stderr,f_n_U,V,bound,scanned\n");
        for r in &self.dvr {
            let bound = match r.bound {
                super::DvrBound::Exact => "exact",
                super::DvrBound::AtLeast => "at-least",
                super::DvrBound::AtMost => "at-most",
            };
            s += &format!(
                "{},{},{},{},{},{},{},{}\n",
                r.estimator,
                r.n_u,
                fmt(r.target.mean),
                fmt(r.target.stderr),
                r.f_n_u,
                fmt(r.v),
                bound,
                r.trace.len()
            );
        }
        s
    }

    pub fn dvr_trace_csv(&self) -> String {
        let mut s = String::from("estimator,n_U,n_L,mean,stderr\n");
        for r in &self.dvr {
            for st in &r.trace {
                s += &format!("{},{},{},{},{}\n", r.estimator, r.n_u, st.n_l, fmt(st.mean), fmt(st.stderr));
            }
        }
        s
    }

    pub fn combined_csv(&self) -> String {
        let mut s = String::from("estimator,n_L,n_U,mean,stderr,trials,failures,alpha\n");
        for r in &self.combined {
            let q = &r.summary;
            s += &format!(
                "{},{},{},{},{},{},{},{}\n",
                r.estimator,
                r.n_l,
                r.n_u,
                fmt(q.mean),
                fmt(q.stderr),
                q.trials,
                q.failures,
                opt(r.alpha)
            );
        }
        s
    }

    /// Writes the manifest and every non-empty table into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        if !self.curves.is_empty() {
            fs::write(dir.join("curves.csv"), self.curves_csv())?;
        }
        if !self.dvr.is_empty() {
            fs::write(dir.join("dvr.csv"), self.dvr_csv())?;
            fs::write(dir.join("dvr_trace.csv"), self.dvr_trace_csv())?;
        }
        if !self.combined.is_empty() {
            fs::write(dir.join("combined.csv"), self.combined_csv())?;
        }
        Ok(())
    }
}
