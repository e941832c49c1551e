use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wsmom::analysis::{bound_report, decompose, median_mse};
use wsmom::estimators::{
    estimate_class_conditional_labeled, estimate_labeled_from, estimate_quadratic_triplet_from,
    estimate_triplet_from, AccuracyEstimate, ClassConditionalEstimate, LabeledMoments,
    PairwiseMoments,
};
use wsmom::experiments::{
    CombinedSpec, DvrSpec, Estimator, Experiment, ExperimentConfig,
};
use wsmom::ising::{calibrate, CalibrationTarget, IsingModel, ModelFile};
use wsmom::label_model::{cross_entropy, f1_score, fit_empirical_lambda, LabelModel};
use wsmom::seeds::{derive_rng, tag};
use wsmom::ws::{self, run_case_study, CaseStudyConfig, Corpus, CsvIngest, Split};
use wsmom::{Error, Result, SourceMatrix};

use crate::manifest::Recorder;
use crate::{
    BoundsArgs, CalibrateArgs, Cli, Command, CombineArgs, DecomposeArgs, DvrArgs, ExperimentArgs,
    FitArgs, FitMethod, Format, InferArgs, Mode, SampleArgs, Subset, WsCommand,
};

/// On-disk fitted parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FitFile {
    Symmetric {
        class_balance: f64,
        estimate: AccuracyEstimate,
    },
    ClassConditional {
        estimate: ClassConditionalEstimate,
    },
}

impl FitFile {
    fn label_model(&self) -> Result<LabelModel> {
        match self {
            FitFile::Symmetric {
                class_balance,
                estimate,
            } => LabelModel::from_accuracies(estimate, *class_balance),
            FitFile::ClassConditional { estimate } => LabelModel::from_class_conditional(estimate),
        }
    }

    fn m(&self) -> usize {
        match self {
            FitFile::Symmetric { estimate, .. } => estimate.m(),
            FitFile::ClassConditional { estimate } => estimate.m(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn load_model(path: &Path) -> Result<IsingModel> {
    IsingModel::from_file(&read_json::<ModelFile>(path)?)
}

fn load_data(path: &Path) -> Result<SourceMatrix> {
    if !path.exists() {
        return Err(Error::InvalidInput(format!("{} does not exist", path.display())));
    }
    SourceMatrix::load(path)
}

/// Flat `key,value` rendering of a JSON object; nested keys are dotted.
fn to_key_value_csv(value: &serde_json::Value) -> String {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            serde_json::Value::Object(map) => map.iter().for_each(|(k, v)| walk(&key(k), v, out)),
            serde_json::Value::Array(items) => {
                items.iter().enumerate().for_each(|(i, v)| walk(&key(&i.to_string()), v, out))
            }
            serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", value, &mut rows);
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        let v = if v.contains(',') || v.contains('"') { format!("\"{}\"", v.replace('"', "\"\"")) } else { v };
        s += &format!("{k},{v}\n");
    }
    s
}

/// Prints a report on stdout, and writes it to `out` in the same format.
fn emit<T: Serialize>(format: Format, report: &T, out: Option<&Path>) -> Result<()> {
    let value = serde_json::to_value(report)?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&value)? + "\n",
        Format::Csv => to_key_value_csv(&value),
    };
    if let Some(p) = out {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(p, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn manifest_path(cli: &Cli, out: Option<&Path>) -> PathBuf {
    if let Some(p) = &cli.global.manifest {
        return p.clone();
    }
    match out {
        Some(p) if p.is_dir() => p.join("run.json"),
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from("wsmom-run.json"),
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let seed = cli.global.seed;
    let name = match &cli.command {
        Command::Calibrate(_) => "calibrate",
        Command::Sample(_) => "sample",
        Command::Fit(_) => "fit",
        Command::Infer(_) => "infer",
        Command::Decompose(_) => "decompose",
        Command::Bounds(_) => "bounds",
        Command::Curves(_) => "curves",
        Command::Dvr(_) => "dvr",
        Command::Combine(_) => "combine",
        Command::Ws(WsCommand::Ingest(_)) => "ws ingest",
        Command::Ws(WsCommand::Apply(_)) => "ws apply",
        Command::Ws(WsCommand::Run(_)) => "ws run",
    };
    let mut rec = Recorder::new(name, seed);
    let f = cli.global.format;
    let out: Option<PathBuf> = match &cli.command {
        Command::Calibrate(a) => Some(run_calibrate(a, f, &mut rec)?),
        Command::Sample(a) => Some(run_sample(a, seed, &mut rec)?),
        Command::Fit(a) => Some(run_fit(a, seed, f, &mut rec)?),
        Command::Infer(a) => Some(run_infer(a, f, &mut rec)?),
        Command::Decompose(a) => run_decompose(a, seed, f, &mut rec)?,
        Command::Bounds(a) => run_bounds(a, seed, f, &mut rec)?,
        Command::Curves(a) => Some(run_experiment(a, seed, f, &mut rec, |_| Ok(()))?),
        Command::Dvr(a) => Some(run_dvr(a, seed, f, &mut rec)?),
        Command::Combine(a) => Some(run_combine(a, seed, f, &mut rec)?),
        Command::Ws(WsCommand::Ingest(a)) => Some(run_ws_ingest(a, seed, &mut rec)?),
        Command::Ws(WsCommand::Apply(a)) => Some(run_ws_apply(a, &mut rec)?),
        Command::Ws(WsCommand::Run(a)) => Some(run_ws_run(a, seed, f, &mut rec)?),
    };
    let path = manifest_path(cli, out.as_deref());
    rec.finish(&path)
}

fn run_calibrate(a: &CalibrateArgs, f: Format, rec: &mut Recorder) -> Result<PathBuf> {
    let target: CalibrationTarget = match (&a.targets, a.reference) {
        (Some(p), _) => {
            rec.inputs.push(p.clone());
            read_json(p)?
        }
        (None, Some(d)) => {
            if d > 5 {
                return Err(Error::InvalidInput(format!("the reference model has at most 5 edges, got {d}")));
            }
            wsmom::experiments::f1_target(d)
        }
        (None, None) => return Err(Error::InvalidInput("give --targets or --reference".into())),
    };
    rec.config = serde_json::to_value(&target)?;
    let model = calibrate(&target)?;
    write_json(&a.out, &model.to_file())?;
    rec.outputs.push(a.out.clone());
    emit(f, &model.diagnostics(), None)?;
    Ok(a.out.clone())
}

fn run_sample(a: &SampleArgs, seed: u64, rec: &mut Recorder) -> Result<PathBuf> {
    rec.inputs.push(a.model.clone());
    rec.config = serde_json::json!({ "n": a.n, "unlabeled": a.unlabeled });
    let model = load_model(&a.model)?;
    let mut rng = derive_rng(seed, &[tag("sample")]);
    let mut data = model.sample(a.n, &mut rng)?;
    if a.unlabeled {
        data = data.without_labels();
    }
    data.save(&a.out)?;
    rec.outputs.push(a.out.clone());
    Ok(a.out.clone())
}

fn fit_data(
    data: &SourceMatrix,
    method: FitMethod,
    agg: wsmom::estimators::Aggregation,
    class_balance: f64,
    known: &[(usize, usize)],
    seed: u64,
) -> Result<FitFile> {
    let mut rng = derive_rng(seed, &[tag("fit")]);
    Ok(match method {
        FitMethod::Labeled => FitFile::Symmetric {
            class_balance,
            estimate: estimate_labeled_from(&LabeledMoments::from_matrix(data)?),
        },
        FitMethod::LabeledClass => FitFile::ClassConditional {
            estimate: estimate_class_conditional_labeled(&LabeledMoments::from_matrix(data)?, class_balance)?,
        },
        FitMethod::Triplet => FitFile::Symmetric {
            class_balance,
            estimate: estimate_triplet_from(&PairwiseMoments::from_matrix(data)?, agg, &mut rng, known)?,
        },
        FitMethod::Quadratic => FitFile::ClassConditional {
            estimate: estimate_quadratic_triplet_from(&PairwiseMoments::from_matrix(data)?, class_balance, agg, &mut rng)?,
        },
    })
}

fn run_fit(a: &FitArgs, seed: u64, f: Format, rec: &mut Recorder) -> Result<PathBuf> {
    rec.inputs.push(a.data.clone());
    rec.config = serde_json::json!({
        "method": format!("{:?}", a.method).to_lowercase(),
        "agg": a.agg,
        "class_balance": a.class_balance,
        "known_edges": a.known_edges,
    });
    let data = load_data(&a.data)?;
    let fit = fit_data(&data, a.method, a.agg, a.class_balance, &a.known_edges, seed)?;
    write_json(&a.out, &fit)?;
    rec.outputs.push(a.out.clone());
    emit(f, &fit, None)?;
    Ok(a.out.clone())
}

#[derive(Serialize)]
struct InferSummary {
    n: usize,
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<f64>,
}

fn run_infer(a: &InferArgs, f: Format, rec: &mut Recorder) -> Result<PathBuf> {
    rec.inputs.extend([a.fit.clone(), a.data.clone()]);
    rec.config = serde_json::json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "smoothing": a.smoothing,
    });
    let fit: FitFile = read_json(&a.fit)?;
    let data = load_data(&a.data)?;
    if fit.m() != data.m() {
        return Err(Error::InvalidInput(format!(
            "fit has {} sources, data has {}",
            fit.m(),
            data.m()
        )));
    }
    let mut lm = fit.label_model()?;
    if a.mode == Mode::Empirical {
        lm = lm.with_empirical(fit_empirical_lambda(&data, a.smoothing)?)?;
    }
    let soft = lm.soft_labels(&data)?;
    soft.write_csv(fs::File::create(&a.out)?)?;
    rec.outputs.push(a.out.clone());
    let labelled = data.has_labels();
    let summary = InferSummary {
        n: data.n(),
        mode: if a.mode == Mode::Empirical { "empirical" } else { "normalized" },
        cross_entropy: labelled.then(|| cross_entropy(&lm, &data)).transpose()?,
        f1: labelled.then(|| f1_score(&lm, &data, 0.5).map(|s| s.f1)).transpose()?,
    };
    emit(f, &summary, None)?;
    Ok(a.out.clone())
}

fn run_decompose(a: &DecomposeArgs, seed: u64, f: Format, rec: &mut Recorder) -> Result<Option<PathBuf>> {
    rec.inputs.extend([a.model.clone(), a.data.clone()]);
    rec.inputs.extend(a.fit.clone());
    rec.config = serde_json::json!({
        "method": format!("{:?}", a.method).to_lowercase(),
        "agg": a.agg,
        "smoothing": a.smoothing,
    });
    let model = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    let p = model.class_balance();
    let fit = match &a.fit {
        Some(path) => read_json(path)?,
        None => fit_data(&data, a.method, a.agg, p, &[], seed)?,
    };
    let lm = fit
        .label_model()?
        .with_empirical(fit_empirical_lambda(&data, a.smoothing)?)?;
    let report = decompose(&model, &lm)?;
    emit(f, &report, a.out.as_deref())?;
    rec.outputs.extend(a.out.clone());
    Ok(a.out.clone())
}

fn run_bounds(a: &BoundsArgs, seed: u64, f: Format, rec: &mut Recorder) -> Result<Option<PathBuf>> {
    rec.inputs.push(a.model.clone());
    rec.config = serde_json::json!({ "n_U": a.n_u, "n_L": a.n_l, "rho": a.rho, "rho_trials": a.rho_trials });
    let model = load_model(&a.model)?;
    let rho = match (a.rho, a.rho_trials) {
        (Some(r), _) => Some(r),
        (None, Some(t)) => Some(median_mse(&model, Some(a.n_u), t, seed)?.rho),
        (None, None) => None,
    };
    let report = bound_report(&model.diagnostics(), a.n_u, a.n_l, rho)?;
    emit(f, &report, a.out.as_deref())?;
    rec.outputs.extend(a.out.clone());
    Ok(a.out.clone())
}

fn experiment_config(a: &ExperimentArgs, seed: u64, rec: &mut Recorder) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            rec.inputs.push(p.clone());
            let text = fs::read_to_string(p)?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
            // a config without a seed takes the command-line one
            let raw: serde_json::Value = serde_json::from_str(&text)?;
            if raw.get("seed").is_none() {
                cfg.seed = seed;
            }
            cfg
        }
        None => {
            if a.d > 5 {
                return Err(Error::InvalidInput(format!("the reference model has at most 5 edges, got {}", a.d)));
            }
            let mut cfg = ExperimentConfig::f1(a.d);
            cfg.seed = seed;
            cfg
        }
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if !a.n_grid.is_empty() {
        cfg.n_grid = a.n_grid.clone();
    }
    if !a.estimators.is_empty() {
        cfg.estimators = a.estimators.clone();
    }
    Ok(cfg)
}

fn run_experiment(
    a: &ExperimentArgs,
    seed: u64,
    f: Format,
    rec: &mut Recorder,
    adjust: impl FnOnce(&mut ExperimentConfig) -> Result<()>,
) -> Result<PathBuf> {
    let mut cfg = experiment_config(a, seed, rec)?;
    adjust(&mut cfg)?;
    cfg.validate()?;
    rec.config = serde_json::to_value(&cfg)?;
    let outputs = Experiment::new(cfg)?.run()?;
    outputs.write_dir(&a.out)?;
    rec.outputs.push(a.out.clone());
    match f {
        Format::Json => emit(f, &outputs.manifest, None)?,
        Format::Csv => {
            print!("{}", outputs.curves_csv());
            if !outputs.dvr.is_empty() {
                print!("{}", outputs.dvr_csv());
            }
            if !outputs.combined.is_empty() {
                print!("{}", outputs.combined_csv());
            }
        }
    }
    Ok(a.out.clone())
}

fn run_dvr(a: &DvrArgs, seed: u64, f: Format, rec: &mut Recorder) -> Result<PathBuf> {
    run_experiment(&a.common, seed, f, rec, |cfg| {
        cfg.estimators.clear();
        cfg.combined = None;
        let mut spec = cfg.dvr.take().unwrap_or(DvrSpec {
            n_u: Vec::new(),
            unlabeled: vec![Estimator::TripletMean, Estimator::TripletMedian],
            grid: Vec::new(),
        });
        if !a.n_u.is_empty() {
            spec.n_u = a.n_u.clone();
        }
        if !a.unlabeled.is_empty() {
            spec.unlabeled = a.unlabeled.clone();
        }
        cfg.dvr = Some(spec);
        Ok(())
    })
}

fn run_combine(a: &CombineArgs, seed: u64, f: Format, rec: &mut Recorder) -> Result<PathBuf> {
    run_experiment(&a.common, seed, f, rec, |cfg| {
        cfg.estimators.clear();
        cfg.dvr = None;
        if cfg.combined.is_none() || a.common.config.is_none() {
            cfg.combined = Some(CombinedSpec {
                n_u: a.n_u,
                n_l: a.n_l.clone(),
                unlabeled: a.unlabeled,
                modes: a.alpha.clone(),
            });
        }
        Ok(())
    })
}

fn run_ws_ingest(a: &crate::WsIngestArgs, seed: u64, rec: &mut Recorder) -> Result<PathBuf> {
    let corpus = match (&a.aclimdb, &a.csv) {
        (Some(dir), _) => {
            rec.config = serde_json::json!({ "aclimdb": dir });
            Corpus::ingest_aclimdb(dir)?
        }
        (None, Some(path)) => {
            rec.inputs.push(path.clone());
            let opts = CsvIngest {
                text_column: a.text_column.clone(),
                label_column: a.label_column.clone(),
                train_fraction: a.train_fraction,
                seed,
            };
            rec.config = serde_json::to_value(&opts)?;
            let file = fs::File::open(path)
                .map_err(|e| Error::CorpusMissing(format!("{}: {e}", path.display())))?;
            Corpus::ingest_csv(file, &opts)?
        }
        (None, None) => return Err(Error::InvalidInput("give --aclimdb or --csv".into())),
    };
    corpus.save(&a.out, &a.split)?;
    rec.outputs.extend([a.out.clone(), a.split.clone()]);
    Ok(a.out.clone())
}

fn run_ws_apply(a: &crate::WsApplyArgs, rec: &mut Recorder) -> Result<PathBuf> {
    rec.inputs.extend([a.corpus.clone(), a.split.clone()]);
    let sources = if a.sources.is_empty() { ws::default_roster() } else { a.sources.clone() };
    rec.config = serde_json::json!({ "sources": sources, "subset": format!("{:?}", a.subset).to_lowercase() });
    let corpus = Corpus::load(&a.corpus, &a.split)?;
    let idx: Vec<usize> = match a.subset {
        Subset::Train => corpus.indices(Split::Train),
        Subset::Test => corpus.indices(Split::Test),
        Subset::All => (0..corpus.len()).collect(),
    };
    let docs: Vec<ws::Document> = idx.iter().map(|&i| corpus.documents()[i].clone()).collect();
    ws::apply_sources(&docs, &sources)?.save(&a.out)?;
    rec.outputs.push(a.out.clone());
    Ok(a.out.clone())
}

fn run_ws_run(a: &crate::WsRunArgs, seed: u64, f: Format, rec: &mut Recorder) -> Result<PathBuf> {
    rec.inputs.extend([a.corpus.clone(), a.split.clone()]);
    let mut cfg: CaseStudyConfig = match &a.config {
        Some(p) => {
            rec.inputs.push(p.clone());
            read_json(p)?
        }
        None => CaseStudyConfig {
            seed,
            ..CaseStudyConfig::default()
        },
    };
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    rec.config = serde_json::to_value(&cfg)?;
    let corpus = Corpus::load(&a.corpus, &a.split)?;
    let report = run_case_study(&corpus, &cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, report.to_csv())?;
    rec.outputs.push(a.out.clone());
    match f {
        Format::Json => emit(f, &report, None)?,
        Format::Csv => print!("{}", report.to_csv()),
    }
    Ok(a.out.clone())
}
