//! Keyword weak supervision over a text corpus: ingestion, keyword sources,
//! class-conditional label models and test-set evaluation.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SourceMatrix;
use crate::error::{Error, Result};
use crate::estimators::{
    combine_green_strawderman, estimate_class_conditional_labeled, estimate_quadratic_triplet_from,
    AccuracyEstimate, Aggregation, ClassConditionalEstimate, LabeledMoments, Method, PairwiseMoments,
};
use crate::label_model::{cross_entropy, f1_score, LabelModel};
use crate::seeds::{derive_rng, tag};

const FETCH_HINT: &str = "download the Large Movie Review Dataset (aclImdb) yourself, then run \
     `wsmom ws ingest --aclimdb <dir> --out <corpus.jsonl> --split <split.json>`";

/// Votes on presence of one lowercased token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSource {
    pub word: String,
    /// `+1`: votes `+1` when present, `-1` otherwise. `-1`: the reverse.
    pub sentiment: i8,
}

impl KeywordSource {
    pub fn new(word: &str, sentiment: i8) -> Result<Self> {
        let word = word.to_lowercase();
        if word.is_empty() || !word.chars().all(char::is_alphanumeric) {
            return Err(Error::InvalidInput(format!(
                "keyword {word:?} must be a single nonempty alphanumeric token"
            )));
        }
        if sentiment != 1 && sentiment != -1 {
            return Err(Error::InvalidInput(format!("sentiment must be +1 or -1, got {sentiment}")));
        }
        Ok(Self { word, sentiment })
    }

    pub fn vote(&self, tokens: &HashSet<String>) -> i8 {
        if tokens.contains(&self.word) {
            self.sentiment
        } else {
            -self.sentiment
        }
    }
}

impl std::str::FromStr for KeywordSource {
    type Err = Error;

    /// `word:+` / `word:-` (also `word:+1`, `word:-1`).
    fn from_str(s: &str) -> Result<Self> {
        let (word, sign) = s
            .rsplit_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("expected word:+ or word:-, got {s:?}")))?;
        let sentiment = match sign {
            "+" | "+1" | "1" => 1,
            "-" | "-1" => -1,
            other => return Err(Error::InvalidInput(format!("bad sentiment {other:?} in {s:?}"))),
        };
        Self::new(word, sentiment)
    }
}

pub fn default_roster() -> Vec<KeywordSource> {
    let pos = ["love", "like", "good", "great", "best", "excellent"];
    let neg = ["terrible", "worst", "bad", "better", "could", "would"];
    pos.iter()
        .map(|w| KeywordSource::new(w, 1))
        .chain(neg.iter().map(|w| KeywordSource::new(w, -1)))
        .collect::<Result<_>>()
        .expect("static roster")
}

/// Lowercase, split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Split manifest: document ids per split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    split: Vec<Split>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, split: Vec<Split>) -> Result<Self> {
        if documents.len() != split.len() {
            return Err(Error::InvalidInput("one split entry per document is required".into()));
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate document id {:?}", d.id)));
            }
            if let Some(l) = d.label {
                if l != 1 && l != -1 {
                    return Err(Error::InvalidInput(format!("label of {:?} must be +1 or -1, got {l}", d.id)));
                }
            }
        }
        Ok(Self { documents, split })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn split_of(&self, i: usize) -> Split {
        self.split[i]
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == which).collect()
    }

    pub fn split_manifest(&self) -> SplitManifest {
        let mut out = SplitManifest::default();
        for (d, s) in self.documents.iter().zip(&self.split) {
            match s {
                Split::Train => out.train.push(d.id.clone()),
                Split::Test => out.test.push(d.id.clone()),
            }
        }
        out
    }

    /// Documents as JSONL plus a split manifest.
    pub fn read(docs: impl Read, split: &SplitManifest) -> Result<Self> {
        let mut documents = Vec::new();
        for (k, line) in BufReader::new(docs).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("corpus line {}: {e}", k + 1)))?;
            documents.push(doc);
        }
        let mut which: HashMap<&str, Split> = HashMap::new();
        for (ids, s) in [(&split.train, Split::Train), (&split.test, Split::Test)] {
            for id in ids {
                if which.insert(id.as_str(), s).is_some() {
                    return Err(Error::Format(format!("id {id:?} appears twice in the split manifest")));
                }
            }
        }
        let split = documents
            .iter()
            .map(|d| {
                which
                    .get(d.id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Format(format!("document {:?} has no split", d.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(documents, split)
    }

    pub fn write(&self, mut docs: impl Write) -> Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut docs, d)?;
            docs.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Missing files are reported as [`Error::CorpusMissing`].
    pub fn load(docs: &Path, split: &Path) -> Result<Self> {
        for p in [docs, split] {
            if !p.exists() {
                return Err(Error::CorpusMissing(format!("{} not found; {FETCH_HINT}", p.display())));
            }
        }
        let manifest: SplitManifest = serde_json::from_slice(&fs::read(split)?)?;
        Self::read(fs::File::open(docs)?, &manifest)
    }

    pub fn save(&self, docs: &Path, split: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(fs::File::create(docs)?))?;
        fs::write(split, serde_json::to_string(&self.split_manifest())?)?;
        Ok(())
    }

    /// The `aclImdb/{train,test}/{pos,neg}/*.txt` layout; ids are
    /// `split/class/file-stem`, files in name order.
    pub fn ingest_aclimdb(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::CorpusMissing(format!("{} is not a directory; {FETCH_HINT}", root.display())));
        }
        let mut documents = Vec::new();
        let mut split = Vec::new();
        for (dir, s) in [("train", Split::Train), ("test", Split::Test)] {
            for (class, label) in [("pos", 1i8), ("neg", -1i8)] {
                let path = root.join(dir).join(class);
                if !path.is_dir() {
                    return Err(Error::CorpusMissing(format!("{} is missing; {FETCH_HINT}", path.display())));
                }
                let mut files: Vec<_> = fs::read_dir(&path)?
                    .map(|e| e.map(|e| e.path()))
                    .collect::<std::io::Result<_>>()?;
                files.retain(|p| p.extension().is_some_and(|x| x == "txt"));
                files.sort();
                for f in files {
                    let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                    documents.push(Document {
                        id: format!("{dir}/{class}/{stem}"),
                        text: fs::read_to_string(&f)?,
                        label: Some(label),
                    });
                    split.push(s);
                }
            }
        }
        Self::new(documents, split)
    }

    /// A CSV with a text column and a label column (`positive`/`negative`,
    /// `pos`/`neg`, `1`/`-1`/`0`). Rows are split by a seeded shuffle.
    pub fn ingest_csv(reader: impl Read, opts: &CsvIngest) -> Result<Self> {
        if !(0.0..=1.0).contains(&opts.train_fraction) {
            return Err(Error::InvalidInput("train fraction must lie in [0, 1]".into()));
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Format(format!("CSV has no column {name:?}")))
        };
        let (tc, lc) = (col(&opts.text_column)?, col(&opts.label_column)?);
        let mut documents = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let raw = rec.get(lc).unwrap_or_default().trim().to_lowercase();
            let label = match raw.as_str() {
                "positive" | "pos" | "1" | "+1" => 1,
                "negative" | "neg" | "-1" | "0" => -1,
                other => return Err(Error::Format(format!("row {}: unknown label {other:?}", k + 1))),
            };
            documents.push(Document {
                id: format!("row{k}"),
                text: rec.get(tc).unwrap_or_default().to_string(),
                label: Some(label),
            });
        }
        let mut order: Vec<usize> = (0..documents.len()).collect();
        order.shuffle(&mut derive_rng(opts.seed, &[tag("csv-split")]));
        let n_train = (opts.train_fraction * documents.len() as f64).round() as usize;
        let mut split = vec![Split::Test; documents.len()];
        for &i in &order[..n_train] {
            split[i] = Split::Train;
        }
        Self::new(documents, split)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvIngest {
    pub text_column: String,
    pub label_column: String,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for CsvIngest {
    fn default() -> Self {
        Self {
            text_column: "review".into(),
            label_column: "sentiment".into(),
            train_fraction: 0.8,
            seed: crate::experiments::DEFAULT_SEED,
        }
    }
}

/// Vote matrix of `documents` under `sources`, one row per document in
/// order. Labels are attached when every document has one.
pub fn apply_sources(documents: &[Document], sources: &[KeywordSource]) -> Result<SourceMatrix> {
    if sources.is_empty() {
        return Err(Error::InvalidInput("no keyword sources".into()));
    }
    let values: Vec<i8> = documents
        .par_iter()
        .flat_map_iter(|d| {
            let tokens: HashSet<String> = tokenize(&d.text).collect();
            sources.iter().map(move |s| s.vote(&tokens)).collect::<Vec<_>>()
        })
        .collect();
    let labels = documents.iter().map(|d| d.label).collect::<Option<Vec<i8>>>();
    SourceMatrix::new(sources.len(), values, labels)
}

/// How the combined model weighs its unlabelled estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum CaseAlpha {
    Fixed { alpha: f64 },
    /// Weight from the Green-Strawderman rule on the implied accuracies.
    GreenStrawderman {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedCase {
    #[serde(rename = "n_U")]
    pub n_u: usize,
    #[serde(rename = "n_L")]
    pub n_l: Vec<usize>,
    pub alpha: CaseAlpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyConfig {
    #[serde(default = "default_roster")]
    pub sources: Vec<KeywordSource>,
    #[serde(default = "half")]
    pub class_balance: f64,
    /// Training subsample sizes for the individual models.
    #[serde(default = "default_case_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<CombinedCase>,
    /// Subsamples per size; a size equal to the training set uses one.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_case_seed")]
    pub seed: u64,
    #[serde(default = "half")]
    pub threshold: f64,
}

fn half() -> f64 {
    0.5
}

fn default_case_grid() -> Vec<usize> {
    vec![40_000]
}

fn default_repeats() -> usize {
    10
}

fn default_case_seed() -> u64 {
    crate::experiments::DEFAULT_SEED
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            sources: default_roster(),
            class_balance: 0.5,
            n_grid: default_case_grid(),
            combined: Some(CombinedCase {
                n_u: 40_000,
                n_l: vec![40, 80, 120, 200, 400],
                alpha: CaseAlpha::GreenStrawderman { radius: None },
            }),
            repeats: default_repeats(),
            seed: default_case_seed(),
            threshold: 0.5,
        }
    }
}

/// One line of the metrics table; metrics are means over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    /// `labeled`, `unlabeled-mean`, `unlabeled-median` or `combined`.
    pub model: String,
    #[serde(rename = "n_L")]
    pub n_l: Option<usize>,
    #[serde(rename = "n_U")]
    pub n_u: Option<usize>,
    pub cross_entropy: f64,
    pub cross_entropy_stderr: f64,
    /// On the positive class, in `[0, 1]`.
    pub f1: f64,
    pub f1_stderr: f64,
    pub alpha: Option<f64>,
    pub repeats: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub rows: Vec<CaseStudyRow>,
    pub n_train: usize,
    pub n_test: usize,
}

impl CaseStudyReport {
    pub fn find(&self, model: &str, n_l: Option<usize>, n_u: Option<usize>) -> Option<&CaseStudyRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.n_l == n_l && r.n_u == n_u)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("model,n_L,n_U,cross_entropy,cross_entropy_stderr,f1,f1_stderr,alpha,repeats,failures\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}\n",
                r.model,
                opt(r.n_l),
                opt(r.n_u),
                r.cross_entropy,
                r.cross_entropy_stderr,
                r.f1,
                r.f1_stderr,
                r.alpha.map(|a| format!("{a:.4}")).unwrap_or_default(),
                r.repeats,
                r.failures
            );
        }
        s
    }
}

struct Evaluated {
    ce: f64,
    f1: f64,
    alpha: Option<f64>,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn summarise(model: &str, n_l: Option<usize>, n_u: Option<usize>, runs: Vec<Option<Evaluated>>) -> CaseStudyRow {
    let ok: Vec<&Evaluated> = runs.iter().flatten().collect();
    let (ce, ce_se) = mean_se(&ok.iter().map(|e| e.ce).collect::<Vec<_>>());
    let (f1, f1_se) = mean_se(&ok.iter().map(|e| e.f1).collect::<Vec<_>>());
    let alphas: Vec<f64> = ok.iter().filter_map(|e| e.alpha).collect();
    CaseStudyRow {
        model: model.into(),
        n_l,
        n_u,
        cross_entropy: ce,
        cross_entropy_stderr: ce_se,
        f1,
        f1_stderr: f1_se,
        alpha: (!alphas.is_empty()).then(|| alphas.iter().sum::<f64>() / alphas.len() as f64),
        repeats: ok.len(),
        failures: runs.len() - ok.len(),
    }
}

/// Fits and evaluates every configured model on the corpus.
pub fn run_case_study(corpus: &Corpus, config: &CaseStudyConfig) -> Result<CaseStudyReport> {
    if config.repeats == 0 {
        return Err(Error::InvalidInput("repeats must be at least 1".into()));
    }
    let (train_idx, test_idx) = (corpus.indices(Split::Train), corpus.indices(Split::Test));
    let docs = corpus.documents();
    let pick = |idx: &[usize]| idx.iter().map(|&i| docs[i].clone()).collect::<Vec<_>>();
    let train = apply_sources(&pick(&train_idx), &config.sources)?;
    let test = apply_sources(&pick(&test_idx), &config.sources)?;
    if test.n() == 0 || !test.has_labels() {
        return Err(Error::CorpusMissing(format!("the case study needs a labelled test split; {FETCH_HINT}")));
    }
    let p = config.class_balance;
    let n_train = train.n();
    let sizes = config
        .n_grid
        .iter()
        .copied()
        .chain(config.combined.iter().flat_map(|c| c.n_l.iter().copied().chain([c.n_u])));
    for n in sizes {
        if n == 0 || n > n_train {
            return Err(Error::InvalidInput(format!(
                "sample size {n} outside 1..={n_train} (training documents)"
            )));
        }
    }
    let subsample = |n: usize, kind: &str, r: usize| -> SourceMatrix {
        if n == n_train {
            return train.clone();
        }
        let mut rng = derive_rng(config.seed, &[tag(kind), n as u64, r as u64]);
        let mut idx = index::sample(&mut rng, n_train, n).into_vec();
        idx.sort_unstable();
        train.select_rows(&idx)
    };
    let repeats = |n: usize| if n == n_train { 1 } else { config.repeats };
    let evaluate = |est: &ClassConditionalEstimate, alpha: Option<f64>| -> Result<Evaluated> {
        let lm = LabelModel::from_class_conditional(est)?;
        Ok(Evaluated {
            ce: cross_entropy(&lm, &test)?,
            f1: f1_score(&lm, &test, config.threshold)?.f1,
            alpha,
        })
    };
    let labeled = |data: &SourceMatrix| -> Result<(ClassConditionalEstimate, LabeledMoments)> {
        let stats = LabeledMoments::from_matrix(data)?;
        Ok((estimate_class_conditional_labeled(&stats, p)?, stats))
    };
    let unlabeled = |data: &SourceMatrix, agg: Aggregation, r: usize| -> Result<ClassConditionalEstimate> {
        let moments = PairwiseMoments::from_matrix(data)?;
        let mut rng = derive_rng(config.seed, &[tag("ws-select"), data.n() as u64, r as u64]);
        estimate_quadratic_triplet_from(&moments, p, agg, &mut rng)
    };

    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let runs = |f: &(dyn Fn(usize) -> Result<Evaluated> + Sync)| -> Vec<Option<Evaluated>> {
            (0..repeats(n)).into_par_iter().map(|r| f(r).ok()).collect()
        };
        rows.push(summarise(
            "labeled",
            Some(n),
            None,
            runs(&|r| evaluate(&labeled(&subsample(n, "ws-labeled", r))?.0, None)),
        ));
        for (name, agg) in [("unlabeled-mean", Aggregation::Mean), ("unlabeled-median", Aggregation::Median)] {
            rows.push(summarise(
                name,
                None,
                Some(n),
                runs(&|r| evaluate(&unlabeled(&subsample(n, "ws-unlabeled", r).without_labels(), agg, r)?, None)),
            ));
        }
    }
    if let Some(c) = &config.combined {
        let unl: Vec<Option<ClassConditionalEstimate>> = (0..repeats(c.n_u))
            .into_par_iter()
            .map(|r| unlabeled(&subsample(c.n_u, "ws-unlabeled", r).without_labels(), Aggregation::Median, r).ok())
            .collect();
        for &n_l in &c.n_l {
            let k = repeats(n_l);
            let lab: Vec<Option<(ClassConditionalEstimate, LabeledMoments)>> = (0..k)
                .into_par_iter()
                .map(|r| labeled(&subsample(n_l, "ws-labeled", r)).ok())
                .collect();
            let unl_at = |r: usize| unl[r % unl.len()].as_ref();
            rows.push(summarise(
                "labeled",
                Some(n_l),
                None,
                lab.iter().map(|l| l.as_ref().and_then(|l| evaluate(&l.0, None).ok())).collect(),
            ));
            rows.push(summarise(
                "unlabeled-median",
                None,
                Some(c.n_u),
                (0..k).map(|r| unl_at(r).and_then(|u| evaluate(u, None).ok())).collect(),
            ));
            let combined: Vec<Option<Evaluated>> = (0..k)
                .into_par_iter()
                .map(|r| {
                    let (u, (l, stats)) = (unl_at(r)?, lab[r].as_ref()?);
                    let alpha = match c.alpha {
                        CaseAlpha::Fixed { alpha } => alpha,
                        CaseAlpha::GreenStrawderman { radius } => {
                            let a_u = AccuracyEstimate::new(u.accuracies(), Method::TripletMedian);
                            combine_green_strawderman(&a_u, stats, radius).ok()?.alpha?
                        }
                    };
                    evaluate(&u.blend(l, alpha).ok()?, Some(alpha)).ok()
                })
                .collect();
            rows.push(summarise("combined", Some(n_l), Some(c.n_u), combined));
        }
    }
    Ok(CaseStudyReport {
        rows,
        n_train,
        n_test: test.n(),
    })
}

/// Independent-word generator: given the label, each keyword appears with a
/// class-dependent probability, padded with filler tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticKeywordModel {
    pub sources: Vec<KeywordSource>,
    /// `Pr(word present | Y = +1)` per source.
    pub present_pos: Vec<f64>,
    /// `Pr(word present | Y = -1)` per source.
    pub present_neg: Vec<f64>,
    pub class_balance: f64,
}

const FILLER: [&str; 12] = [
    "the", "movie", "plot", "Actor", "scene", "was", "and", "it", "film", "story", "ending", "music",
];

impl SyntheticKeywordModel {
    /// Default roster with fixed, informative presence rates.
    pub fn imdb_like() -> Self {
        Self {
            sources: default_roster(),
            present_pos: vec![0.30, 0.45, 0.40, 0.35, 0.30, 0.15, 0.03, 0.04, 0.15, 0.18, 0.20, 0.25],
            present_neg: vec![0.12, 0.30, 0.25, 0.15, 0.12, 0.04, 0.15, 0.20, 0.45, 0.35, 0.40, 0.45],
            class_balance: 0.5,
        }
    }

    /// Generating `Pr(lambda_i = +1 | Y = y)` as a class-conditional estimate.
    pub fn truth(&self) -> Result<ClassConditionalEstimate> {
        let on = |present: &[f64]| -> Vec<f64> {
            self.sources
                .iter()
                .zip(present)
                .map(|(s, &q)| if s.sentiment > 0 { q } else { 1.0 - q })
                .collect()
        };
        ClassConditionalEstimate::new(on(&self.present_pos), on(&self.present_neg), self.class_balance)
    }

    /// `n` labelled documents, a `train_fraction` of them in the training split.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, train_fraction: f64, rng: &mut R) -> Result<Corpus> {
        let m = self.sources.len();
        if self.present_pos.len() != m || self.present_neg.len() != m {
            return Err(Error::InvalidInput("one presence rate per source and class".into()));
        }
        let n_train = (train_fraction * n as f64).round() as usize;
        let mut documents = Vec::with_capacity(n);
        for k in 0..n {
            let y: i8 = if rng.random_bool(self.class_balance) { 1 } else { -1 };
            let rates = if y > 0 { &self.present_pos } else { &self.present_neg };
            let mut words: Vec<String> = Vec::new();
            for (s, &q) in self.sources.iter().zip(rates) {
                if rng.random_bool(q) {
                    // vary surface form; the tokenizer must normalise it
                    let w = if rng.random_bool(0.3) { s.word.to_uppercase() } else { s.word.clone() };
                    words.push(w + if rng.random_bool(0.2) { "!" } else { "" });
                }
            }
            for _ in 0..rng.random_range(3..10) {
                words.push(FILLER[rng.random_range(0..FILLER.len())].to_string());
            }
            words.shuffle(rng);
            documents.push(Document {
                id: format!("syn{k}"),
                text: words.join(" "),
                label: Some(y),
            });
        }
        let split = (0..n).map(|k| if k < n_train { Split::Train } else { Split::Test }).collect();
        Corpus::new(documents, split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document {
            id: "d".into(),
            text: text.into(),
            label: None,
        }
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        let t: Vec<String> = tokenize("Great,movie!! It's 10/10").collect();
        assert_eq!(t, ["great", "movie", "it", "s", "10", "10"]);
    }

    #[test]
    fn good_movie_votes() {
        let roster = default_roster();
        let x = apply_sources(&[doc("a good movie")], &roster).unwrap();
        let row = x.row(0);
        for (s, &v) in roster.iter().zip(row) {
            let expected = match (s.word.as_str(), s.sentiment) {
                ("good", _) => 1,
                (_, 1) => -1,
                _ => 1,
            };
            assert_eq!(v, expected, "{}", s.word);
        }
    }

    #[test]
    fn empty_document_votes_against_presence() {
        let roster = default_roster();
        let x = apply_sources(&[doc("")], &roster).unwrap();
        for (s, &v) in roster.iter().zip(x.row(0)) {
            assert_eq!(v, -s.sentiment);
        }
    }

    #[test]
    fn substrings_do_not_match() {
        let s = KeywordSource::new("good", 1).unwrap();
        let toks: HashSet<String> = tokenize("goodness gracious").collect();
        assert_eq!(s.vote(&toks), -1);
    }

    #[test]
    fn source_parsing() {
        assert_eq!("Love:+".parse::<KeywordSource>().unwrap(), KeywordSource::new("love", 1).unwrap());
        assert_eq!("bad:-1".parse::<KeywordSource>().unwrap().sentiment, -1);
        assert!("bad".parse::<KeywordSource>().is_err());
        assert!(KeywordSource::new("two words", 1).is_err());
        assert!(KeywordSource::new("x", 0).is_err());
    }

    #[test]
    fn corpus_rejects_duplicates_and_bad_labels() {
        let d = |id: &str, label| Document {
            id: id.into(),
            text: String::new(),
            label,
        };
        assert!(Corpus::new(vec![d("a", None), d("a", None)], vec![Split::Train; 2]).is_err());
        assert!(Corpus::new(vec![d("a", Some(0))], vec![Split::Train]).is_err());
        assert!(Corpus::new(vec![d("a", Some(-1))], vec![Split::Test]).is_ok());
    }

    #[test]
    fn jsonl_round_trip() {
        let c = Corpus::new(
            vec![
                Document { id: "1".into(), text: "Good \"fun\"\nline".into(), label: Some(1) },
                Document { id: "2".into(), text: "bad".into(), label: None },
            ],
            vec![Split::Train, Split::Test],
        )
        .unwrap();
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        let back = Corpus::read(buf.as_slice(), &c.split_manifest()).unwrap();
        assert_eq!(back, c);
        let missing = SplitManifest { train: vec!["1".into()], test: vec![] };
        assert!(Corpus::read(buf.as_slice(), &missing).is_err());
    }

    #[test]
    fn csv_ingest_splits_deterministically() {
        let text = "review,sentiment\nfine,positive\nawful,negative\nok,positive\nmeh,negative\n";
        let opts = CsvIngest { train_fraction: 0.5, ..CsvIngest::default() };
        let a = Corpus::ingest_csv(text.as_bytes(), &opts).unwrap();
        let b = Corpus::ingest_csv(text.as_bytes(), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices(Split::Train).len(), 2);
        assert_eq!(a.documents()[1].label, Some(-1));
        let bad = "review,sentiment\nx,maybe\n";
        assert!(Corpus::ingest_csv(bad.as_bytes(), &opts).is_err());
    }

    #[test]
    fn missing_corpus_is_reported() {
        let err = Corpus::load(Path::new("/nonexistent/c.jsonl"), Path::new("/nonexistent/s.json")).unwrap_err();
        assert_eq!(err.name(), "CorpusMissing");
        assert!(Corpus::ingest_aclimdb(Path::new("/nonexistent")).is_err());
    }
}
