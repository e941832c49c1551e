//! Source-output matrices and their on-disk formats.
//!
//! A [`SourceMatrix`] holds `n` rows of `m` votes in `{-1, +1}` with an
//! optional label column. Two encodings are supported:
//!
//! * CSV with header `lf_0,...,lf_{m-1}[,y]`.
//! * A compact binary layout for large runs:
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"WSMB"
//! 4       1     version (1)
//! 5       1     flags  (bit 0: label column present)
//! 6       2     reserved, zero
//! 8       8     n, u64 little-endian
//! 16      4     m, u32 little-endian
//! 20      ...   n rows, each ceil(m/8) bytes, bit k of the row = source k is +1
//! ...     ...   if labelled: ceil(n/8) bytes, bit r = label of row r is +1
//! ```
//!
//! [`StateCounts`] is the sufficient statistic of an i.i.d. sample from an
//! enumerable model: one count per joint `(Y, lambda)` state.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WSMB";
const VERSION: u8 = 1;

/// `n x m` matrix of source votes in `{-1, +1}`, optionally with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMatrix {
    n: usize,
    m: usize,
    values: Vec<i8>,
    labels: Option<Vec<i8>>,
}

fn check_sign(v: i8, what: &str) -> Result<()> {
    if v == 1 || v == -1 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} entry {v} is not -1 or +1")))
    }
}

impl SourceMatrix {
    /// Builds a matrix from row-major votes.
    pub fn new(m: usize, values: Vec<i8>, labels: Option<Vec<i8>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("source count must be positive".into()));
        }
        if values.len() % m != 0 {
            return Err(Error::InvalidInput(format!(
                "{} values do not form rows of width {m}",
                values.len()
            )));
        }
        let n = values.len() / m;
        for &v in &values {
            check_sign(v, "source")?;
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::InvalidInput(format!(
                    "label column has {} entries for {n} rows",
                    labels.len()
                )));
            }
            for &y in labels {
                check_sign(y, "label")?;
            }
        }
        Ok(Self {
            n,
            m,
            values,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<i8>], labels: Option<Vec<i8>>) -> Result<Self> {
        let m = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Self::new(m, rows.concat(), labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.values[r * self.m..(r + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> + '_ {
        self.values.chunks_exact(self.m)
    }

    pub fn labels(&self) -> Option<&[i8]> {
        self.labels.as_deref()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Labels or a contract error naming the caller.
    pub fn require_labels(&self, op: &str) -> Result<&[i8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Contract(format!("{op} requires a label column")))
    }

    /// Copy without the label column.
    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.m);
        for &r in idx {
            values.extend_from_slice(self.row(r));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&r| l[r]).collect());
        Self {
            n: idx.len(),
            m: self.m,
            values,
            labels,
        }
    }

    /// Configuration index of a row: bit `k` set iff source `k` voted +1.
    pub fn config_index(&self, r: usize) -> u64 {
        config_of(self.row(r))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut lf_cols = Vec::new();
        let mut y_col = None;
        for (c, h) in headers.iter().enumerate() {
            if h == "y" {
                y_col = Some(c);
            } else if let Some(k) = h.strip_prefix("lf_") {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Format(format!("bad column name {h:?}")))?;
                lf_cols.push((k, c));
            } else {
                return Err(Error::Format(format!("unexpected column {h:?}")));
            }
        }
        lf_cols.sort();
        for (expect, (k, _)) in lf_cols.iter().enumerate() {
            if *k != expect {
                return Err(Error::Format(format!("missing column lf_{expect}")));
            }
        }
        let m = lf_cols.len();
        let mut values = Vec::new();
        let mut labels = y_col.map(|_| Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            for &(_, c) in &lf_cols {
                values.push(parse_sign(&rec[c])?);
            }
            if let (Some(c), Some(l)) = (y_col, labels.as_mut()) {
                l.push(parse_sign(&rec[c])?);
            }
        }
        Self::new(m, values, labels)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.m).map(|k| format!("lf_{k}")).collect();
        if self.labels.is_some() {
            header.push("y".into());
        }
        w.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(self.m + 1);
        for r in 0..self.n {
            rec.clear();
            rec.extend(self.row(r).iter().map(|v| v.to_string()));
            if let Some(l) = &self.labels {
                rec.push(l[r].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION, u8::from(self.labels.is_some()), 0, 0])?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        let row_bytes = self.m.div_ceil(8);
        let mut buf = vec![0u8; row_bytes];
        for row in self.rows() {
            buf.iter_mut().for_each(|b| *b = 0);
            for (k, &v) in row.iter().enumerate() {
                if v > 0 {
                    buf[k / 8] |= 1 << (k % 8);
                }
            }
            w.write_all(&buf)?;
        }
        if let Some(l) = &self.labels {
            let mut packed = vec![0u8; self.n.div_ceil(8)];
            for (r, &y) in l.iter().enumerate() {
                if y > 0 {
                    packed[r / 8] |= 1 << (r % 8);
                }
            }
            w.write_all(&packed)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 20];
        r.read_exact(&mut head)?;
        if &head[0..4] != MAGIC {
            return Err(Error::Format("bad magic, not a source-matrix file".into()));
        }
        if head[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", head[4])));
        }
        let labelled = head[5] & 1 == 1;
        let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(head[16..20].try_into().unwrap()) as usize;
        let row_bytes = m.div_ceil(8);
        let mut body = vec![0u8; n * row_bytes];
        r.read_exact(&mut body)?;
        let mut values = Vec::with_capacity(n * m);
        for row in body.chunks_exact(row_bytes.max(1)).take(n) {
            for k in 0..m {
                values.push(if row[k / 8] >> (k % 8) & 1 == 1 { 1 } else { -1 });
            }
        }
        let labels = if labelled {
            let mut packed = vec![0u8; n.div_ceil(8)];
            r.read_exact(&mut packed)?;
            Some(
                (0..n)
                    .map(|i| if packed[i / 8] >> (i % 8) & 1 == 1 { 1 } else { -1 })
                    .collect(),
            )
        } else {
            None
        };
        Self::new(m, values, labels)
    }

    /// Loads by extension: `.bin`/`.wsmb` binary, anything else CSV.
    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        if is_binary_path(path) {
            Self::read_binary(f)
        } else {
            Self::read_csv(f)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if is_binary_path(path) {
            self.write_binary(f)
        } else {
            self.write_csv(f)
        }
    }
}

fn is_binary_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("bin") | Some("wsmb")
    )
}

fn parse_sign(s: &str) -> Result<i8> {
    match s {
        "1" | "+1" => Ok(1),
        "-1" => Ok(-1),
        other => Err(Error::Format(format!("expected -1 or 1, found {other:?}"))),
    }
}

/// Bit-packed configuration of a vote vector.
pub fn config_of(row: &[i8]) -> u64 {
    row.iter()
        .enumerate()
        .fold(0u64, |acc, (k, &v)| if v > 0 { acc | (1 << k) } else { acc })
}

/// Sign of source `k` in a packed configuration.
#[inline]
pub fn sign_at(config: u64, k: usize) -> f64 {
    if config >> k & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Per-state counts of an i.i.d. labelled sample over `2^(m+1)` joint states.
///
/// State index layout matches [`crate::ising::IsingModel::joint`]: the low `m`
/// bits are the source configuration, bit `m` is the label (`1` = `Y=+1`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateCounts {
    m: usize,
    n: u64,
    counts: Vec<u64>,
}

impl StateCounts {
    pub fn new(m: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1usize << (m + 1) {
            return Err(Error::InvalidInput(format!(
                "expected {} state counts for m={m}, got {}",
                1usize << (m + 1),
                counts.len()
            )));
        }
        let n = counts.iter().sum();
        Ok(Self { m, n, counts })
    }

    pub fn from_matrix(data: &SourceMatrix) -> Result<Self> {
        let labels = data.require_labels("state counting")?;
        let m = data.m();
        let mut counts = vec![0u64; 1usize << (m + 1)];
        for (r, &y) in labels.iter().enumerate() {
            let mut s = data.config_index(r) as usize;
            if y > 0 {
                s |= 1 << m;
            }
            counts[s] += 1;
        }
        Self::new(m, counts)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Counts of source configurations with the label marginalised out.
    pub fn config_counts(&self) -> Vec<u64> {
        let half = 1usize << self.m;
        (0..half)
            .map(|c| self.counts[c] + self.counts[c | half])
            .collect()
    }

    /// Expands into an explicit matrix, rows grouped by state.
    pub fn to_matrix(&self) -> SourceMatrix {
        let mut values = Vec::with_capacity(self.n as usize * self.m);
        let mut labels = Vec::with_capacity(self.n as usize);
        for (s, &c) in self.counts.iter().enumerate() {
            for _ in 0..c {
                for k in 0..self.m {
                    values.push(if s >> k & 1 == 1 { 1 } else { -1 });
                }
                labels.push(if s >> self.m & 1 == 1 { 1 } else { -1 });
            }
        }
        SourceMatrix {
            n: self.n as usize,
            m: self.m,
            values,
            labels: Some(labels),
        }
    }
}
