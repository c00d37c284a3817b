//! Corpus ingestion and labeled-dataset assembly.
//!
//! The corpus interchange format is UTF-8 JSON lines, one
//! [`RawPlayRecord`] object per line:
//!
//! ```text
//! {"game_id":"2014091100","team":"ATL","opponent":"CAR","quarter":3,"clock_seconds":596,"yardline":24,"down":2,"togo":10,"description":"(9:56) M.Ryan pass short left ..."}
//! ```
//!
//! Blank lines are skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encode::{self, EncodingSchema};
use crate::error::{Error, Result};
use crate::labels;
use crate::matrix::Matrix;
use crate::playparse::{self, FilterOptions, RawPlayRecord, RejectReason};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Success,
    Yards,
    Progress,
}

impl Target {
    pub fn is_classification(self) -> bool {
        self == Target::Success
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Success => "success",
            Target::Yards => "yards",
            Target::Progress => "progress",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "success" => Ok(Target::Success),
            "yards" => Ok(Target::Yards),
            "progress" => Ok(Target::Progress),
            other => Err(Error::InvalidInput(format!("unknown target {other:?}"))),
        }
    }
}

/// Encoded features plus all three targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub success: Vec<bool>,
    pub yards: Vec<f64>,
    pub progress: Vec<f64>,
    pub schema: EncodingSchema,
    pub provenance: String,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        success: Vec<bool>,
        yards: Vec<f64>,
        progress: Vec<f64>,
        schema: EncodingSchema,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = x.rows();
        if success.len() != n || yards.len() != n || progress.len() != n {
            return Err(Error::InvalidInput("label arrays differ in length from X".into()));
        }
        crate::matrix::check_width(schema.width(), x.cols())?;
        Ok(Self { x, success, yards, progress, schema, provenance: provenance.into() })
    }

    pub fn empty(schema: EncodingSchema, provenance: impl Into<String>) -> Self {
        let w = schema.width();
        Self {
            x: Matrix::zeros(0, w),
            success: vec![],
            yards: vec![],
            progress: vec![],
            schema,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.x.cols()
    }

    /// (failures, successes)
    pub fn class_counts(&self) -> (usize, usize) {
        let s = self.success.iter().filter(|&&b| b).count();
        (self.len() - s, s)
    }

    /// Target values as reals; success maps to 1.0 / 0.0.
    pub fn target_values(&self, target: Target) -> Vec<f64> {
        match target {
            Target::Success => self.success.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            Target::Yards => self.yards.clone(),
            Target::Progress => self.progress.clone(),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            success: idx.iter().map(|&i| self.success[i]).collect(),
            yards: idx.iter().map(|&i| self.yards[i]).collect(),
            progress: idx.iter().map(|&i| self.progress[i]).collect(),
            schema: self.schema.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Deterministic random subsample of at most `cap` rows, original order kept.
    pub fn cap(&self, cap: usize, seed: u64) -> Dataset {
        if self.len() <= cap {
            return self.clone();
        }
        let mut idx = rng::permutation(self.len(), seed);
        idx.truncate(cap);
        idx.sort_unstable();
        self.subset(&idx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub source: String,
    pub records_read: usize,
    pub records_kept: usize,
    pub rejections: BTreeMap<RejectReason, usize>,
    pub malformed: Vec<LineIssue>,
    pub successes: usize,
    pub success_ratio: f64,
}

impl IngestReport {
    pub fn rejected(&self) -> usize {
        self.rejections.values().sum()
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "source:          {}", self.source)?;
        writeln!(f, "records read:    {}", self.records_read)?;
        writeln!(f, "records kept:    {}", self.records_kept)?;
        writeln!(f, "records rejected: {}", self.rejected())?;
        for (reason, count) in &self.rejections {
            writeln!(f, "  {reason:<48} {count}")?;
        }
        if !self.malformed.is_empty() {
            writeln!(f, "malformed lines: {}", self.malformed.len())?;
            for issue in self.malformed.iter().take(10) {
                writeln!(f, "  line {}: {}", issue.line, issue.message)?;
            }
        }
        write!(f, "success ratio:   {:.4} ({} of {})", self.success_ratio, self.successes, self.records_kept)
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
    pub filter: FilterOptions,
    /// Encoding roster; defaults to the 32-team league roster.
    pub teams: Option<Vec<String>>,
}

impl IngestOptions {
    pub fn schema(&self) -> Result<EncodingSchema> {
        match &self.teams {
            Some(t) => encode::build_schema(t),
            None => Ok(encode::nfl_schema()),
        }
    }
}

enum LineResult {
    Blank,
    Malformed(String),
    Rejected(RejectReason),
    Kept { row: Vec<f64>, labels: labels::PlayLabels },
}

fn process_line(line: &str, schema: &EncodingSchema, opts: &IngestOptions) -> LineResult {
    if line.trim().is_empty() {
        return LineResult::Blank;
    }
    let record: RawPlayRecord = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return LineResult::Malformed(e.to_string()),
    };
    if let Err(e) = record.validate() {
        return LineResult::Malformed(e.to_string());
    }
    for code in [&record.team, &record.opponent] {
        if schema.team_index(code).is_none() {
            return LineResult::Malformed(Error::UnknownTeam(code.clone()).to_string());
        }
    }
    match playparse::process_record(&record, &opts.filter) {
        Err(reason) => LineResult::Rejected(reason),
        Ok(parsed) => {
            let labels = labels::label_play(&parsed.features, &parsed.outcome);
            match encode::encode(&parsed.features, schema) {
                Ok(row) => LineResult::Kept { row, labels },
                Err(e) => LineResult::Malformed(e.to_string()),
            }
        }
    }
}

pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn ingest(path: &Path, opts: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Error::InvalidInput(format!("{} is not UTF-8: {e}", path.display())))?;
    let source = format!("{} sha256:{}", path.display(), fingerprint(&bytes));
    ingest_str(&text, &source, opts).map_err(|e| match e {
        Error::MalformedLine { line, message, .. } => Error::MalformedLine { path: path.to_path_buf(), line, message },
        e => e,
    })
}

pub fn ingest_reader<R: BufRead>(reader: R, source: &str, opts: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    let mut text = String::new();
    for line in reader.lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    ingest_str(&text, source, opts)
}

/// Parses, labels and encodes every line. Lines are processed in parallel;
/// output order equals input order.
pub fn ingest_str(text: &str, source: &str, opts: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    let schema = opts.schema()?;
    let lines: Vec<&str> = text.lines().collect();
    let results: Vec<LineResult> = lines.par_iter().map(|l| process_line(l, &schema, opts)).collect();

    let mut rows = Vec::new();
    let mut success = Vec::new();
    let mut yards = Vec::new();
    let mut progress = Vec::new();
    let mut report = IngestReport {
        source: source.to_string(),
        records_read: 0,
        records_kept: 0,
        rejections: BTreeMap::new(),
        malformed: vec![],
        successes: 0,
        success_ratio: 0.0,
    };

    for (i, result) in results.into_iter().enumerate() {
        let line = i + 1;
        match result {
            LineResult::Blank => {}
            LineResult::Malformed(message) => {
                if opts.strict {
                    return Err(Error::MalformedLine { path: source.into(), line, message });
                }
                log::warn!("{source}:{line}: skipping malformed record: {message}");
                report.malformed.push(LineIssue { line, message });
            }
            LineResult::Rejected(reason) => {
                report.records_read += 1;
                *report.rejections.entry(reason).or_insert(0) += 1;
            }
            LineResult::Kept { row, labels } => {
                report.records_read += 1;
                report.records_kept += 1;
                rows.push(row);
                success.push(labels.success);
                yards.push(labels.yards);
                progress.push(labels.progress);
            }
        }
    }

    report.successes = success.iter().filter(|&&s| s).count();
    if report.records_kept > 0 {
        report.success_ratio = report.successes as f64 / report.records_kept as f64;
    }
    let x = Matrix::from_rows(&rows, schema.width())?;
    let ds = Dataset::new(x, success, yards, progress, schema, source)?;
    Ok((ds, report))
}

/// Seeded train/test partition; the test part holds `round(n * test_fraction)` rows.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = ds.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidInput(format!("{n} rows cannot be split with test fraction {test_fraction}")));
    }
    let perm = rng::permutation(n, seed);
    let mut test: Vec<usize> = perm[..n_test].to_vec();
    let mut train: Vec<usize> = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Drops majority-class rows until both classes have the minority count.
pub fn undersample(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let (fails, succ) = ds.class_counts();
    if fails == 0 || succ == 0 {
        return Err(Error::SingleClass(ds.len()));
    }
    let keep = fails.min(succ);
    let mut chosen = Vec::with_capacity(2 * keep);
    for (class, salt) in [(false, 0u64), (true, 1u64)] {
        let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.success[i] == class).collect();
        let order = rng::permutation(members.len(), seed.wrapping_mul(2).wrapping_add(salt));
        chosen.extend(order.into_iter().take(keep).map(|j| members[j]));
    }
    chosen.sort_unstable();
    Ok(ds.subset(&chosen))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

/// `k` disjoint validation folds over `0..n` whose sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k = {k}; need at least 2 folds")));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds n = {n}")));
    }
    let perm = rng::permutation(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut valid = perm[start..start + size].to_vec();
        let mut train: Vec<usize> = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
        valid.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, valid });
        start += size;
    }
    Ok(folds)
}
