//! Review records, the errors-per-thousand-words metric, CSV I/O and the
//! exploratory statistics used to motivate the hurdle model.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower and upper word-count bounds (exclusive) of the reference corpus.
/// Records outside them are accepted but reported by [`Dataset::warnings`].
pub const TYPICAL_WORD_RANGE: (u32, u32) = (300, 3500);

/// Per-severity error counts annotated by a reviewer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotationCounts {
    pub n_minor: u32,
    pub n_major: u32,
    pub n_preferential: u32,
    pub n_repetition: u32,
}

impl ErrorAnnotationCounts {
    pub fn new(n_minor: u32, n_major: u32) -> Self {
        Self {
            n_minor,
            n_major,
            ..Self::default()
        }
    }

    /// Severity-weighted error count: minor 1, major 2, everything else 0.
    pub fn weighted(&self) -> u64 {
        u64::from(self.n_minor) + 2 * u64::from(self.n_major)
    }
}

/// Errors per thousand words, `1000 (m + 2M) / w`.
///
/// Generic over the result type: for `f64`/`f32` the value is a single
/// correctly rounded division of two exactly represented integers; for
/// [`Ratio<u64>`] it is exact.
pub fn compute_ept<T>(annotations: &ErrorAnnotationCounts, word_count: u32) -> Result<T>
where
    T: Num + FromPrimitive,
{
    if word_count == 0 {
        return Err(Error::Domain("word count must be at least 1".into()));
    }
    let numerator = T::from_u64(1000 * annotations.weighted())
        .ok_or_else(|| Error::Domain("weighted error count not representable".into()))?;
    let denominator = T::from_u32(word_count).expect("u32 representable");
    Ok(numerator / denominator)
}

/// Exact rational EPT.
pub fn compute_ept_exact(annotations: &ErrorAnnotationCounts, word_count: u32) -> Result<Ratio<u64>> {
    if word_count == 0 {
        return Err(Error::Domain("word count must be at least 1".into()));
    }
    Ok(Ratio::new(1000 * annotations.weighted(), u64::from(word_count)))
}

/// One reviewed translation job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub job_id: String,
    pub language_pair: String,
    pub translator_id: String,
    pub reviewer_id: String,
    pub word_count: u32,
    pub annotations: Option<ErrorAnnotationCounts>,
    pub ept: f64,
}

impl ReviewRecord {
    /// Record built from raw annotation counts; EPT is derived.
    pub fn from_annotations(
        job_id: impl Into<String>,
        language_pair: impl Into<String>,
        translator_id: impl Into<String>,
        reviewer_id: impl Into<String>,
        word_count: u32,
        annotations: ErrorAnnotationCounts,
    ) -> Result<Self> {
        let ept = compute_ept::<f64>(&annotations, word_count)?;
        Ok(Self {
            job_id: job_id.into(),
            language_pair: language_pair.into(),
            translator_id: translator_id.into(),
            reviewer_id: reviewer_id.into(),
            word_count,
            annotations: Some(annotations),
            ept,
        })
    }

    /// Record carrying only a precomputed EPT value.
    pub fn from_ept(
        job_id: impl Into<String>,
        language_pair: impl Into<String>,
        translator_id: impl Into<String>,
        reviewer_id: impl Into<String>,
        word_count: u32,
        ept: f64,
    ) -> Result<Self> {
        let record = Self {
            job_id: job_id.into(),
            language_pair: language_pair.into(),
            translator_id: translator_id.into(),
            reviewer_id: reviewer_id.into(),
            word_count,
            annotations: None,
            ept,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_count == 0 {
            return Err(Error::Validation(format!("job {}: word_count must be >= 1", self.job_id)));
        }
        if !(self.ept.is_finite() && self.ept >= 0.0) {
            return Err(Error::Validation(format!(
                "job {}: ept must be a finite non-negative number, got {}",
                self.job_id, self.ept
            )));
        }
        if let Some(counts) = &self.annotations {
            let expected = compute_ept::<f64>(counts, self.word_count)?;
            if !ept_agrees(expected, self.ept) {
                return Err(Error::Validation(format!(
                    "job {}: ept {} disagrees with annotation counts (expected {})",
                    self.job_id, self.ept, expected
                )));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.ept == 0.0
    }
}

fn ept_agrees(expected: f64, given: f64) -> bool {
    (expected - given).abs() <= 1e-9 * expected.abs().max(1.0)
}

/// An immutable collection of review records with entity indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<ReviewRecord>,
    by_language: BTreeMap<String, Vec<usize>>,
    by_translator: BTreeMap<String, Vec<usize>>,
    by_reviewer: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(records: Vec<ReviewRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut by_language: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_translator: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_reviewer: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            if !seen.insert(r.job_id.as_str()) {
                return Err(Error::Validation(format!("duplicate job_id {}", r.job_id)));
            }
            by_language.entry(r.language_pair.clone()).or_default().push(i);
            by_translator.entry(r.translator_id.clone()).or_default().push(i);
            by_reviewer.entry(r.reviewer_id.clone()).or_default().push(i);
        }
        Ok(Self {
            records,
            by_language,
            by_translator,
            by_reviewer,
        })
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.by_language.keys().map(String::as_str)
    }

    /// Translator ids in sorted order.
    pub fn translators(&self) -> impl Iterator<Item = &str> {
        self.by_translator.keys().map(String::as_str)
    }

    /// Reviewer ids in sorted order.
    pub fn reviewers(&self) -> impl Iterator<Item = &str> {
        self.by_reviewer.keys().map(String::as_str)
    }

    pub fn jobs_of_translator(&self, id: &str) -> &[usize] {
        self.by_translator.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn jobs_of_reviewer(&self, id: &str) -> &[usize] {
        self.by_reviewer.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The sub-dataset of one language pair, or `None` when absent.
    pub fn language_slice(&self, language: &str) -> Option<Dataset> {
        let idx = self.by_language.get(language)?;
        let records = idx.iter().map(|&i| self.records[i].clone()).collect();
        Some(Dataset::new(records).expect("subset of a valid dataset is valid"))
    }

    pub fn epts(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ept).collect()
    }

    pub fn zero_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.is_zero()).count() as f64 / self.records.len() as f64
    }

    /// Non-fatal findings, currently word counts outside [`TYPICAL_WORD_RANGE`].
    pub fn warnings(&self) -> Vec<String> {
        let (lo, hi) = TYPICAL_WORD_RANGE;
        self.records
            .iter()
            .filter(|r| r.word_count <= lo || r.word_count >= hi)
            .map(|r| format!("job {}: word_count {} outside ({lo}, {hi})", r.job_id, r.word_count))
            .collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut records = Vec::new();
        for (line, row) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = row?;
            records.push(row.into_record().map_err(|e| match e {
                Error::Validation(msg) => Error::Validation(format!("row {}: {msg}", line + 1)),
                other => other,
            })?);
        }
        Self::new(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.records {
            wtr.serialize(CsvRow::from(r))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    job_id: String,
    language_pair: String,
    translator_id: String,
    reviewer_id: String,
    word_count: u32,
    n_minor: Option<u32>,
    n_major: Option<u32>,
    n_preferential: Option<u32>,
    n_repetition: Option<u32>,
    ept: Option<f64>,
}

impl CsvRow {
    fn into_record(self) -> Result<ReviewRecord> {
        let annotations = match (self.n_minor, self.n_major) {
            (Some(n_minor), Some(n_major)) => Some(ErrorAnnotationCounts {
                n_minor,
                n_major,
                n_preferential: self.n_preferential.unwrap_or(0),
                n_repetition: self.n_repetition.unwrap_or(0),
            }),
            (None, None) => None,
            _ => {
                return Err(Error::Validation(format!(
                    "job {}: n_minor and n_major must be given together",
                    self.job_id
                )))
            }
        };
        match (annotations, self.ept) {
            (Some(counts), given) => {
                let record = ReviewRecord::from_annotations(
                    self.job_id,
                    self.language_pair,
                    self.translator_id,
                    self.reviewer_id,
                    self.word_count,
                    counts,
                )?;
                if let Some(ept) = given {
                    if !ept_agrees(record.ept, ept) {
                        return Err(Error::Validation(format!(
                            "job {}: ept {} disagrees with annotation counts (expected {})",
                            record.job_id, ept, record.ept
                        )));
                    }
                }
                Ok(record)
            }
            (None, Some(ept)) => ReviewRecord::from_ept(
                self.job_id,
                self.language_pair,
                self.translator_id,
                self.reviewer_id,
                self.word_count,
                ept,
            ),
            (None, None) => Err(Error::Validation(format!(
                "job {}: either ept or annotation counts are required",
                self.job_id
            ))),
        }
    }
}

impl From<&ReviewRecord> for CsvRow {
    fn from(r: &ReviewRecord) -> Self {
        let a = r.annotations;
        Self {
            job_id: r.job_id.clone(),
            language_pair: r.language_pair.clone(),
            translator_id: r.translator_id.clone(),
            reviewer_id: r.reviewer_id.clone(),
            word_count: r.word_count,
            n_minor: a.map(|a| a.n_minor),
            n_major: a.map(|a| a.n_major),
            n_preferential: a.map(|a| a.n_preferential),
            n_repetition: a.map(|a| a.n_repetition),
            ept: Some(r.ept),
        }
    }
}

/// Zero-EPT share within one word-count quartile group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileZeroRatio {
    /// Smallest word count in the group (inclusive).
    pub lower: u32,
    /// Quartile boundary closing the group (inclusive).
    pub upper: u32,
    pub n_records: usize,
    /// `None` when ties on the boundaries leave the group empty.
    pub zero_fraction: Option<f64>,
}

/// Split by word-count quartiles (nearest-rank, document counts) and report
/// the fraction of perfect translations per group. Records sitting exactly on
/// a boundary belong to the lower group.
pub fn zero_ratio_by_word_quartile(dataset: &Dataset) -> Result<[QuartileZeroRatio; 4]> {
    let n = dataset.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "quartile split needs at least 4 records, got {n}"
        )));
    }
    let mut words: Vec<u32> = dataset.records().iter().map(|r| r.word_count).collect();
    words.sort_unstable();
    let bound = |k: usize| words[(k * n).div_ceil(4) - 1];
    let bounds = [bound(1), bound(2), bound(3), words[n - 1]];

    let mut totals = [0usize; 4];
    let mut zeros = [0usize; 4];
    let mut mins = [u32::MAX; 4];
    for r in dataset.records() {
        let g = bounds.iter().position(|&b| r.word_count <= b).expect("max bound covers all");
        totals[g] += 1;
        mins[g] = mins[g].min(r.word_count);
        if r.is_zero() {
            zeros[g] += 1;
        }
    }
    Ok(std::array::from_fn(|g| QuartileZeroRatio {
        lower: if totals[g] > 0 {
            mins[g]
        } else if g == 0 {
            words[0]
        } else {
            bounds[g - 1] + 1
        },
        upper: bounds[g],
        n_records: totals[g],
        zero_fraction: (totals[g] > 0).then(|| zeros[g] as f64 / totals[g] as f64),
    }))
}

/// Shape statistics of standardized log-values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogShape<T> {
    pub n: usize,
    pub skewness: T,
    pub excess_kurtosis: T,
}

/// Skewness and excess kurtosis of `ln x` over the strictly positive values.
pub fn log_shape<T: Real>(values: &[T]) -> Result<LogShape<T>> {
    let logs: Vec<T> = values.iter().filter(|&&v| v > T::zero()).map(|v| v.ln()).collect();
    let n = logs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "log-shape needs at least 3 positive values, got {n}"
        )));
    }
    let nf = T::from_count(n);
    let mean = logs.iter().fold(T::zero(), |a, &v| a + v) / nf;
    let m2 = logs.iter().fold(T::zero(), |a, &v| a + (v - mean).powi(2)) / nf;
    if !(m2 > T::epsilon() * T::epsilon() * (T::one() + mean * mean)) {
        return Err(Error::InsufficientData("log values have zero variance".into()));
    }
    let sd = m2.sqrt();
    let (s3, s4) = logs.iter().fold((T::zero(), T::zero()), |(a3, a4), &v| {
        let z = (v - mean) / sd;
        let z2 = z * z;
        (a3 + z2 * z, a4 + z2 * z2)
    });
    Ok(LogShape {
        n,
        skewness: s3 / nf,
        excess_kurtosis: s4 / nf - T::c(3.0),
    })
}

/// [`log_shape`] over the dataset's EPT values.
pub fn standardized_log_shape(dataset: &Dataset) -> Result<LogShape<f64>> {
    log_shape(&dataset.epts())
}
