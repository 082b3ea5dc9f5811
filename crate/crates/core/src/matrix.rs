//! Binary response matrices and dense accuracy matrices, plus their CSV forms.
//!
//! The response CSV holds one examinee per row with entries `0`/`1`. An
//! optional first row of question labels is detected by the presence of any
//! token other than `0` or `1`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The n x D dichotomous observation matrix, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseMatrix {
    n_examinees: usize,
    n_questions: usize,
    entries: Vec<u8>,
    question_labels: Option<Vec<String>>,
    examinee_labels: Option<Vec<String>>,
}

/// Checks a rectangular table of integers and builds a [`ResponseMatrix`].
pub fn validate_matrix<R: AsRef<[i64]>>(raw: &[R]) -> Result<ResponseMatrix> {
    let n = raw.len();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let d = raw[0].as_ref().len();
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut entries = Vec::with_capacity(n * d);
    for (i, row) in raw.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != d {
            return Err(Error::RaggedRows {
                row: i,
                expected: d,
                found: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            match v {
                0 | 1 => entries.push(v as u8),
                _ => return Err(Error::NonBinaryEntry { row: i, col: j }),
            }
        }
    }
    Ok(ResponseMatrix {
        n_examinees: n,
        n_questions: d,
        entries,
        question_labels: None,
        examinee_labels: None,
    })
}

impl ResponseMatrix {
    /// Builds a matrix from row-major bytes; every entry must be 0 or 1.
    pub fn from_row_major(n_examinees: usize, n_questions: usize, entries: Vec<u8>) -> Result<Self> {
        if n_examinees == 0 || n_questions == 0 {
            return Err(Error::EmptyMatrix);
        }
        if entries.len() != n_examinees * n_questions {
            return Err(Error::RaggedRows {
                row: entries.len() / n_questions,
                expected: n_questions,
                found: entries.len() % n_questions,
            });
        }
        if let Some(pos) = entries.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryEntry {
                row: pos / n_questions,
                col: pos % n_questions,
            });
        }
        Ok(ResponseMatrix {
            n_examinees,
            n_questions,
            entries,
            question_labels: None,
            examinee_labels: None,
        })
    }

    pub fn with_question_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_questions {
            return Err(Error::LabelLength {
                expected: self.n_questions,
                found: labels.len(),
            });
        }
        self.question_labels = Some(labels);
        Ok(self)
    }

    pub fn with_examinee_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_examinees {
            return Err(Error::LabelLength {
                expected: self.n_examinees,
                found: labels.len(),
            });
        }
        self.examinee_labels = Some(labels);
        Ok(self)
    }

    #[inline]
    pub fn n_examinees(&self) -> usize {
        self.n_examinees
    }

    #[inline]
    pub fn n_questions(&self) -> usize {
        self.n_questions
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.n_questions + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.n_questions..(i + 1) * self.n_questions]
    }

    pub fn question_labels(&self) -> Option<&[String]> {
        self.question_labels.as_deref()
    }

    pub fn examinee_labels(&self) -> Option<&[String]> {
        self.examinee_labels.as_deref()
    }

    /// Number of correct answers per question.
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0usize; self.n_questions];
        for i in 0..self.n_examinees {
            for (s, &v) in sums.iter_mut().zip(self.row(i)) {
                *s += v as usize;
            }
        }
        sums
    }

    /// Number of correct answers per examinee.
    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.n_examinees)
            .map(|i| self.row(i).iter().map(|&v| v as usize).sum())
            .collect()
    }

    /// Parses the CSV layout described in the module docs.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records: Vec<Vec<String>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            records.push(rec.iter().map(str::to_owned).collect());
        }
        let mut labels = None;
        if let Some(first) = records.first() {
            if first.iter().any(|t| t != "0" && t != "1") {
                labels = Some(records.remove(0));
            }
        }
        let mut raw = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let mut row = Vec::with_capacity(rec.len());
            for (j, tok) in rec.iter().enumerate() {
                match tok.as_str() {
                    "0" => row.push(0),
                    "1" => row.push(1),
                    _ => return Err(Error::NonBinaryEntry { row: i, col: j }),
                }
            }
            raw.push(row);
        }
        let m = validate_matrix(&raw)?;
        match labels {
            Some(l) => m.with_question_labels(l),
            None => Ok(m),
        }
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().from_writer(writer);
        if let Some(labels) = &self.question_labels {
            wtr.write_record(labels)?;
        }
        for i in 0..self.n_examinees {
            wtr.write_record(self.row(i).iter().map(|v| if *v == 1 { "1" } else { "0" }))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }
}

/// Dense n x D matrix of per-entry success probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl AccuracyMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        AccuracyMatrix { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut wtr = csv::WriterBuilder::new().from_writer(file);
        for i in 0..self.rows {
            wtr.write_record(
                self.values[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .map(|v| format!("{v:.10}")),
            )?;
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
        let mut values = Vec::new();
        let mut rows = 0;
        let mut cols = 0;
        for rec in rdr.records() {
            let rec = rec?;
            if rows == 0 {
                cols = rec.len();
            } else if rec.len() != cols {
                return Err(Error::RaggedRows {
                    row: rows,
                    expected: cols,
                    found: rec.len(),
                });
            }
            for (j, tok) in rec.iter().enumerate() {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::NonBinaryEntry { row: rows, col: j })?;
                values.push(v);
            }
            rows += 1;
        }
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(AccuracyMatrix { rows, cols, values })
    }
}

impl Serialize for AccuracyMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = self.values.chunks(self.cols.max(1)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AccuracyMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged accuracy matrix"));
        }
        Ok(AccuracyMatrix {
            rows: rows.len(),
            cols,
            values: rows.into_iter().flatten().collect(),
        })
    }
}
