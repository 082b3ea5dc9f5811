//! Recorded chain output and its newline-delimited JSON form.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{kmax_bound, Partition};

/// One kept state in canonical labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub iter: usize,
    pub col_assign: Vec<usize>,
    /// Examinee labels per canonical question cluster id.
    #[serde(with = "row_map")]
    pub row_assign: Vec<Vec<usize>>,
    pub log_joint: f64,
}

mod row_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<usize, &Vec<usize>> = rows.iter().enumerate().collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
        let map = BTreeMap::<usize, Vec<usize>>::deserialize(d)?;
        if map.keys().copied().ne(0..map.len()) {
            return Err(serde::de::Error::custom("row_assign keys must be 0..K"));
        }
        Ok(map.into_values().collect())
    }
}

impl StateRecord {
    pub fn column_partition(&self) -> Partition {
        Partition::from_labels(&self.col_assign)
    }

    /// Number of columns in each canonical cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.column_partition().block_sizes()
    }

    /// Count of clusters whose examinee partition exceeds its bound.
    pub fn bound_violations(&self) -> usize {
        self.cluster_sizes()
            .iter()
            .zip(&self.row_assign)
            .filter(|(&size, rows)| Partition::from_labels(rows).n_blocks() > kmax_bound(size))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub rng: String,
    pub n_iter: usize,
    pub n_rep: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub init_mode: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub meta: TraceMeta,
    pub records: Vec<StateRecord>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_ndjson_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))
    }

    /// Writes the records as NDJSON and the metadata next to them as
    /// `<stem>.meta.json`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_ndjson_to(file)?;
        let meta_path = path.with_extension("meta.json");
        let meta = File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        serde_json::to_writer_pretty(meta, &self.meta)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta_path = path.with_extension("meta.json");
        let meta_file = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = serde_json::from_reader(meta_file)?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(ChainTrace {
            meta,
            records: read_records(BufReader::new(file))?,
        })
    }
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<StateRecord>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<trace>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_json_shape() {
        let r = StateRecord {
            iter: 3,
            col_assign: vec![0, 0, 0, 1],
            row_assign: vec![vec![0, 1, 0], vec![0, 0, 0]],
            log_joint: -1.5,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(
            s,
            r#"{"iter":3,"col_assign":[0,0,0,1],"row_assign":{"0":[0,1,0],"1":[0,0,0]},"log_joint":-1.5}"#
        );
        let back: StateRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.bound_violations(), 0);
    }

    #[test]
    fn detects_bound_violation() {
        let r = StateRecord {
            iter: 0,
            col_assign: vec![0, 0],
            row_assign: vec![vec![0, 1]],
            log_joint: 0.0,
        };
        assert_eq!(r.bound_violations(), 1);
    }
}
