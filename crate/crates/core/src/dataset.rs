//! The tabular carrier passed between every stage of the pipeline.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `T x K` matrix of named series.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    columns: Vec<String>,
    rows: Array2<f64>,
    time_indexed: bool,
    /// Row indices where an independent segment starts (never 0). Lag pairs
    /// straddling one of these are not genuine time neighbours.
    segment_starts: Vec<usize>,
}

/// Sidecar metadata stored next to a CSV export.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub columns: Vec<String>,
    pub time_indexed: bool,
    #[serde(default)]
    pub segment_starts: Vec<usize>,
}

impl PanelDataset {
    pub fn new(columns: Vec<String>, rows: Array2<f64>, time_indexed: bool) -> Result<Self> {
        if columns.len() != rows.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} column names for {} columns",
                columns.len(),
                rows.ncols()
            )));
        }
        if rows.nrows() < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 rows, got {}", rows.nrows())));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "missing or non-finite entry at row {}",
                pos / rows.ncols()
            )));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(Error::InvalidDataset(format!("duplicate column `{c}`")));
            }
        }
        Ok(PanelDataset { columns, rows, time_indexed, segment_starts: Vec::new() })
    }

    /// Marks independent segments (e.g. concatenated generator windows).
    pub fn with_segments(mut self, mut starts: Vec<usize>) -> Result<Self> {
        starts.sort_unstable();
        starts.dedup();
        if starts.iter().any(|&s| s == 0 || s >= self.nrows()) {
            return Err(Error::InvalidDataset("segment start out of range".into()));
        }
        self.segment_starts = starts;
        Ok(self)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.rows.ncols()
    }

    pub fn is_time_indexed(&self) -> bool {
        self.time_indexed
    }

    pub fn segment_starts(&self) -> &[usize] {
        &self.segment_starts
    }

    /// True when row `t` and `t - 1` belong to the same segment.
    pub fn is_lag_pair(&self, t: usize) -> bool {
        t > 0 && self.segment_starts.binary_search(&t).is_err()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<ArrayView1<'_, f64>> {
        Ok(self.rows.column(self.column_index(name)?))
    }

    /// Reorders rows with the given permutation; the result is not time-indexed.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        let rows = self.rows.select(Axis(0), order);
        PanelDataset::new(self.columns.clone(), rows, false)
    }

    /// Selects a subset of columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx = names.iter().map(|n| self.column_index(n)).collect::<Result<Vec<_>>>()?;
        let mut out = PanelDataset::new(
            names.iter().map(|s| s.to_string()).collect(),
            self.rows.select(Axis(1), &idx),
            self.time_indexed,
        )?;
        out.segment_starts = self.segment_starts.clone();
        Ok(out)
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            columns: self.columns.clone(),
            time_indexed: self.time_indexed,
            segment_starts: self.segment_starts.clone(),
        }
    }

    /// Writes the CSV plus a `<path>.meta.json` sidecar.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(&self.columns)?;
        for row in self.rows.rows() {
            w.write_record(row.iter().map(|&v| format_sig9(v)))?;
        }
        w.flush()?;
        let mut meta = BufWriter::new(File::create(sidecar_path(path))?);
        serde_json::to_writer_pretty(&mut meta, &self.meta())?;
        meta.flush()?;
        Ok(())
    }

    /// Reads a CSV. The sidecar is optional; without it the data is assumed
    /// to be in time order with no segment breaks.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
        let columns: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut data = Vec::new();
        let mut nrows = 0;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != columns.len() {
                return Err(Error::InvalidDataset(format!("row {} has {} fields", nrows + 1, rec.len())));
            }
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidDataset(format!("unparsable value `{field}` in row {}", nrows + 1))
                })?;
                data.push(v);
            }
            nrows += 1;
        }
        let rows = Array2::from_shape_vec((nrows, columns.len()), data)
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        let side = sidecar_path(path);
        if side.exists() {
            let meta: DatasetMeta = serde_json::from_reader(BufReader::new(File::open(side)?))?;
            if meta.columns != columns {
                return Err(Error::InvalidDataset("sidecar columns disagree with CSV header".into()));
            }
            PanelDataset::new(columns, rows, meta.time_indexed)?.with_segments(meta.segment_starts)
        } else {
            PanelDataset::new(columns, rows, true)
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Formats `v` with 9 significant digits, plain decimal where reasonable.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{v:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.123456789123), "0.123456789");
        assert_eq!(format_sig9(-12345.6789012), "-12345.6789");
        assert_eq!(format_sig9(1.5e-9), "1.50000000e-9");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(PanelDataset::new(vec!["a".into()], array![[1.0]], true).is_err());
        assert!(PanelDataset::new(vec!["a".into()], array![[1.0], [f64::NAN]], true).is_err());
        assert!(PanelDataset::new(vec!["a".into(), "b".into()], array![[1.0], [2.0]], true).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_segments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = PanelDataset::new(
            vec!["a".into(), "b".into()],
            array![[1.0, 2.5], [0.333333333333, -4.0], [7.0, 8.0]],
            true,
        )
        .unwrap()
        .with_segments(vec![2])
        .unwrap();
        ds.write_csv(&path).unwrap();
        let back = PanelDataset::read_csv(&path).unwrap();
        assert_eq!(back.columns(), ds.columns());
        assert_eq!(back.segment_starts(), &[2]);
        assert!((back.rows()[[1, 0]] - 0.333333333).abs() < 1e-12);
        assert!(back.is_lag_pair(1));
        assert!(!back.is_lag_pair(2));
    }
}
