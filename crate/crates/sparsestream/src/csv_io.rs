//! Comma-separated stream files: one object per row, optional header, and
//! an optional trailing label column kept as an opaque string.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparsestream_core::{DataWindow, Matrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum LabelColumn {
    #[default]
    Last,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label: LabelColumn,
}

/// Rows of a stream file in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<String>>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// `d × n` matrix with one column per row of the table.
    pub fn matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim(), self.len(), |i, j| self.features[j][i])
    }

    /// Replaces the feature values from a `d × n` matrix of the same shape.
    pub fn with_matrix(&self, m: &Matrix) -> Table {
        let features = (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect();
        Table { features, labels: self.labels.clone() }
    }

    /// Concatenates windows back into rows.
    pub fn from_windows(windows: &[DataWindow]) -> Table {
        let mut features = Vec::new();
        let mut labels = Some(Vec::new());
        for w in windows {
            features.extend(w.matrix().column_iter().map(|c| c.iter().copied().collect::<Vec<_>>()));
            match (w.labels(), labels.as_mut()) {
                (Some(l), Some(acc)) => acc.extend_from_slice(l),
                _ => labels = None,
            }
        }
        Table { features, labels }
    }

    /// Splits rows into windows of `window_size`; the last may be short.
    /// With `shuffle` the rows are permuted by the seed first. Object ids are
    /// the original row positions.
    pub fn into_windows(self, window_size: usize, shuffle: Option<u64>) -> Result<Vec<DataWindow>> {
        if window_size == 0 {
            return Err(Error::Config("window size must be positive".into()));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        if let Some(seed) = shuffle {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        let d = self.dim();
        order
            .chunks(window_size)
            .enumerate()
            .map(|(index, rows)| {
                let m = Matrix::from_fn(d, rows.len(), |i, j| self.features[rows[j]][i]);
                let ids = rows.iter().map(|&r| r as u64).collect();
                let labels = self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r].clone()).collect());
                Ok(DataWindow::new(m, ids, labels, index)?)
            })
            .collect()
    }
}

pub fn read_table(path: &Path, opts: CsvOptions) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(file);
    let header_rows = usize::from(opts.has_header);
    let mut table = Table {
        features: Vec::new(),
        labels: (opts.label == LabelColumn::Last).then(Vec::new),
    };
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1 + header_rows;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows { row, expected, found: record.len() });
        }
        let n_features = match opts.label {
            LabelColumn::Last if expected < 2 => {
                return Err(Error::Data(format!("row {row}: a label column needs at least one feature")))
            }
            LabelColumn::Last => expected - 1,
            LabelColumn::None => expected,
        };
        let mut values = Vec::with_capacity(n_features);
        for (c, field) in record.iter().take(n_features).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: c + 1,
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, column: c + 1, value: field.to_string() });
            }
            values.push(v);
        }
        table.features.push(values);
        if let Some(labels) = table.labels.as_mut() {
            labels.push(record[expected - 1].to_string());
        }
    }
    Ok(table)
}

/// Reads a stream file and cuts it into windows.
pub fn load_csv(path: &Path, opts: CsvOptions, window_size: usize, shuffle: Option<u64>) -> Result<Vec<DataWindow>> {
    read_table(path, opts)?.into_windows(window_size, shuffle)
}

/// Writes rows with shortest round-trip float formatting, so re-reading
/// yields bit-identical values.
pub fn write_table(path: &Path, table: &Table, header: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if header {
        let mut names: Vec<String> = (0..table.dim()).map(|i| format!("f{i}")).collect();
        if table.labels.is_some() {
            names.push("label".into());
        }
        w.write_record(&names)?;
    }
    for (j, row) in table.features.iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(labels) = &table.labels {
            fields.push(labels[j].clone());
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    w.into_inner().map_err(|e| Error::io(path, e.into_error()))?.flush().map_err(|e| Error::io(path, e))
}
