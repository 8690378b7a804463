//! The `n × d` observation matrix and its headerless/headered CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major observations, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("data matrix needs at least one row and one column"));
        }
        if values.len() != n * d {
            return Err(Error::invalid(format!(
                "expected {n}x{d} = {} values, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(DataMatrix { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!("row {i} has {} columns, expected {d}", rows[i].len())));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows at the given indices, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self::new(idx.len(), self.d, values)
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self.rows().map(&mut f).collect();
        Self::from_rows(&rows)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for row in self.rows() {
            mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        mean
    }

    /// Centers every column and divides it by its sample standard deviation (zero-spread columns are only centered).
    pub fn standardized_columns(&self) -> Self {
        let mean = self.column_means();
        let mut var = vec![0.0; self.d];
        for row in self.rows() {
            for j in 0..self.d {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        let sd: Vec<f64> = var.iter().map(|v| (v / denom).sqrt()).collect();
        let values = self
            .rows()
            .flat_map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&sd)
                    .map(|((x, m), s)| if *s > 0.0 { (x - m) / s } else { x - m })
                    .collect::<Vec<_>>()
            })
            .collect();
        DataMatrix { n: self.n, d: self.d, values }
    }

    pub fn read_csv(reader: impl Read, has_header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut values = Vec::new();
        let mut d = None;
        let mut n = 0usize;
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            match d {
                None => d = Some(record.len()),
                Some(d) if d != record.len() => {
                    return Err(Error::Parse {
                        line,
                        message: format!("ragged row: {} fields, expected {d}", record.len()),
                    })
                }
                _ => {}
            }
            for (col, field) in record.iter().enumerate() {
                let x: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {}: cannot parse {field:?} as a number", col + 1),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {}: non-finite value {field:?}", col + 1),
                    });
                }
                values.push(x);
            }
            n += 1;
        }
        let d = d.ok_or_else(|| Error::Parse { line: 0, message: "no data rows".into() })?;
        Self::new(n, d, values)
    }

    pub fn read_csv_path(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, has_header)
    }

    /// Headerless unless `header` is given. Values use Rust's shortest round-trip formatting.
    pub fn write_csv(&self, mut w: impl Write, header: Option<&[String]>) -> Result<()> {
        if let Some(h) = header {
            writeln!(w, "{}", h.join(","))?;
        }
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}
