//! Privacy primitives: l1 truncation, truncated means, Laplace noise,
//! and the audit trail that records every noise-bearing operation.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// A binary sample matrix stored row-major, one byte per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    data: Vec<u8>,
    rows: usize,
    dim: usize,
}

impl Dataset {
    pub fn new(data: Vec<u8>, rows: usize, dim: usize) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::EmptyDataset);
        }
        if data.len() != rows * dim {
            return Err(Error::InvalidParameter(format!(
                "data length {} does not match {rows} x {dim}",
                data.len()
            )));
        }
        if data.iter().any(|&b| b > 1) {
            return Err(Error::InvalidParameter(
                "dataset entries must be 0 or 1".into(),
            ));
        }
        Ok(Self { data, rows, dim })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("ragged rows".into()));
        }
        Self::new(rows.concat(), m, d)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// A borrowed view of a contiguous block of rows.
    pub fn view(&self, start: usize, len: usize) -> DatasetView<'_> {
        assert!(start + len <= self.rows, "view out of range");
        DatasetView {
            data: &self.data[start * self.dim..(start + len) * self.dim],
            rows: len,
            dim: self.dim,
        }
    }

    pub fn full_view(&self) -> DatasetView<'_> {
        self.view(0, self.rows)
    }

    /// Copy with the listed coordinates complemented (x -> 1 - x).
    pub fn flipped(&self, mask: &[bool]) -> Result<Dataset> {
        if mask.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: mask.len(),
                right: self.dim,
            });
        }
        let mut data = self.data.clone();
        for i in 0..self.rows {
            for (j, &flip) in mask.iter().enumerate() {
                if flip {
                    let idx = i * self.dim + j;
                    data[idx] = 1 - data[idx];
                }
            }
        }
        Ok(Dataset {
            data,
            rows: self.rows,
            dim: self.dim,
        })
    }
}

/// A borrowed slice of dataset rows.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a> {
    data: &'a [u8],
    rows: usize,
    dim: usize,
}

impl<'a> DatasetView<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [u8] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Plain column means over a subset of coordinates.
    pub fn column_means(&self, cols: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0f64; cols.len()];
        for i in 0..self.rows {
            let row = self.row(i);
            for (k, &j) in cols.iter().enumerate() {
                sums[k] += row[j] as f64;
            }
        }
        let m = self.rows as f64;
        sums.iter_mut().for_each(|s| *s /= m);
        sums
    }
}

/// l1 truncation of a row to radius B: identity below the radius, rescale above.
pub fn trunc(x: &[f64], radius: f64) -> Vec<f64> {
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    if norm <= radius || norm == 0.0 {
        x.to_vec()
    } else {
        let scale = radius / norm;
        x.iter().map(|v| v * scale).collect()
    }
}

/// Truncated mean of real-valued rows. Returns the mean vector and the
/// number of rows that were actually truncated.
pub fn tmean(rows: &[Vec<f64>], radius: f64) -> Result<(Vec<f64>, usize)> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = rows[0].len();
    let mut acc = vec![0.0f64; d];
    let mut truncated = 0usize;
    for row in rows {
        let norm: f64 = row.iter().map(|v| v.abs()).sum();
        if norm <= radius {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        } else {
            truncated += 1;
            let scale = radius / norm;
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v * scale;
            }
        }
    }
    acc.iter_mut().for_each(|a| *a /= m as f64);
    Ok((acc, truncated))
}

/// Truncated mean of a binary dataset view restricted to `cols`. For binary
/// rows the l1 norm is the popcount over the selected coordinates.
pub fn tmean_binary(view: &DatasetView<'_>, cols: &[usize], radius: f64) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0f64; cols.len()];
    let mut truncated = 0usize;
    for i in 0..view.rows() {
        let row = view.row(i);
        let norm = cols.iter().map(|&j| row[j] as u32).sum::<u32>() as f64;
        if norm <= radius {
            for (k, &j) in cols.iter().enumerate() {
                acc[k] += row[j] as f64;
            }
        } else {
            truncated += 1;
            let scale = radius / norm;
            for (k, &j) in cols.iter().enumerate() {
                acc[k] += row[j] as f64 * scale;
            }
        }
    }
    let m = view.rows() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    (acc, truncated)
}

/// l1-sensitivity of the truncated mean: B/m.
pub fn tmean_sensitivity(radius: f64, m: usize) -> f64 {
    radius / m as f64
}

/// One Laplace draw via the inverse-CDF transform of a uniform 64-bit stream.
pub fn laplace_sample(scale: f64, rng: &mut ChaCha12Rng) -> f64 {
    debug_assert!(scale > 0.0);
    // u in [-0.5, 0.5); resample the single atom that would hit ln(0).
    loop {
        let u = rng.random::<f64>() - 0.5;
        let mag = 1.0 - 2.0 * u.abs();
        if mag > 0.0 {
            return -scale * u.signum() * mag.ln();
        }
    }
}

/// Calibration for one invocation of the Laplace mechanism.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub sensitivity: f64,
    pub epsilon: f64,
}

impl NoiseSpec {
    pub fn new(sensitivity: f64, epsilon: f64) -> Result<Self> {
        if sensitivity < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sensitivity must be nonnegative: {sensitivity}"
            )));
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive: {epsilon}"
            )));
        }
        Ok(Self {
            sensitivity,
            epsilon,
        })
    }

    pub fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }
}

/// One entry of the noise audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub block: String,
    pub sensitivity: f64,
    pub epsilon: f64,
    pub scale: f64,
}

/// Record of every noise-bearing operation performed during a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditTrail {
    records: Vec<AuditRecord>,
}

impl AuditTrail {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: AuditRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }
}

/// Laplace mechanism: adds i.i.d. Laplace(sensitivity/epsilon) noise per
/// coordinate and logs the calibration under `block`. Zero sensitivity adds
/// no noise (the limit of the definition).
pub fn laplace_mechanism(
    values: &[f64],
    spec: &NoiseSpec,
    block: &str,
    rng: &mut ChaCha12Rng,
    trail: &mut AuditTrail,
) -> Vec<f64> {
    let scale = spec.scale();
    trail.push(AuditRecord {
        block: block.to_string(),
        sensitivity: spec.sensitivity,
        epsilon: spec.epsilon,
        scale,
    });
    if scale == 0.0 {
        return values.to_vec();
    }
    values
        .iter()
        .map(|&v| v + laplace_sample(scale, rng))
        .collect()
}
