//! Dense 2-D magnitude images.

use crate::error::{Error, Result};

/// Row-major grid of real intensities with isotropic physical pixel spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    spacing_mm: f64,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(rows: usize, cols: usize, spacing_mm: f64) -> Result<Self> {
        Self::filled(rows, cols, spacing_mm, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, spacing_mm: f64, value: f64) -> Result<Self> {
        let len = checked_len(rows, cols)?;
        Self::from_vec(rows, cols, spacing_mm, vec![value; len])
    }

    pub fn from_vec(rows: usize, cols: usize, spacing_mm: f64, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(rows, cols)?;
        if data.len() != len {
            return Err(Error::invalid(format!(
                "buffer holds {} values, a {rows}x{cols} image needs {len}",
                data.len()
            )));
        }
        if !(spacing_mm > 0.0 && spacing_mm.is_finite()) {
            return Err(Error::invalid(format!(
                "pixel spacing must be positive, got {spacing_mm}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            spacing_mm,
            data,
        })
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        spacing_mm: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let len = checked_len(rows, cols)?;
        let mut data = Vec::with_capacity(len);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::from_vec(rows, cols, spacing_mm, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.rows && col < self.cols
    }

    /// Value at a possibly out-of-range position, mirrored back into the grid.
    #[inline]
    pub fn get_mirrored(&self, row: isize, col: isize) -> f64 {
        self.get(mirror_index(row, self.rows), mirror_index(col, self.cols))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            rows: self.rows,
            cols: self.cols,
            spacing_mm: self.spacing_mm,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn ensure_same_dims(&self, other_rows: usize, other_cols: usize, what: &str) -> Result<()> {
        if (self.rows, self.cols) != (other_rows, other_cols) {
            return Err(Error::DimensionMismatch {
                what: what.to_string(),
                rows: self.rows,
                cols: self.cols,
                got_rows: other_rows,
                got_cols: other_cols,
            });
        }
        Ok(())
    }
}

fn checked_len(rows: usize, cols: usize) -> Result<usize> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be non-zero, got {rows}x{cols}"
        )));
    }
    rows.checked_mul(cols)
        .filter(|&n| n <= isize::MAX as usize / std::mem::size_of::<f64>())
        .ok_or_else(|| Error::invalid(format!("image dimensions {rows}x{cols} overflow")))
}

/// Reflects an index into `0..len` without repeating the border sample
/// (`-1 -> 1`, `len -> len - 2`), folding repeatedly for large offsets.
#[inline]
pub fn mirror_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let n = len as isize;
    if (0..n).contains(&i) {
        return i as usize;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}
