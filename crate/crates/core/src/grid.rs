//! Sampling grids, complex fields and centered unitary Fourier transforms.
//!
//! Every grid is square (`n × n`) or a single row (`1 × n`, used for the
//! one-dimensional studies). Sample `n/2` along an axis is the origin, so
//! the zero frequency of a transformed field sits at the grid center and
//! a double transform is the parity operation `j → (n − j) mod n`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a plane is an image of the crystal or its Fourier plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlaneKind {
    NearField,
    FarField,
}

impl PlaneKind {
    pub fn toggled(self) -> Self {
        match self {
            PlaneKind::NearField => PlaneKind::FarField,
            PlaneKind::FarField => PlaneKind::NearField,
        }
    }
}

/// Transverse dimensionality of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dims {
    /// A single row of `n` samples.
    One,
    /// `n × n` samples.
    Two,
}

/// Shape and sampling of a transverse plane.
///
/// `pitch` is in meters for planes reached through optical elements and in
/// inverse meters for the raw output of [`dft2`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    dims: Dims,
    pitch: f64,
    plane: PlaneKind,
}

impl GridSpec {
    /// Builds a validated grid. `n` must be even and at least 8.
    pub fn new(n: usize, dims: Dims, pitch: f64, plane: PlaneKind) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n = {n}: need an even pixel count of at least 8"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "pitch = {pitch}: must be positive"
            )));
        }
        Ok(Self {
            n,
            dims,
            pitch,
            plane,
        })
    }

    pub fn square(n: usize, pitch: f64, plane: PlaneKind) -> Result<Self> {
        Self::new(n, Dims::Two, pitch, plane)
    }

    pub fn line(n: usize, pitch: f64, plane: PlaneKind) -> Result<Self> {
        Self::new(n, Dims::One, pitch, plane)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn plane(&self) -> PlaneKind {
        self.plane
    }

    pub fn rows(&self) -> usize {
        match self.dims {
            Dims::One => 1,
            Dims::Two => self.n,
        }
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    /// Number of samples in the plane.
    pub fn pixels(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_power_of_two(&self) -> bool {
        self.n.is_power_of_two()
    }

    /// The grid of the unitary DFT of a field sampled on `self`.
    pub fn conjugate(&self) -> Self {
        Self {
            n: self.n,
            dims: self.dims,
            pitch: 1.0 / (self.n as f64 * self.pitch),
            plane: self.plane.toggled(),
        }
    }

    pub fn with_pitch(&self, pitch: f64) -> Result<Self> {
        Self::new(self.n, self.dims, pitch, self.plane)
    }

    pub fn with_plane(&self, plane: PlaneKind) -> Self {
        Self { plane, ..*self }
    }

    /// Same sample layout (ignores pitch and plane).
    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.dims == other.dims
    }

    /// Centered physical coordinate of sample `index` along an axis of
    /// length `len`.
    pub fn axis_coordinate(&self, len: usize, index: usize) -> f64 {
        (index as f64 - (len / 2) as f64) * self.pitch
    }

    /// Physical `(x, y)` coordinate of a pixel; `x` runs along columns.
    pub fn coordinate(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.axis_coordinate(self.cols(), col),
            self.axis_coordinate(self.rows(), row),
        )
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols() + col
    }

    /// Pixel of the point reflection through the grid center.
    pub fn parity(&self, row: usize, col: usize) -> (usize, usize) {
        let (rows, cols) = (self.rows(), self.cols());
        ((rows - row) % rows, (cols - col) % cols)
    }

    pub fn check_pixel(&self, row: usize, col: usize) -> Result<()> {
        if row < self.rows() && col < self.cols() {
            Ok(())
        } else {
            Err(Error::PixelOutOfRange {
                row,
                col,
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }
}

/// Complex amplitudes sampled on a [`GridSpec`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    amplitudes: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.pixels()],
        }
    }

    pub fn from_vec(grid: GridSpec, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.pixels() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a grid of {} pixels",
                amplitudes.len(),
                grid.pixels()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut amplitudes = Vec::with_capacity(grid.pixels());
        for row in 0..grid.rows() {
            for col in 0..grid.cols() {
                amplitudes.push(f(row, col));
            }
        }
        Self { grid, amplitudes }
    }

    /// Unit amplitude on one pixel, zero elsewhere.
    pub fn dirac(grid: GridSpec, row: usize, col: usize) -> Result<Self> {
        grid.check_pixel(row, col)?;
        let mut field = Self::zeros(grid);
        field.amplitudes[grid.index(row, col)] = Complex64::new(1.0, 0.0);
        Ok(field)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.amplitudes[self.grid.index(row, col)]
    }

    pub(crate) fn set_grid(&mut self, grid: GridSpec) {
        debug_assert!(grid.same_shape(&self.grid));
        self.grid = grid;
    }

    /// Σ|a|².
    pub fn power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// Pointwise product with a field of identical shape.
    pub fn multiply(&mut self, other: &ComplexField) -> Result<()> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::GridMismatch(
                "pointwise product of fields with different shapes".into(),
            ));
        }
        for (a, b) in self.amplitudes.iter_mut().zip(&other.amplitudes) {
            *a *= b;
        }
        Ok(())
    }
}

/// Planned centered unitary 2-D transform for one grid shape.
///
/// Cheap to clone; planning happens once per shape.
#[derive(Clone)]
pub struct Fourier2 {
    rows: usize,
    cols: usize,
    row_forward: Arc<dyn Fft<f64>>,
    row_inverse: Arc<dyn Fft<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Fourier2 {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let (rows, cols) = (grid.rows(), grid.cols());
        Self {
            rows,
            cols,
            row_forward: planner.plan_fft_forward(cols),
            row_inverse: planner.plan_fft_inverse(cols),
            col_forward: planner.plan_fft_forward(rows),
            col_inverse: planner.plan_fft_inverse(rows),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        assert_eq!(
            data.len(),
            self.rows * self.cols,
            "field/plan shape mismatch"
        );
        let (row_fft, col_fft) = if forward {
            (&self.row_forward, &self.col_forward)
        } else {
            (&self.row_inverse, &self.col_inverse)
        };

        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            row_fft
                .get_inplace_scratch_len()
                .max(col_fft.get_inplace_scratch_len())
        ];
        let row_scale = 1.0 / (self.cols as f64).sqrt();
        for row in data.chunks_exact_mut(self.cols) {
            centered_fft(row_fft.as_ref(), row, &mut scratch, row_scale);
        }

        if self.rows > 1 {
            let col_scale = 1.0 / (self.rows as f64).sqrt();
            let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
            for c in 0..self.cols {
                for (r, v) in column.iter_mut().enumerate() {
                    *v = data[r * self.cols + c];
                }
                centered_fft(col_fft.as_ref(), &mut column, &mut scratch, col_scale);
                for (r, v) in column.iter().enumerate() {
                    data[r * self.cols + c] = *v;
                }
            }
        }
    }
}

fn centered_fft(fft: &dyn Fft<f64>, buf: &mut [Complex64], scratch: &mut [Complex64], scale: f64) {
    let half = buf.len() / 2;
    buf.rotate_left(half);
    fft.process_with_scratch(buf, &mut scratch[..fft.get_inplace_scratch_len()]);
    buf.rotate_left(half);
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Centered unitary forward DFT; the result lives on the conjugate grid.
pub fn dft2(field: &ComplexField) -> ComplexField {
    let mut out = field.clone();
    Fourier2::new(&field.grid).forward(&mut out.amplitudes);
    out.grid = field.grid.conjugate();
    out
}

/// Exact inverse of [`dft2`].
pub fn idft2(field: &ComplexField) -> ComplexField {
    let mut out = field.clone();
    Fourier2::new(&field.grid).inverse(&mut out.amplitudes);
    out.grid = field.grid.conjugate();
    out
}

/// Relative mismatch between the power of a field and of its spectrum.
pub fn parseval_residual(field: &ComplexField) -> f64 {
    let direct = field.power();
    if direct == 0.0 {
        return 0.0;
    }
    (direct - dft2(field).power()).abs() / direct
}

/// Relative L2 distance `‖a − b‖ / ‖b‖` (absolute when `b` vanishes).
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
