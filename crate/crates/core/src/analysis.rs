//! Observables derived from the joint probability `|ψ|²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{BiphotonWavefunction, Sample};
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Non-normalized joint detection probability over (signal, idler) pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProbability {
    grid: GridSpec,
    values: Vec<f64>,
    total: f64,
}

impl JointProbability {
    /// Wraps precomputed `P(s, i)` values stored `s·P + i`.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let p = grid.pixels();
        if values.len() != p * p {
            return Err(Error::GridMismatch(format!(
                "{} joint probabilities for {p} pixels per plane",
                values.len()
            )));
        }
        let total: f64 = values.iter().sum();
        if !total.is_finite() {
            return Err(Error::Numerical("joint probability is not finite".into()));
        }
        if total <= 0.0 {
            return Err(Error::ZeroWavefunction);
        }
        Ok(Self {
            grid,
            values,
            total,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn pixels(&self) -> usize {
        self.grid.pixels()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, s: usize, i: usize) -> f64 {
        self.values[s * self.pixels() + i]
    }

    /// `W = Σ P`.
    pub fn total(&self) -> f64 {
        self.total
    }
}

/// `P = |ψ|²` together with its total weight.
pub fn joint_probability<T: Sample>(psi: &BiphotonWavefunction<T>) -> Result<JointProbability> {
    JointProbability::from_values(*psi.grid(), psi.probabilities().collect())
}

/// `I_s(r_s) = Σ_{r_i} P(r_s, r_i)`.
pub fn signal_intensity(p: &JointProbability) -> Vec<f64> {
    p.values
        .chunks_exact(p.pixels())
        .map(|row| row.iter().sum())
        .collect()
}

/// `I_i(r_i) = Σ_{r_s} P(r_s, r_i)`.
pub fn idler_intensity(p: &JointProbability) -> Vec<f64> {
    let mut out = vec![0.0; p.pixels()];
    for row in p.values.chunks_exact(p.pixels()) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    /// Binned over `r_s − r_i`.
    Difference,
    /// Binned over `r_s + r_i` (idler rotated by 180°).
    Sum,
}

impl CorrelationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorrelationKind::Difference => "difference",
            CorrelationKind::Sum => "sum",
        }
    }
}

/// Correlation function over the difference or sum coordinate, normalized
/// to unit total. The zero coordinate sits at the grid center.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    grid: GridSpec,
    values: Vec<f64>,
    kind: CorrelationKind,
}

impl CorrelationMap {
    pub fn new(grid: GridSpec, values: Vec<f64>, kind: CorrelationKind) -> Result<Self> {
        if values.len() != grid.pixels() {
            return Err(Error::GridMismatch(format!(
                "{} correlation values for {} pixels",
                values.len(),
                grid.pixels()
            )));
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> CorrelationKind {
        self.kind
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[self.grid.index(row, col)]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Row-major first maximum (smallest row, then smallest column).
    pub fn argmax(&self) -> (usize, usize) {
        let k = argmax(&self.values);
        (k / self.grid.cols(), k % self.grid.cols())
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

fn correlation(p: &JointProbability, kind: CorrelationKind) -> CorrelationMap {
    let g = p.grid;
    let (rows, cols) = (g.rows(), g.cols());
    let np = g.pixels();
    let mut bins = vec![0.0; np];
    // Bin of (s, i) along one axis, zero coordinate at len/2.
    let bin = |a: usize, b: usize, len: usize| match kind {
        CorrelationKind::Difference => (a + len - b + len / 2) % len,
        CorrelationKind::Sum => (a + b + len / 2) % len,
    };
    for sr in 0..rows {
        for sc in 0..cols {
            let row = &p.values[(sr * cols + sc) * np..(sr * cols + sc + 1) * np];
            for ir in 0..rows {
                let br = bin(sr, ir, rows) * cols;
                let prow = &row[ir * cols..(ir + 1) * cols];
                for (ic, v) in prow.iter().enumerate() {
                    bins[br + bin(sc, ic, cols)] += v;
                }
            }
        }
    }
    for b in &mut bins {
        *b /= p.total;
    }
    CorrelationMap {
        grid: g,
        values: bins,
        kind,
    }
}

/// `C(Δ) = (1/W)·Σ_{r_s − r_i = Δ} P(r_s, r_i)`, periodic in Δ.
pub fn difference_correlation(p: &JointProbability) -> CorrelationMap {
    correlation(p, CorrelationKind::Difference)
}

/// `C(Σ) = (1/W)·Σ_{r_s + r_i = Σ} P(r_s, r_i)`, periodic in Σ.
pub fn sum_correlation(p: &JointProbability) -> CorrelationMap {
    correlation(p, CorrelationKind::Sum)
}

/// Periodic disc of pixel offsets with `dr² + dc² ≤ radius²`.
fn disc_offsets(grid: &GridSpec, radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let row_reach = if grid.rows() == 1 { 0 } else { r };
    let mut out = Vec::new();
    for dr in -row_reach..=row_reach {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r * r {
                out.push((dr, dc));
            }
        }
    }
    out
}

fn wrap(base: usize, offset: isize, len: usize) -> usize {
    (base as isize + offset).rem_euclid(len as isize) as usize
}

fn check_window(grid: &GridSpec, radius: usize, what: &str) -> Result<()> {
    let span = 2 * radius + 1;
    let too_wide = span > grid.cols() || (grid.rows() > 1 && span > grid.rows());
    if too_wide {
        return Err(Error::InvalidParameter(format!(
            "{what} radius {radius} exceeds a {}x{} grid",
            grid.rows(),
            grid.cols()
        )));
    }
    Ok(())
}

/// Fraction of the correlation map inside a disc centered on its maximum.
pub fn pairs_ratio(c: &CorrelationMap, peak_radius: usize) -> Result<f64> {
    check_window(&c.grid, peak_radius, "peak")?;
    let (pr, pc) = c.argmax();
    let (rows, cols) = (c.grid.rows(), c.grid.cols());
    Ok(disc_offsets(&c.grid, peak_radius)
        .into_iter()
        .map(|(dr, dc)| c.at(wrap(pr, dr, rows), wrap(pc, dc, cols)))
        .sum())
}

/// Second-moment widths `(σ_x, σ_y)` of the correlation peak, in the units
/// of the map's pitch.
///
/// The window is the `(2w+1)²` square around the maximum; the median of its
/// border is subtracted as background. An axis with no spread reports the
/// single-pixel convention `pitch/√12`.
pub fn peak_std(c: &CorrelationMap, window_radius: usize) -> Result<(f64, f64)> {
    check_window(&c.grid, window_radius, "window")?;
    let (pr, pc) = c.argmax();
    let (rows, cols) = (c.grid.rows(), c.grid.cols());
    let w = window_radius as isize;
    let wr = if rows == 1 { 0 } else { w };

    let mut window = Vec::new();
    let mut border = Vec::new();
    for dr in -wr..=wr {
        for dc in -w..=w {
            let v = c.at(wrap(pr, dr, rows), wrap(pc, dc, cols));
            window.push((dr as f64, dc as f64, v));
            if dc.abs() == w || (rows > 1 && dr.abs() == w) {
                border.push(v);
            }
        }
    }
    border.sort_by(f64::total_cmp);
    let background = if border.is_empty() {
        0.0
    } else if border.len() % 2 == 1 {
        border[border.len() / 2]
    } else {
        0.5 * (border[border.len() / 2 - 1] + border[border.len() / 2])
    };

    let (mut m0, mut mx, mut my) = (0.0, 0.0, 0.0);
    for &(dy, dx, v) in &window {
        let v = (v - background).max(0.0);
        m0 += v;
        mx += v * dx;
        my += v * dy;
    }
    if m0 <= 0.0 {
        let quantum = c.grid.pitch() / 12f64.sqrt();
        return Ok((quantum, quantum));
    }
    let (cx, cy) = (mx / m0, my / m0);
    let (mut vx, mut vy) = (0.0, 0.0);
    for &(dy, dx, v) in &window {
        let v = (v - background).max(0.0);
        vx += v * (dx - cx).powi(2);
        vy += v * (dy - cy).powi(2);
    }
    let pitch = c.grid.pitch();
    let width = |var: f64| {
        if var > 0.0 {
            (var / m0).sqrt() * pitch
        } else {
            pitch / 12f64.sqrt()
        }
    };
    Ok((width(vx), width(vy)))
}

/// Minimum mask population for a meaningful contrast estimate.
pub const MIN_CONTRAST_PIXELS: usize = 16;

/// `std/mean` of the map restricted to `mask`.
pub fn speckle_contrast(c: &CorrelationMap, envelope_mask: &[bool]) -> Result<f64> {
    contrast(&c.values, envelope_mask)
}

/// `std/mean` of arbitrary values restricted to `mask`.
pub fn contrast(values: &[f64], mask: &[bool]) -> Result<f64> {
    if mask.len() != values.len() {
        return Err(Error::GridMismatch("mask and map sizes differ".into()));
    }
    let selected: Vec<f64> = values
        .iter()
        .zip(mask)
        .filter_map(|(v, m)| m.then_some(*v))
        .collect();
    if selected.len() < MIN_CONTRAST_PIXELS {
        return Err(Error::InsufficientMask {
            selected: selected.len(),
            required: MIN_CONTRAST_PIXELS,
        });
    }
    let n = selected.len() as f64;
    let mean = selected.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Ok(0.0);
    }
    let var = selected.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Pixels where a periodic Gaussian blur of the map reaches `threshold`
/// times its maximum.
pub fn envelope_mask(
    values: &[f64],
    rows: usize,
    cols: usize,
    sigma_px: f64,
    threshold: f64,
) -> Vec<bool> {
    let blurred = gaussian_blur(values, rows, cols, sigma_px);
    let max = blurred.iter().cloned().fold(f64::MIN, f64::max);
    blurred.iter().map(|v| *v >= threshold * max).collect()
}

/// Separable periodic Gaussian blur.
pub fn gaussian_blur(values: &[f64], rows: usize, cols: usize, sigma_px: f64) -> Vec<f64> {
    assert_eq!(values.len(), rows * cols);
    if sigma_px <= 0.0 {
        return values.to_vec();
    }
    let kernel = |len: usize| -> Vec<f64> {
        let reach = ((4.0 * sigma_px).ceil() as usize).min(len / 2);
        let taps: Vec<f64> = (0..=2 * reach)
            .map(|k| {
                let d = k as f64 - reach as f64;
                (-d * d / (2.0 * sigma_px * sigma_px)).exp()
            })
            .collect();
        let norm: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / norm).collect()
    };
    let mut out = values.to_vec();
    let kc = kernel(cols);
    let reach_c = kc.len() / 2;
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            tmp[r * cols + c] = kc
                .iter()
                .enumerate()
                .map(|(k, t)| t * out[r * cols + wrap(c, k as isize - reach_c as isize, cols)])
                .sum();
        }
    }
    out.copy_from_slice(&tmp);
    if rows > 1 {
        let kr = kernel(rows);
        let reach_r = kr.len() / 2;
        for r in 0..rows {
            for c in 0..cols {
                tmp[r * cols + c] = kr
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * out[wrap(r, k as isize - reach_r as isize, rows) * cols + c])
                    .sum();
            }
        }
        out.copy_from_slice(&tmp);
    }
    out
}

/// Pixels connected (4-neighbour, periodic) to the maximum while staying at
/// or above `floor_db` below it.
pub fn peak_support(values: &[f64], rows: usize, cols: usize, floor_db: f64) -> Vec<bool> {
    let start = argmax(values);
    let level = values[start] * 10f64.powf(floor_db / 10.0);
    let mut inside = vec![false; values.len()];
    let mut stack = vec![start];
    inside[start] = true;
    while let Some(k) = stack.pop() {
        let (r, c) = (k / cols, k % cols);
        let neighbours = [
            (wrap(r, 1, rows), c),
            (wrap(r, -1, rows), c),
            (r, wrap(c, 1, cols)),
            (r, wrap(c, -1, cols)),
        ];
        for (nr, nc) in neighbours {
            let n = nr * cols + nc;
            if !inside[n] && values[n] >= level {
                inside[n] = true;
                stack.push(n);
            }
        }
    }
    inside
}

/// Map divided by its periodic Gaussian blur, so that only fluctuations
/// around the local envelope remain. Pixels with a zero envelope map to 1.
pub fn envelope_normalized(values: &[f64], rows: usize, cols: usize, sigma_px: f64) -> Vec<f64> {
    let envelope = gaussian_blur(values, rows, cols, sigma_px);
    values
        .iter()
        .zip(&envelope)
        .map(|(v, e)| if *e > 0.0 { v / e } else { 1.0 })
        .collect()
}

/// Periodic square dilation of a mask by `radius` pixels (rows are left
/// alone on one-dimensional grids).
pub fn dilate(mask: &[bool], rows: usize, cols: usize, radius: usize) -> Vec<bool> {
    assert_eq!(mask.len(), rows * cols);
    let r = radius as isize;
    let row_reach = if rows > 1 { r } else { 0 };
    let mut out = vec![false; mask.len()];
    for (k, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let (row, col) = (k / cols, k % cols);
        for dr in -row_reach..=row_reach {
            for dc in -r..=r {
                out[wrap(row, dr, rows) * cols + wrap(col, dc, cols)] = true;
            }
        }
    }
    out
}

/// `10·log₁₀(v / max)`, floored at `floor_db`.
pub fn to_db(values: &[f64], floor_db: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    values
        .iter()
        .map(|v| {
            if max <= 0.0 || *v <= 0.0 {
                floor_db
            } else {
                (10.0 * (v / max).log10()).max(floor_db)
            }
        })
        .collect()
}

/// Values clamped from below at `floor_db` relative to the maximum, on a
/// linear scale.
pub fn floored(values: &[f64], floor_db: f64) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let level = max * 10f64.powf(floor_db / 10.0);
    values.iter().map(|v| v.max(level)).collect()
}

/// 8-bit greyscale rendering of the dB-scaled map (floor → 0, max → 255).
pub fn db_image(values: &[f64], floor_db: f64) -> Vec<u8> {
    to_db(values, floor_db)
        .into_iter()
        .map(|db| ((1.0 - db / floor_db) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Joint probability summed over the y coordinates of both photons:
/// an `n × n` image indexed `(x_s, x_i)`. For one-dimensional grids this is
/// the joint probability itself.
pub fn joint_x_marginal(p: &JointProbability) -> Vec<f64> {
    let g = p.grid;
    let (rows, cols) = (g.rows(), g.cols());
    let np = g.pixels();
    let mut out = vec![0.0; cols * cols];
    for sr in 0..rows {
        for sc in 0..cols {
            let row = &p.values[(sr * cols + sc) * np..(sr * cols + sc + 1) * np];
            let target = &mut out[sc * cols..(sc + 1) * cols];
            for chunk in row.chunks_exact(cols) {
                for (t, v) in target.iter_mut().zip(chunk) {
                    *t += v;
                }
            }
        }
    }
    out
}

/// Periodic autocovariance of an image at a pixel shift.
pub fn autocovariance(values: &[f64], rows: usize, cols: usize, shift: (isize, isize)) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut acc = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let other = values[wrap(r, shift.0, rows) * cols + wrap(c, shift.1, cols)];
            acc += (values[r * cols + c] - mean) * (other - mean);
        }
    }
    acc / n
}

/// Ratio of the autocovariance along the anti-diagonal (shift
/// `(step, −step)`) to the one across it (`(step, step)`).
///
/// On a joint-probability image indexed `(s, i)` a shift of one step along
/// the anti-diagonal keeps `s + i` and moves `s − i` by two bins, so lines
/// parallel to the phase-matching line give ratios well above one. A
/// non-positive cross covariance yields `+∞`.
pub fn line_anisotropy(values: &[f64], rows: usize, cols: usize, step: usize) -> f64 {
    let s = step as isize;
    let along = autocovariance(values, rows, cols, (s, -s));
    let across = autocovariance(values, rows, cols, (s, s));
    if across <= 0.0 {
        f64::INFINITY
    } else {
        along / across
    }
}

/// Intensity-weighted centroid `(col, row)` in pixels.
pub fn centroid(values: &[f64], grid: &GridSpec) -> (f64, f64) {
    let cols = grid.cols();
    let (mut w, mut x, mut y) = (0.0, 0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        w += v;
        x += v * (k % cols) as f64;
        y += v * (k / cols) as f64;
    }
    (x / w, y / w)
}

/// Standard deviations along one axis: pump size and emission bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidtInputs {
    /// Pump standard deviation (m, or s for the temporal axis).
    pub sigma_pump: f64,
    /// Down-converted bandwidth standard deviation (m⁻¹, or Hz).
    pub sigma_nu: f64,
}

/// `K = ½·σ_pump·2π·σ_ν`.
pub fn schmidt_number(inputs: SchmidtInputs) -> Result<f64> {
    let SchmidtInputs {
        sigma_pump,
        sigma_nu,
    } = inputs;
    if !(sigma_pump > 0.0 && sigma_nu > 0.0 && sigma_pump.is_finite() && sigma_nu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Schmidt inputs must be positive (σ = {sigma_pump}, σ_ν = {sigma_nu})"
        )));
    }
    Ok(0.5 * sigma_pump * 2.0 * PI * sigma_nu)
}

/// Degree of the EPR paradox from near- and far-field peak widths.
///
/// The per-axis figure of merit is supplied by the caller; the two axes are
/// combined as `√(V_x·V_y)`.
pub struct EprEstimator {
    per_axis: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl EprEstimator {
    pub fn new(per_axis: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            per_axis: Box::new(per_axis),
        }
    }

    pub fn per_axis(&self, near_sigma: f64, far_sigma: f64) -> f64 {
        (self.per_axis)(near_sigma, far_sigma)
    }

    /// `near` and `far` are `(σ_x, σ_y)` pairs as returned by [`peak_std`].
    pub fn degree(&self, near: (f64, f64), far: (f64, f64)) -> f64 {
        combine_axes(self.per_axis(near.0, far.0), self.per_axis(near.1, far.1))
    }
}

pub fn combine_axes(vx: f64, vy: f64) -> f64 {
    (vx * vy).sqrt()
}
