//! Brute-force reference computations for tiny grids.
//!
//! Every optical element is built as an explicit `P × P` matrix from its
//! defining formula, and the wave function is the literal double sum over
//! slices and pump pixels. Nothing here shares code with the FFT path.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::engine::{CrystalSpec, PhaseMatching, Photon, PumpSpec, SliceRule};
use crate::error::{Error, Result};
use crate::grid::{Dims, GridSpec};
use crate::optics::{OpticalElement, OpticalSystem};

/// Largest grid side the dense oracle accepts.
pub const MAX_GRID: usize = 8;
/// Largest slice count the dense oracle accepts.
pub const MAX_SLICES: usize = 8;
/// Largest grid side accepted by [`brute_force_correlations`].
pub const MAX_CORRELATION_GRID: usize = 16;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        Self::from_fn(values.len(), |r, c| {
            if r == c {
                values[r]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.dim, rhs.dim);
        DenseMatrix::from_fn(self.dim, |r, c| {
            (0..self.dim).map(|k| self.at(r, k) * rhs.at(k, c)).sum()
        })
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|r| (0..self.dim).map(|k| self.at(r, k) * v[k]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, |r, c| self.at(c, r).conj())
    }
}

/// Axis lengths `(rows, cols)` of a grid.
fn shape(grid: &GridSpec) -> (usize, usize) {
    match grid.dims() {
        Dims::One => (1, grid.n()),
        Dims::Two => (grid.n(), grid.n()),
    }
}

/// Centered integer offsets `(row, col)` of pixel `k`.
fn centered(grid: &GridSpec, k: usize) -> (f64, f64) {
    let (rows, cols) = shape(grid);
    (
        (k / cols) as f64 - (rows / 2) as f64,
        (k % cols) as f64 - (cols / 2) as f64,
    )
}

/// Unitary centered DFT, `F[k][m] = exp(−2πi·k·m/N)/√P` per axis.
pub fn dft_matrix(grid: &GridSpec) -> DenseMatrix {
    let (rows, cols) = shape(grid);
    let p = rows * cols;
    let norm = 1.0 / (p as f64).sqrt();
    DenseMatrix::from_fn(p, |k, m| {
        let (kr, kc) = centered(grid, k);
        let (mr, mc) = centered(grid, m);
        let phase = -2.0 * PI * (kr * mr / rows as f64 + kc * mc / cols as f64);
        Complex64::from_polar(norm, phase)
    })
}

/// `F⁻¹ · diag(exp(i·φ(ν))) · F` for a spectral phase `φ(ν_x, ν_y)`.
fn spectral_filter(grid: &GridSpec, phase: impl Fn(f64, f64) -> f64) -> DenseMatrix {
    let f = dft_matrix(grid);
    let step = 1.0 / (grid.n() as f64 * grid.pitch());
    let diag: Vec<Complex64> = (0..f.dim())
        .map(|k| {
            let (kr, kc) = centered(grid, k);
            Complex64::from_polar(1.0, phase(kc * step, kr * step))
        })
        .collect();
    f.adjoint().mul(&DenseMatrix::diagonal(&diag)).mul(&f)
}

/// Dense matrix of one element acting on fields sampled on `grid`.
pub fn element_matrix(element: &OpticalElement, grid: &GridSpec) -> DenseMatrix {
    let p = grid.pixels();
    match element {
        OpticalElement::LensFourier { .. } => dft_matrix(grid),
        OpticalElement::FreeSpace {
            distance,
            wavelength,
        } => spectral_filter(grid, |nx, ny| {
            -PI * wavelength * distance * (nx * nx + ny * ny)
        }),
        OpticalElement::Phase(mask) => DenseMatrix::diagonal(
            &mask
                .phases()
                .iter()
                .map(|phi| Complex64::new(phi.cos(), phi.sin()))
                .collect::<Vec<_>>(),
        ),
        OpticalElement::Relay {
            magnification,
            invert,
        } => {
            if (*magnification < 0) ^ *invert {
                let (rows, cols) = shape(grid);
                DenseMatrix::from_fn(p, |k, m| {
                    let (kr, kc) = (k / cols, k % cols);
                    let (mr, mc) = (m / cols, m % cols);
                    let hit = mr == (rows - kr) % rows && mc == (cols - kc) % cols;
                    Complex64::new(if hit { 1.0 } else { 0.0 }, 0.0)
                })
            } else {
                DenseMatrix::identity(p)
            }
        }
        OpticalElement::Aperture { radius } => {
            let pitch = grid.pitch();
            let diag: Vec<Complex64> = (0..p)
                .map(|k| {
                    let (r, c) = centered(grid, k);
                    let rho2 = (r * pitch).powi(2) + (c * pitch).powi(2);
                    Complex64::new(if rho2 <= radius * radius { 1.0 } else { 0.0 }, 0.0)
                })
                .collect();
            DenseMatrix::diagonal(&diag)
        }
    }
}

/// Product of every element matrix, last element leftmost. Column `r` is the
/// impulse response of source pixel `r`.
pub fn system_matrix(system: &OpticalSystem) -> DenseMatrix {
    let mut out = DenseMatrix::identity(system.input_grid().pixels());
    for (i, e) in system.elements().iter().enumerate() {
        out = element_matrix(e, system.grid_before(i)).mul(&out);
    }
    out
}

/// In-crystal propagation of a photon born at depth `z` to the exit face.
pub fn crystal_matrix(
    crystal: &CrystalSpec,
    z: f64,
    photon: Photon,
    grid: &GridSpec,
) -> DenseMatrix {
    let walk = if crystal.pm_type == PhaseMatching::Type2 && photon == Photon::Signal {
        crystal.walkoff_angle
    } else {
        0.0
    };
    let remaining = crystal.length - z;
    let lambda = crystal.wavelength_down / crystal.refractive_index;
    spectral_filter(grid, |nx, ny| {
        remaining * (2.0 * PI * walk * nx - PI * lambda * (nx * nx + ny * ny))
    })
}

/// Gaussian pump amplitude evaluated pixel by pixel.
pub fn pump_samples(pump: &PumpSpec, grid: &GridSpec) -> Vec<Complex64> {
    let fwhm_to_sigma = 2.0 * (2.0 * 2f64.ln()).sqrt();
    let sigma = pump.waist_fwhm / fwhm_to_sigma;
    let one_d = grid.dims() == Dims::One;
    (0..grid.pixels())
        .map(|k| {
            let (r, c) = centered(grid, k);
            let x = c * grid.pitch() - pump.center.0;
            let y = if one_d {
                0.0
            } else {
                r * grid.pitch() - pump.center.1
            };
            let intensity = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            Complex64::new(pump.amplitude * intensity.sqrt(), 0.0)
        })
        .collect()
}

fn slice_depths(crystal: &CrystalSpec) -> Vec<f64> {
    let m = crystal.slices as f64;
    (0..crystal.slices)
        .map(|k| {
            let offset = match crystal.slice_rule {
                SliceRule::Midpoint => 0.5,
                SliceRule::Exit => 1.0,
            };
            (k as f64 + offset) * crystal.length / m
        })
        .collect()
}

fn check_size(grid: &GridSpec, slices: usize) -> Result<()> {
    if grid.n() > MAX_GRID || slices > MAX_SLICES {
        return Err(Error::SizeGuard(format!(
            "oracle limited to n ≤ {MAX_GRID} and at most {MAX_SLICES} slices (got n = {}, {slices} slices)",
            grid.n()
        )));
    }
    Ok(())
}

/// `ψ(s, i) = Σ_r E(r)·H_s[s][r]·H_i[i][r]`, stored `s·P + i`.
pub fn thin_double_sum(pump: &[Complex64], hs: &DenseMatrix, hi: &DenseMatrix) -> Vec<Complex64> {
    let p = pump.len();
    let mut psi = vec![Complex64::new(0.0, 0.0); p * p];
    for s in 0..p {
        for i in 0..p {
            psi[s * p + i] = (0..p).map(|r| pump[r] * hs.at(s, r) * hi.at(i, r)).sum();
        }
    }
    psi
}

/// Thin-crystal reference with an explicit pump.
pub fn thin_wavefunction(
    pump: &[Complex64],
    signal_arm: &OpticalSystem,
    idler_arm: &OpticalSystem,
) -> Result<Vec<Complex64>> {
    check_size(signal_arm.input_grid(), 1)?;
    Ok(thin_double_sum(
        pump,
        &system_matrix(signal_arm),
        &system_matrix(idler_arm),
    ))
}

/// Thick-crystal reference: coherent sum over slices of the thin double sum.
pub fn thick_wavefunction(
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    signal_arm: &OpticalSystem,
    idler_arm: &OpticalSystem,
) -> Result<Vec<Complex64>> {
    let grid = *signal_arm.input_grid();
    check_size(&grid, crystal.slices)?;
    let e0 = pump_samples(pump, &grid);
    let s_arm = system_matrix(signal_arm);
    let i_arm = system_matrix(idler_arm);
    let lambda_p = crystal.wavelength_pump / crystal.refractive_index;
    let p = grid.pixels();
    let mut psi = vec![Complex64::new(0.0, 0.0); p * p];
    for z in slice_depths(crystal) {
        let pump_z =
            spectral_filter(&grid, |nx, ny| -PI * lambda_p * z * (nx * nx + ny * ny)).apply(&e0);
        let hs = s_arm.mul(&crystal_matrix(crystal, z, Photon::Signal, &grid));
        let hi = i_arm.mul(&crystal_matrix(crystal, z, Photon::Idler, &grid));
        for (acc, v) in psi.iter_mut().zip(thin_double_sum(&pump_z, &hs, &hi)) {
            *acc += v;
        }
    }
    Ok(psi)
}

/// Difference and sum correlations of a joint probability by direct
/// enumeration of every pixel pair, each normalized to unit total.
pub fn brute_force_correlations(grid: &GridSpec, joint: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.n() > MAX_CORRELATION_GRID {
        return Err(Error::SizeGuard(format!(
            "brute-force correlations limited to n ≤ {MAX_CORRELATION_GRID}"
        )));
    }
    let (rows, cols) = shape(grid);
    let p = rows * cols;
    if joint.len() != p * p {
        return Err(Error::GridMismatch("joint probability size".into()));
    }
    let total: f64 = joint.iter().sum();
    let mut diff = vec![0.0; p];
    let mut sum = vec![0.0; p];
    let bin = |offset_r: f64, offset_c: f64| {
        let r = (offset_r as i64 + (rows / 2) as i64).rem_euclid(rows as i64) as usize;
        let c = (offset_c as i64 + (cols / 2) as i64).rem_euclid(cols as i64) as usize;
        r * cols + c
    };
    for s in 0..p {
        let (sr, sc) = centered(grid, s);
        for i in 0..p {
            let (ir, ic) = centered(grid, i);
            let v = joint[s * p + i] / total;
            diff[bin(sr - ir, sc - ic)] += v;
            sum[bin(sr + ir, sc + ic)] += v;
        }
    }
    Ok((diff, sum))
}

/// `‖a − b‖ / ‖b‖`.
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
