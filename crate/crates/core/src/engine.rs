//! Biphoton wave-function engine.
//!
//! A thin crystal emits `ψ(r_s, r_i) = Σ_r E_p(r)·h_s(r_s, r)·h_i(r_i, r)`:
//! every pump pixel radiates a pair whose two photons travel the signal and
//! idler arms independently. A thick crystal is the coherent sum of such
//! thin slices. For a slice at depth `z` the pump is first propagated to `z`,
//! and each photon's impulse response is pre-composed with the remaining
//! crystal (`L − z`) applied as a Fourier-domain phase.
//!
//! Per slice the accumulation is the dense product `ψ += A·Bᵀ` with
//! `A[s][r] = E_p(r)·h_s(s, r)` and `B[i][r] = h_i(i, r)`. For `P` pixels per
//! plane that is `P³` complex multiply-adds, so a run costs `M·N⁶` for an
//! `N × N` grid and `M` slices.

use std::f64::consts::{PI, TAU};
use std::fmt::Debug;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Dims, Fourier2, GridSpec, PlaneKind};
use crate::optics::{fresnel_transfer, OpticalSystem, PreparedSystem};

/// Phase-matching configuration of the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMatching {
    /// Degenerate type 1 with perfect collinear phase matching.
    Type1Degenerate,
    /// Type 2; the signal photon is extraordinary and walks off along x.
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photon {
    Signal,
    Idler,
}

/// Where each slice sits inside its `L/M` interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceRule {
    /// Slice centers, `z_m = (m − ½)·L/M`.
    #[default]
    Midpoint,
    /// Slice exit faces, `z_m = m·L/M`; a single slice sits at the crystal exit.
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    /// Crystal length (m).
    pub length: f64,
    pub slices: usize,
    pub pm_type: PhaseMatching,
    /// Walk-off angle of the extraordinary photon (rad), type 2 only.
    pub walkoff_angle: f64,
    pub wavelength_pump: f64,
    pub wavelength_down: f64,
    /// Effective index used for diffraction inside the crystal.
    pub refractive_index: f64,
    #[serde(default)]
    pub slice_rule: SliceRule,
}

impl CrystalSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "crystal {what} = {v} must be positive"
                )))
            }
        };
        positive("length", self.length)?;
        positive("pump wavelength", self.wavelength_pump)?;
        positive("down-converted wavelength", self.wavelength_down)?;
        positive("refractive index", self.refractive_index)?;
        if self.slices == 0 {
            return Err(Error::InvalidParameter(
                "crystal needs at least one slice".into(),
            ));
        }
        if !self.walkoff_angle.is_finite() {
            return Err(Error::InvalidParameter(
                "walk-off angle is not finite".into(),
            ));
        }
        Ok(())
    }

    /// Depth of every slice, in generation order.
    pub fn slice_depths(&self) -> Vec<f64> {
        let dz = self.length / self.slices as f64;
        (1..=self.slices)
            .map(|m| match self.slice_rule {
                SliceRule::Midpoint => (m as f64 - 0.5) * dz,
                SliceRule::Exit => m as f64 * dz,
            })
            .collect()
    }

    fn walks_off(&self, photon: Photon) -> bool {
        self.pm_type == PhaseMatching::Type2 && photon == Photon::Signal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    /// Full width at half maximum of the pump intensity (m).
    pub waist_fwhm: f64,
    /// Beam center `(x, y)` (m); `y` is ignored on one-dimensional grids.
    pub center: (f64, f64),
    pub amplitude: f64,
}

/// Gaussian pump amplitude whose intensity has the requested FWHM.
pub fn pump_field(spec: &PumpSpec, grid: &GridSpec) -> Result<ComplexField> {
    if grid.plane() != PlaneKind::NearField {
        return Err(Error::GridMismatch(
            "the pump is defined on a near-field grid".into(),
        ));
    }
    if !(spec.waist_fwhm > 0.0 && spec.waist_fwhm.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "pump FWHM {} must be positive",
            spec.waist_fwhm
        )));
    }
    // Intensity std σ; the amplitude is exp(−r²/4σ²).
    let sigma = spec.waist_fwhm / (8.0 * 2f64.ln()).sqrt();
    let (cx, cy) = spec.center;
    let one_d = grid.dims() == Dims::One;
    Ok(ComplexField::from_fn(*grid, |r, c| {
        let (x, y) = grid.coordinate(r, c);
        let dy = if one_d { 0.0 } else { y - cy };
        let dx = x - cx;
        Complex64::new(
            spec.amplitude * (-(dx * dx + dy * dy) / (4.0 * sigma * sigma)).exp(),
            0.0,
        )
    }))
}

/// Propagates the pump inside the crystal to depth `z`.
pub fn propagate_pump(pump: &ComplexField, crystal: &CrystalSpec, z: f64) -> ComplexField {
    let mut out = pump.clone();
    if z == 0.0 {
        return out;
    }
    let transfer = fresnel_transfer(
        pump.grid(),
        crystal.wavelength_pump / crystal.refractive_index * z,
    );
    let fourier = Fourier2::new(pump.grid());
    fourier.forward(out.amplitudes_mut());
    for (a, t) in out.amplitudes_mut().iter_mut().zip(&transfer) {
        *a *= t;
    }
    fourier.inverse(out.amplitudes_mut());
    out
}

/// Fourier-domain transfer of a photon created at depth `z` through the rest
/// of the crystal: `exp(i·φ(ν)·(L − z))` with
/// `φ(ν) = −π·λ_down·|ν|²/n + 2π·ρ·ν_x` (walk-off term for the signal of a
/// type-2 crystal only).
pub fn slice_transfer(
    crystal: &CrystalSpec,
    z: f64,
    photon: Photon,
    grid: &GridSpec,
) -> Result<ComplexField> {
    if !(0.0..=crystal.length).contains(&z) {
        return Err(Error::DepthOutOfRange {
            z,
            length: crystal.length,
        });
    }
    if grid.plane() != PlaneKind::FarField {
        return Err(Error::GridMismatch(
            "slice transfer lives on the spectral grid of the crystal plane".into(),
        ));
    }
    let remaining = crystal.length - z;
    let diffraction = -PI * crystal.wavelength_down / crystal.refractive_index;
    let walkoff = if crystal.walks_off(photon) {
        TAU * crystal.walkoff_angle
    } else {
        0.0
    };
    Ok(ComplexField::from_fn(*grid, |r, c| {
        let (nx, ny) = grid.coordinate(r, c);
        let phi = diffraction * (nx * nx + ny * ny) + walkoff * nx;
        Complex64::from_polar(1.0, phi * remaining)
    }))
}

/// Real scalar type used to store and accumulate the wave function.
pub trait Sample:
    num_traits::Float + Default + Debug + Send + Sync + std::iter::Sum + 'static
{
    fn narrow(v: f64) -> Self;
    fn widen(self) -> f64;
}

impl Sample for f64 {
    fn narrow(v: f64) -> Self {
        v
    }
    fn widen(self) -> f64 {
        self
    }
}

impl Sample for f32 {
    fn narrow(v: f64) -> Self {
        v as f32
    }
    fn widen(self) -> f64 {
        self as f64
    }
}

/// Non-normalized two-photon amplitude `ψ(r_s, r_i)` over a pair of
/// detection planes, stored as split real/imaginary planes indexed
/// `s·P + i`.
///
/// Phase masks sitting directly in a detection plane are kept as separate
/// per-pixel phases; they enter [`amplitude`](Self::amplitude) but never the
/// joint probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonWavefunction<T: Sample = f64> {
    grid: GridSpec,
    re: Vec<T>,
    im: Vec<T>,
    signal_phase: Option<Vec<f64>>,
    idler_phase: Option<Vec<f64>>,
}

impl<T: Sample> BiphotonWavefunction<T> {
    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.pixels() * grid.pixels();
        Self {
            grid,
            re: vec![T::zero(); len],
            im: vec![T::zero(); len],
            signal_phase: None,
            idler_phase: None,
        }
    }

    pub fn from_amplitudes(grid: GridSpec, amplitudes: &[Complex64]) -> Result<Self> {
        let p = grid.pixels();
        if amplitudes.len() != p * p {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a {p}×{p} wave function",
                amplitudes.len()
            )));
        }
        Ok(Self {
            grid,
            re: amplitudes.iter().map(|a| T::narrow(a.re)).collect(),
            im: amplitudes.iter().map(|a| T::narrow(a.im)).collect(),
            signal_phase: None,
            idler_phase: None,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Pixels per detection plane.
    pub fn pixels(&self) -> usize {
        self.grid.pixels()
    }

    pub fn amplitude(&self, s: usize, i: usize) -> Complex64 {
        let k = s * self.pixels() + i;
        let mut a = Complex64::new(self.re[k].widen(), self.im[k].widen());
        let mut phase = 0.0;
        if let Some(p) = &self.signal_phase {
            phase += p[s];
        }
        if let Some(p) = &self.idler_phase {
            phase += p[i];
        }
        if phase != 0.0 {
            a *= Complex64::from_polar(1.0, phase);
        }
        a
    }

    /// `|ψ(s, i)|²`.
    pub fn probability(&self, s: usize, i: usize) -> f64 {
        let k = s * self.pixels() + i;
        let (re, im) = (self.re[k].widen(), self.im[k].widen());
        re * re + im * im
    }

    /// Every `|ψ|²` in storage order.
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.re.iter().zip(&self.im).map(|(r, i)| {
            let (r, i) = (r.widen(), i.widen());
            r * r + i * i
        })
    }

    /// Materializes every amplitude, detection-plane phases included.
    pub fn to_amplitudes(&self) -> Vec<Complex64> {
        let p = self.pixels();
        let mut out = Vec::with_capacity(p * p);
        for s in 0..p {
            for i in 0..p {
                out.push(self.amplitude(s, i));
            }
        }
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.probabilities().sum()
    }

    pub fn has_detection_phases(&self) -> bool {
        self.signal_phase.is_some() || self.idler_phase.is_some()
    }

    /// Multiplies every amplitude by `factor`.
    pub fn scale(&mut self, factor: Complex64) {
        for (r, i) in self.re.iter_mut().zip(self.im.iter_mut()) {
            let a = Complex64::new(r.widen(), i.widen()) * factor;
            *r = T::narrow(a.re);
            *i = T::narrow(a.im);
        }
    }

    /// Exchanges the roles of signal and idler.
    pub fn transposed(&self) -> Self {
        let p = self.pixels();
        let mut out = Self::zeros(self.grid);
        for s in 0..p {
            for i in 0..p {
                out.re[i * p + s] = self.re[s * p + i];
                out.im[i * p + s] = self.im[s * p + i];
            }
        }
        out.signal_phase = self.idler_phase.clone();
        out.idler_phase = self.signal_phase.clone();
        out
    }

    pub fn has_non_finite(&self) -> bool {
        self.re.iter().chain(&self.im).any(|v| !v.is_finite())
    }
}

/// Serial accumulation is bit-reproducible; parallel mode splits the output
/// rows across threads and produces the same bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    #[default]
    Serial,
    Parallel,
}

/// Thin-crystal wave function with the default options.
pub fn thin_crystal_wavefunction(
    pump: &ComplexField,
    signal_arm: &OpticalSystem,
    idler_arm: &OpticalSystem,
) -> Result<BiphotonWavefunction> {
    Engine::default().thin(pump, signal_arm, idler_arm)
}

/// Thick-crystal wave function with the default options.
pub fn thick_crystal_wavefunction(
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    signal_arm: &OpticalSystem,
    idler_arm: &OpticalSystem,
) -> Result<BiphotonWavefunction> {
    Engine::default().thick(pump, crystal, signal_arm, idler_arm)
}

/// Runs the wave-function accumulation with a chosen execution mode.
#[derive(Debug, Clone, Copy, Default)]
pub struct Engine {
    pub mode: ExecMode,
}

impl Engine {
    pub fn new(mode: ExecMode) -> Self {
        Self { mode }
    }

    pub fn thin<T: Sample>(
        &self,
        pump: &ComplexField,
        signal_arm: &OpticalSystem,
        idler_arm: &OpticalSystem,
    ) -> Result<BiphotonWavefunction<T>> {
        let plan = ArmPair::new(pump.grid(), signal_arm, idler_arm)?;
        let mut psi = plan.empty::<T>();
        let mut scratch = SliceBuffers::new(plan.pixels);
        plan.accumulate_slice(&mut psi, pump.amplitudes(), None, &mut scratch, self.mode);
        Ok(psi)
    }

    pub fn thick<T: Sample>(
        &self,
        pump: &PumpSpec,
        crystal: &CrystalSpec,
        signal_arm: &OpticalSystem,
        idler_arm: &OpticalSystem,
    ) -> Result<BiphotonWavefunction<T>> {
        crystal.validate()?;
        let grid = *signal_arm.input_grid();
        let plan = ArmPair::new(&grid, signal_arm, idler_arm)?;
        let pump0 = pump_field(pump, &grid)?;
        let spectral = grid.conjugate();
        let mut psi = plan.empty::<T>();
        let mut scratch = SliceBuffers::new(plan.pixels);
        for z in crystal.slice_depths() {
            let pump_z = propagate_pump(&pump0, crystal, z);
            let ts = slice_transfer(crystal, z, Photon::Signal, &spectral)?;
            let ti = slice_transfer(crystal, z, Photon::Idler, &spectral)?;
            plan.accumulate_slice(
                &mut psi,
                pump_z.amplitudes(),
                Some((ts.amplitudes(), ti.amplitudes())),
                &mut scratch,
                self.mode,
            );
        }
        Ok(psi)
    }
}

/// Both arms prepared for repeated impulse-response evaluation.
struct ArmPair {
    grid: GridSpec,
    output_grid: GridSpec,
    pixels: usize,
    fourier: Fourier2,
    signal: PreparedSystem,
    idler: PreparedSystem,
    signal_phase: Option<Vec<f64>>,
    idler_phase: Option<Vec<f64>>,
}

impl ArmPair {
    fn new(
        pump_grid: &GridSpec,
        signal_arm: &OpticalSystem,
        idler_arm: &OpticalSystem,
    ) -> Result<Self> {
        for (name, arm) in [("signal", signal_arm), ("idler", idler_arm)] {
            let g = arm.input_grid();
            let pitch_ok = (g.pitch() - pump_grid.pitch()).abs() <= 1e-9 * pump_grid.pitch();
            if !g.same_shape(pump_grid) || g.plane() != pump_grid.plane() || !pitch_ok {
                return Err(Error::GridMismatch(format!(
                    "{name} arm does not start on the pump grid"
                )));
            }
        }
        let (so, io) = (signal_arm.output_grid(), idler_arm.output_grid());
        if !so.same_shape(io) || (so.pitch() - io.pitch()).abs() > 1e-9 * so.pitch() {
            return Err(Error::GridMismatch(
                "signal and idler detection planes are sampled differently".into(),
            ));
        }
        let (signal_core, signal_phase) = signal_arm.split_trailing_phases();
        let (idler_core, idler_phase) = idler_arm.split_trailing_phases();
        Ok(Self {
            grid: *pump_grid,
            output_grid: *so,
            pixels: pump_grid.pixels(),
            fourier: Fourier2::new(pump_grid),
            signal: PreparedSystem::new(&signal_core),
            idler: PreparedSystem::new(&idler_core),
            signal_phase,
            idler_phase,
        })
    }

    fn empty<T: Sample>(&self) -> BiphotonWavefunction<T> {
        let mut psi = BiphotonWavefunction::zeros(self.output_grid);
        psi.signal_phase = self.signal_phase.clone();
        psi.idler_phase = self.idler_phase.clone();
        psi
    }

    /// Output of one arm for a point source at pixel `r`, after the optional
    /// in-crystal transfer.
    fn response(
        &self,
        arm: &PreparedSystem,
        r: usize,
        transfer: Option<&[Complex64]>,
        out: &mut [Complex64],
    ) {
        out.fill(Complex64::new(0.0, 0.0));
        out[r] = Complex64::new(1.0, 0.0);
        if let Some(t) = transfer {
            self.fourier.forward(out);
            for (a, t) in out.iter_mut().zip(t) {
                *a *= t;
            }
            self.fourier.inverse(out);
        }
        arm.apply(out);
    }

    fn accumulate_slice<T: Sample>(
        &self,
        psi: &mut BiphotonWavefunction<T>,
        pump: &[Complex64],
        transfers: Option<(&[Complex64], &[Complex64])>,
        buf: &mut SliceBuffers<T>,
        mode: ExecMode,
    ) {
        let p = self.pixels;
        debug_assert_eq!(self.grid.pixels(), p);
        let (ts, ti) = match transfers {
            Some((s, i)) => (Some(s), Some(i)),
            None => (None, None),
        };

        // Column r of each matrix is the impulse response of source pixel r.
        let columns = |r: usize, col_s: &mut [Complex64], col_i: &mut [Complex64]| {
            self.response(&self.signal, r, ts, col_s);
            for a in col_s.iter_mut() {
                *a *= pump[r];
            }
            self.response(&self.idler, r, ti, col_i);
        };
        match mode {
            ExecMode::Serial => {
                for r in 0..p {
                    let (cs, ci) = (
                        &mut buf.cols_s[r * p..(r + 1) * p],
                        &mut buf.cols_i[r * p..(r + 1) * p],
                    );
                    columns(r, cs, ci);
                }
            }
            ExecMode::Parallel => {
                buf.cols_s
                    .par_chunks_mut(p)
                    .zip(buf.cols_i.par_chunks_mut(p))
                    .enumerate()
                    .for_each(|(r, (cs, ci))| columns(r, cs, ci));
            }
        }
        transpose_split(&buf.cols_s, p, &mut buf.a_re, &mut buf.a_im);
        transpose_split(&buf.cols_i, p, &mut buf.b_re, &mut buf.b_im);

        kernel::accumulate(
            &mut psi.re,
            &mut psi.im,
            &buf.a_re,
            &buf.a_im,
            &buf.b_re,
            &buf.b_im,
            p,
            mode,
        );
    }
}

struct SliceBuffers<T> {
    cols_s: Vec<Complex64>,
    cols_i: Vec<Complex64>,
    a_re: Vec<T>,
    a_im: Vec<T>,
    b_re: Vec<T>,
    b_im: Vec<T>,
}

impl<T: Sample> SliceBuffers<T> {
    fn new(p: usize) -> Self {
        let zero_c = Complex64::new(0.0, 0.0);
        Self {
            cols_s: vec![zero_c; p * p],
            cols_i: vec![zero_c; p * p],
            a_re: vec![T::zero(); p * p],
            a_im: vec![T::zero(); p * p],
            b_re: vec![T::zero(); p * p],
            b_im: vec![T::zero(); p * p],
        }
    }
}

/// `cols[r][s]` (column-major impulse responses) → `re/im[s][r]`.
fn transpose_split<T: Sample>(cols: &[Complex64], p: usize, re: &mut [T], im: &mut [T]) {
    const TILE: usize = 32;
    for r0 in (0..p).step_by(TILE) {
        for s0 in (0..p).step_by(TILE) {
            for r in r0..(r0 + TILE).min(p) {
                for s in s0..(s0 + TILE).min(p) {
                    let v = cols[r * p + s];
                    re[s * p + r] = T::narrow(v.re);
                    im[s * p + r] = T::narrow(v.im);
                }
            }
        }
    }
}

pub mod kernel {
    //! Blocked complex `C += A·Bᵀ` over split real/imaginary planes.
    //!
    //! The output rows are tiled in bands; each band walks the contraction
    //! index in cache-sized chunks against a tile of `B` rows. Every output
    //! element sees the same reduction order (chunk by chunk, four
    //! interleaved partial sums per chunk, pairwise combine) regardless of
    //! how bands are scheduled, so serial and parallel runs agree bit for
    //! bit.

    use rayon::prelude::*;

    use super::{ExecMode, Sample};

    const LANES: usize = 4;
    const ROW_BAND: usize = 16;
    const K_CHUNK: usize = 256;
    const B_TILE: usize = 64;

    /// `c[s][i] += Σ_r a[s][r]·b[i][r]` for `p × p` row-major matrices.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate<T: Sample>(
        c_re: &mut [T],
        c_im: &mut [T],
        a_re: &[T],
        a_im: &[T],
        b_re: &[T],
        b_im: &[T],
        p: usize,
        mode: ExecMode,
    ) {
        assert!(p.is_multiple_of(2), "pixel count must be even");
        for m in [&*c_re, &*c_im, a_re, a_im, b_re, b_im] {
            assert_eq!(m.len(), p * p);
        }
        let band = |(band_idx, (cr, ci)): (usize, (&mut [T], &mut [T]))| {
            let s0 = band_idx * ROW_BAND;
            let rows = cr.len() / p;
            for k0 in (0..p).step_by(K_CHUNK) {
                let k1 = (k0 + K_CHUNK).min(p);
                for i0 in (0..p).step_by(B_TILE) {
                    let i1 = (i0 + B_TILE).min(p);
                    for ls in (0..rows).step_by(2) {
                        let s = s0 + ls;
                        let a = [
                            &a_re[s * p + k0..s * p + k1],
                            &a_im[s * p + k0..s * p + k1],
                            &a_re[(s + 1) * p + k0..(s + 1) * p + k1],
                            &a_im[(s + 1) * p + k0..(s + 1) * p + k1],
                        ];
                        for i in (i0..i1).step_by(2) {
                            let b = [
                                &b_re[i * p + k0..i * p + k1],
                                &b_im[i * p + k0..i * p + k1],
                                &b_re[(i + 1) * p + k0..(i + 1) * p + k1],
                                &b_im[(i + 1) * p + k0..(i + 1) * p + k1],
                            ];
                            let d = dot2x2(a, b);
                            cr[ls * p + i] = cr[ls * p + i] + d[0];
                            ci[ls * p + i] = ci[ls * p + i] + d[1];
                            cr[ls * p + i + 1] = cr[ls * p + i + 1] + d[2];
                            ci[ls * p + i + 1] = ci[ls * p + i + 1] + d[3];
                            cr[(ls + 1) * p + i] = cr[(ls + 1) * p + i] + d[4];
                            ci[(ls + 1) * p + i] = ci[(ls + 1) * p + i] + d[5];
                            cr[(ls + 1) * p + i + 1] = cr[(ls + 1) * p + i + 1] + d[6];
                            ci[(ls + 1) * p + i + 1] = ci[(ls + 1) * p + i + 1] + d[7];
                        }
                    }
                }
            }
        };
        let chunk = ROW_BAND * p;
        match mode {
            ExecMode::Serial => c_re
                .chunks_mut(chunk)
                .zip(c_im.chunks_mut(chunk))
                .enumerate()
                .for_each(band),
            ExecMode::Parallel => c_re
                .par_chunks_mut(chunk)
                .zip(c_im.par_chunks_mut(chunk))
                .enumerate()
                .for_each(band),
        }
    }

    /// Four complex dot products between two `a` rows and two `b` rows.
    ///
    /// Returns `[re00, im00, re01, im01, re10, im10, re11, im11]`.
    #[inline(always)]
    fn dot2x2<T: Sample>(a: [&[T]; 4], b: [&[T]; 4]) -> [T; 8] {
        let len = a[0].len();
        let (x0r, x0i, x1r, x1i) = (&a[0][..len], &a[1][..len], &a[2][..len], &a[3][..len]);
        let (y0r, y0i, y1r, y1i) = (&b[0][..len], &b[1][..len], &b[2][..len], &b[3][..len]);
        let z = T::zero();
        let mut acc = [[z; LANES]; 8];
        let main = len - len % LANES;
        let mut k = 0;
        while k < main {
            for l in 0..LANES {
                let (ar0, ai0, ar1, ai1) = (x0r[k + l], x0i[k + l], x1r[k + l], x1i[k + l]);
                let (br0, bi0, br1, bi1) = (y0r[k + l], y0i[k + l], y1r[k + l], y1i[k + l]);
                acc[0][l] = acc[0][l] + (ar0 * br0 - ai0 * bi0);
                acc[1][l] = acc[1][l] + (ar0 * bi0 + ai0 * br0);
                acc[2][l] = acc[2][l] + (ar0 * br1 - ai0 * bi1);
                acc[3][l] = acc[3][l] + (ar0 * bi1 + ai0 * br1);
                acc[4][l] = acc[4][l] + (ar1 * br0 - ai1 * bi0);
                acc[5][l] = acc[5][l] + (ar1 * bi0 + ai1 * br0);
                acc[6][l] = acc[6][l] + (ar1 * br1 - ai1 * bi1);
                acc[7][l] = acc[7][l] + (ar1 * bi1 + ai1 * br1);
            }
            k += LANES;
        }
        let mut out = [z; 8];
        for (o, lanes) in out.iter_mut().zip(&acc) {
            *o = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        }
        for k in main..len {
            let (ar0, ai0, ar1, ai1) = (x0r[k], x0i[k], x1r[k], x1i[k]);
            let (br0, bi0, br1, bi1) = (y0r[k], y0i[k], y1r[k], y1i[k]);
            out[0] = out[0] + (ar0 * br0 - ai0 * bi0);
            out[1] = out[1] + (ar0 * bi0 + ai0 * br0);
            out[2] = out[2] + (ar0 * br1 - ai0 * bi1);
            out[3] = out[3] + (ar0 * bi1 + ai0 * br1);
            out[4] = out[4] + (ar1 * br0 - ai1 * bi0);
            out[5] = out[5] + (ar1 * bi0 + ai1 * br0);
            out[6] = out[6] + (ar1 * br1 - ai1 * bi1);
            out[7] = out[7] + (ar1 * bi1 + ai1 * br1);
        }
        out
    }
}
