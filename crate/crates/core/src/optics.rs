//! Optical elements, arm-level chains and impulse responses.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{dft2, idft2, ComplexField, Fourier2, GridSpec};

/// A thin pure-phase scatterer sampled on one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    grid: GridSpec,
    phases: Vec<f64>,
    seed: u64,
    correlation_length: f64,
}

impl PhaseMask {
    /// Wraps explicit phases (radians, reduced to `[0, 2π)`).
    pub fn from_phases(grid: GridSpec, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != grid.pixels() {
            return Err(Error::GridMismatch(format!(
                "{} phases for a grid of {} pixels",
                phases.len(),
                grid.pixels()
            )));
        }
        Ok(Self {
            grid,
            phases: phases.into_iter().map(|p| p.rem_euclid(TAU)).collect(),
            seed: 0,
            correlation_length: 0.0,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn correlation_length(&self) -> f64 {
        self.correlation_length
    }

    /// Unit-modulus transfer values `exp(i·phase)`.
    pub fn transfer(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect()
    }
}

/// Seeded random phase screen.
///
/// With `correlation_length == 0` every pixel draws an independent uniform
/// phase. Otherwise a uniform white field is smoothed by a periodic Gaussian
/// of standard deviation `correlation_length`, standardized, scaled to a
/// phase standard deviation of 2π and wrapped into `[0, 2π)`.
pub fn random_phase_mask(grid: GridSpec, seed: u64, correlation_length: f64) -> Result<PhaseMask> {
    if !(correlation_length >= 0.0 && correlation_length.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "correlation length {correlation_length} must be non-negative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..grid.pixels()).map(|_| rng.random::<f64>()).collect();

    let phases = if correlation_length == 0.0 {
        white.into_iter().map(|u| u * TAU).collect()
    } else {
        let sigma = correlation_length;
        let field = ComplexField::from_vec(
            grid,
            white.iter().map(|&u| Complex64::new(u, 0.0)).collect(),
        )?;
        let mut spectrum = dft2(&field);
        let fg = *spectrum.grid();
        let cols = fg.cols();
        for (idx, a) in spectrum.amplitudes_mut().iter_mut().enumerate() {
            let (nx, ny) = fg.coordinate(idx / cols, idx % cols);
            *a *= (-2.0 * PI * PI * sigma * sigma * (nx * nx + ny * ny)).exp();
        }
        let smooth: Vec<f64> = idft2(&spectrum).amplitudes().iter().map(|a| a.re).collect();
        let count = smooth.len() as f64;
        let mean = smooth.iter().sum::<f64>() / count;
        let std = (smooth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count).sqrt();
        let std = if std > 0.0 { std } else { 1.0 };
        smooth
            .into_iter()
            .map(|v| ((v - mean) / std * TAU).rem_euclid(TAU))
            .collect()
    };

    Ok(PhaseMask {
        grid,
        phases,
        seed,
        correlation_length,
    })
}

/// One linear, passive element of an arm.
#[derive(Debug, Clone, PartialEq)]
pub enum OpticalElement {
    /// Exact 2f Fourier transform: front focal plane to back focal plane.
    LensFourier { focal_length: f64, wavelength: f64 },
    /// Paraxial angular-spectrum propagation in vacuum.
    FreeSpace { distance: f64, wavelength: f64 },
    /// Thin pure-phase scatterer.
    Phase(PhaseMask),
    /// Afocal relay with an integer magnification; a negative value or
    /// `invert` flips the image through the optical axis.
    Relay { magnification: i32, invert: bool },
    /// Binary circular aperture centered on the axis.
    Aperture { radius: f64 },
}

impl OpticalElement {
    pub fn name(&self) -> &'static str {
        match self {
            OpticalElement::LensFourier { .. } => "lens_fourier",
            OpticalElement::FreeSpace { .. } => "free_space",
            OpticalElement::Phase(_) => "phase",
            OpticalElement::Relay { .. } => "relay",
            OpticalElement::Aperture { .. } => "aperture",
        }
    }

    /// Grid after this element, given the grid in front of it.
    pub fn output_grid(&self, input: &GridSpec) -> Result<GridSpec> {
        match self {
            OpticalElement::LensFourier {
                focal_length,
                wavelength,
            } => {
                positive("focal length", *focal_length)?;
                positive("wavelength", *wavelength)?;
                let pitch = wavelength * focal_length / (input.n() as f64 * input.pitch());
                Ok(input.with_pitch(pitch)?.with_plane(input.plane().toggled()))
            }
            OpticalElement::FreeSpace {
                distance,
                wavelength,
            } => {
                if !(*distance >= 0.0 && distance.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "propagation distance {distance} must be non-negative"
                    )));
                }
                positive("wavelength", *wavelength)?;
                Ok(*input)
            }
            OpticalElement::Phase(mask) => {
                if !mask.grid.same_shape(input) || mask.grid.plane() != input.plane() {
                    return Err(Error::GridMismatch(format!(
                        "phase mask sampled on {:?} {}-pixel grid inserted in a {:?} {}-pixel plane",
                        mask.grid.plane(),
                        mask.grid.pixels(),
                        input.plane(),
                        input.pixels()
                    )));
                }
                Ok(*input)
            }
            OpticalElement::Relay { magnification, .. } => {
                if *magnification == 0 {
                    return Err(Error::InvalidParameter(
                        "relay magnification is zero".into(),
                    ));
                }
                input.with_pitch(input.pitch() * magnification.unsigned_abs() as f64)
            }
            OpticalElement::Aperture { radius } => {
                positive("aperture radius", *radius)?;
                Ok(*input)
            }
        }
    }

    fn is_unitary(&self) -> bool {
        !matches!(self, OpticalElement::Aperture { .. })
    }
}

fn positive(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} {value} must be positive"
        )))
    }
}

/// Ordered chain of elements describing one arm, with the grid of every
/// intermediate plane resolved at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalSystem {
    elements: Vec<OpticalElement>,
    input_grid: GridSpec,
    grids: Vec<GridSpec>,
}

impl OpticalSystem {
    pub fn new(input_grid: GridSpec, elements: Vec<OpticalElement>) -> Result<Self> {
        let mut grids = Vec::with_capacity(elements.len());
        let mut current = input_grid;
        for (i, element) in elements.iter().enumerate() {
            current = element.output_grid(&current).map_err(|e| match e {
                Error::GridMismatch(msg) => {
                    Error::GridMismatch(format!("element {i} ({}): {msg}", element.name()))
                }
                other => other,
            })?;
            grids.push(current);
        }
        Ok(Self {
            elements,
            input_grid,
            grids,
        })
    }

    pub fn identity(grid: GridSpec) -> Self {
        Self {
            elements: Vec::new(),
            input_grid: grid,
            grids: Vec::new(),
        }
    }

    pub fn elements(&self) -> &[OpticalElement] {
        &self.elements
    }

    pub fn input_grid(&self) -> &GridSpec {
        &self.input_grid
    }

    pub fn output_grid(&self) -> &GridSpec {
        self.grids.last().unwrap_or(&self.input_grid)
    }

    /// Grid in front of element `i` (`i == len` gives the output grid).
    pub fn grid_before(&self, i: usize) -> &GridSpec {
        if i == 0 {
            &self.input_grid
        } else {
            &self.grids[i - 1]
        }
    }

    pub fn is_unitary(&self) -> bool {
        self.elements.iter().all(OpticalElement::is_unitary)
    }

    /// Splits off the phase masks that sit directly in the output plane.
    ///
    /// Returns the remaining chain and, if any mask was removed, the summed
    /// output-plane phase. The joint detection probability never depends on
    /// these trailing phases.
    pub fn split_trailing_phases(&self) -> (OpticalSystem, Option<Vec<f64>>) {
        let keep = self
            .elements
            .iter()
            .rposition(|e| !matches!(e, OpticalElement::Phase(_)))
            .map_or(0, |i| i + 1);
        if keep == self.elements.len() {
            return (self.clone(), None);
        }
        let mut total = vec![0.0; self.output_grid().pixels()];
        for element in &self.elements[keep..] {
            if let OpticalElement::Phase(mask) = element {
                for (t, p) in total.iter_mut().zip(&mask.phases) {
                    *t += p;
                }
            }
        }
        let core = OpticalSystem {
            elements: self.elements[..keep].to_vec(),
            input_grid: self.input_grid,
            grids: self.grids[..keep].to_vec(),
        };
        (core, Some(total))
    }

    fn check_input(&self, grid: &GridSpec) -> Result<()> {
        let expected = &self.input_grid;
        let pitch_ok = (grid.pitch() - expected.pitch()).abs() <= 1e-9 * expected.pitch();
        if !grid.same_shape(expected) || grid.plane() != expected.plane() || !pitch_ok {
            return Err(Error::GridMismatch(format!(
                "field on {:?} grid (n = {}, pitch = {:e}) fed to a system expecting {:?} (n = {}, pitch = {:e})",
                grid.plane(),
                grid.n(),
                grid.pitch(),
                expected.plane(),
                expected.n(),
                expected.pitch()
            )));
        }
        Ok(())
    }
}

/// Applies a single element to a field.
pub fn apply_element(element: &OpticalElement, field: &ComplexField) -> Result<ComplexField> {
    let out_grid = element.output_grid(field.grid())?;
    let step = PreparedStep::new(element, field.grid());
    let fourier = Fourier2::new(field.grid());
    let mut out = field.clone();
    step.apply(out.amplitudes_mut(), field.grid(), &fourier);
    out.set_grid(out_grid);
    Ok(out)
}

/// Left-to-right fold of [`apply_element`] over the chain.
pub fn propagate(system: &OpticalSystem, field: &ComplexField) -> Result<ComplexField> {
    system.check_input(field.grid())?;
    let prepared = PreparedSystem::new(system);
    let mut out = field.clone();
    prepared.apply(out.amplitudes_mut());
    out.set_grid(*system.output_grid());
    Ok(out)
}

/// Output field of the chain for a unit point source at `source_pixel`.
pub fn impulse_response(
    system: &OpticalSystem,
    source_pixel: (usize, usize),
) -> Result<ComplexField> {
    let dirac = ComplexField::dirac(*system.input_grid(), source_pixel.0, source_pixel.1)?;
    propagate(system, &dirac)
}

/// An element with its transfer values precomputed for one grid.
#[derive(Debug, Clone)]
enum PreparedStep {
    Fourier,
    SpectralMultiply(Vec<Complex64>),
    Multiply(Vec<Complex64>),
    Parity,
    Nothing,
}

impl PreparedStep {
    fn new(element: &OpticalElement, grid: &GridSpec) -> Self {
        match element {
            OpticalElement::LensFourier { .. } => PreparedStep::Fourier,
            OpticalElement::FreeSpace {
                distance,
                wavelength,
            } => {
                if *distance == 0.0 {
                    PreparedStep::Nothing
                } else {
                    PreparedStep::SpectralMultiply(fresnel_transfer(grid, wavelength * distance))
                }
            }
            OpticalElement::Phase(mask) => PreparedStep::Multiply(mask.transfer()),
            OpticalElement::Relay {
                magnification,
                invert,
            } => {
                if (*magnification < 0) != *invert {
                    PreparedStep::Parity
                } else {
                    PreparedStep::Nothing
                }
            }
            OpticalElement::Aperture { radius } => {
                let cols = grid.cols();
                PreparedStep::Multiply(
                    (0..grid.pixels())
                        .map(|i| {
                            let (x, y) = grid.coordinate(i / cols, i % cols);
                            let inside = x * x + y * y <= radius * radius;
                            Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
                        })
                        .collect(),
                )
            }
        }
    }

    fn apply(&self, data: &mut [Complex64], grid: &GridSpec, fourier: &Fourier2) {
        match self {
            PreparedStep::Fourier => fourier.forward(data),
            PreparedStep::SpectralMultiply(transfer) => {
                fourier.forward(data);
                for (a, t) in data.iter_mut().zip(transfer) {
                    *a *= t;
                }
                fourier.inverse(data);
            }
            PreparedStep::Multiply(transfer) => {
                for (a, t) in data.iter_mut().zip(transfer) {
                    *a *= t;
                }
            }
            PreparedStep::Parity => apply_parity(data, grid),
            PreparedStep::Nothing => {}
        }
    }
}

/// Paraxial transfer `exp(−iπ·λd·|ν|²)` on the spectrum of `grid`.
///
/// `lambda_distance` is the product of the (in-medium) wavelength and the
/// propagation distance.
pub(crate) fn fresnel_transfer(grid: &GridSpec, lambda_distance: f64) -> Vec<Complex64> {
    let spectral = grid.conjugate();
    let cols = spectral.cols();
    (0..spectral.pixels())
        .map(|i| {
            let (nx, ny) = spectral.coordinate(i / cols, i % cols);
            Complex64::from_polar(1.0, -PI * lambda_distance * (nx * nx + ny * ny))
        })
        .collect()
}

pub(crate) fn apply_parity(data: &mut [Complex64], grid: &GridSpec) {
    let source = data.to_vec();
    let cols = grid.cols();
    for r in 0..grid.rows() {
        for c in 0..cols {
            let (pr, pc) = grid.parity(r, c);
            data[r * cols + c] = source[pr * cols + pc];
        }
    }
}

/// A chain with every element's transfer values precomputed, for applying
/// the same system to many fields.
#[derive(Debug, Clone)]
pub struct PreparedSystem {
    steps: Vec<(PreparedStep, GridSpec)>,
    fourier: Fourier2,
}

impl PreparedSystem {
    pub fn new(system: &OpticalSystem) -> Self {
        let steps = system
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| {
                (
                    PreparedStep::new(e, system.grid_before(i)),
                    *system.grid_before(i),
                )
            })
            .collect();
        Self {
            steps,
            fourier: Fourier2::new(system.input_grid()),
        }
    }

    /// Propagates raw amplitudes laid out on the system's input grid.
    pub fn apply(&self, data: &mut [Complex64]) {
        for (step, grid) in &self.steps {
            step.apply(data, grid, &self.fourier);
        }
    }
}
