//! Config-driven scenarios: parsing, assembly, execution and artifact output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    self, difference_correlation, joint_probability, sum_correlation, CorrelationMap,
    JointProbability, SchmidtInputs,
};
use crate::engine::{
    BiphotonWavefunction, CrystalSpec, Engine, ExecMode, PhaseMatching, PumpSpec, Sample, SliceRule,
};
use crate::error::{Error, Result};
use crate::grid::{Dims, GridSpec, PlaneKind};
use crate::optics::{random_phase_mask, OpticalElement, OpticalSystem, PhaseMask};
use crate::oracle;

const UM: f64 = 1e-6;
const MM: f64 = 1e-3;
const NM: f64 = 1e-9;

/// Magic first line of every map header.
pub const MAP_MAGIC: &str = "BIPHOTON-MAP v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub grid: GridConfig,
    pub pump: PumpConfig,
    pub crystal: CrystalConfig,
    pub signal_arm: Vec<ElementConfig>,
    /// Defaults to a copy of the signal arm.
    #[serde(default)]
    pub idler_arm: Option<Vec<ElementConfig>>,
    #[serde(default)]
    pub scatterers: ScattererConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// 1 or 2.
    pub dims: u8,
    pub pitch_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    /// Intensity FWHM.
    pub fwhm_um: f64,
    #[serde(default)]
    pub center_um: [f64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    pub length_mm: f64,
    pub slices: usize,
    pub pm_type: PhaseMatching,
    #[serde(default)]
    pub walkoff_mrad: f64,
    pub wavelength_pump_nm: f64,
    pub wavelength_down_nm: f64,
    pub refractive_index: f64,
    #[serde(default)]
    pub slice_rule: SliceRule,
}

/// One arm element. Lens and free-space wavelengths default to the
/// down-converted wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementConfig {
    Lens {
        focal_mm: f64,
        #[serde(default)]
        wavelength_nm: Option<f64>,
    },
    FreeSpace {
        distance_mm: f64,
        #[serde(default)]
        wavelength_nm: Option<f64>,
    },
    Relay {
        magnification: i32,
        #[serde(default)]
        invert: bool,
    },
    Aperture {
        radius_um: f64,
    },
    /// Random phase screen; present only when its plane is enabled.
    Scatterer {
        plane: ScattererPlane,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScattererPlane {
    Nf,
    Ff,
}

impl ScattererPlane {
    fn kind(self) -> PlaneKind {
        match self {
            ScattererPlane::Nf => PlaneKind::NearField,
            ScattererPlane::Ff => PlaneKind::FarField,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ScattererPlane::Nf => "nf",
            ScattererPlane::Ff => "ff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScattererSelection {
    #[default]
    None,
    Nf,
    Ff,
    Both,
}

impl ScattererSelection {
    fn includes(self, plane: ScattererPlane) -> bool {
        matches!(
            (self, plane),
            (ScattererSelection::Both, _)
                | (ScattererSelection::Nf, ScattererPlane::Nf)
                | (ScattererSelection::Ff, ScattererPlane::Ff)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererConfig {
    #[serde(default)]
    pub enabled: ScattererSelection,
    pub nf_seed: Option<u64>,
    pub ff_seed: Option<u64>,
    #[serde(default)]
    pub nf_correlation_um: f64,
    #[serde(default)]
    pub ff_correlation_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Sum,
    Difference,
    /// Full `P(s, i)` as a `P × P` image.
    Joint,
    /// Joint probability summed over both y coordinates.
    JointX,
    SignalIntensity,
    IdlerIntensity,
    IntensitySum,
}

impl MapKind {
    pub fn label(self) -> &'static str {
        match self {
            MapKind::Sum => "sum",
            MapKind::Difference => "difference",
            MapKind::Joint => "joint",
            MapKind::JointX => "joint_x",
            MapKind::SignalIntensity => "signal_intensity",
            MapKind::IdlerIntensity => "idler_intensity",
            MapKind::IntensitySum => "intensity_sum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_maps")]
    pub maps: Vec<MapKind>,
    #[serde(default = "default_db_floor")]
    pub db_floor: f64,
    #[serde(default = "default_peak_radius")]
    pub peak_radius: usize,
    #[serde(default = "default_peak_window")]
    pub peak_window: usize,
    #[serde(default)]
    pub schmidt: Vec<SchmidtConfig>,
}

fn default_maps() -> Vec<MapKind> {
    vec![MapKind::Sum, MapKind::Difference]
}

fn default_db_floor() -> f64 {
    -40.0
}

fn default_peak_radius() -> usize {
    2
}

fn default_peak_window() -> usize {
    3
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            maps: default_maps(),
            db_floor: default_db_floor(),
            peak_radius: default_peak_radius(),
            peak_window: default_peak_window(),
            schmidt: Vec::new(),
        }
    }
}

/// Schmidt-number inputs for one axis, spatial (mm, mm⁻¹) or temporal
/// (ps, THz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchmidtConfig {
    pub label: String,
    pub sigma_pump_mm: Option<f64>,
    pub sigma_nu_per_mm: Option<f64>,
    pub sigma_pump_ps: Option<f64>,
    pub sigma_nu_thz: Option<f64>,
}

impl SchmidtConfig {
    pub fn inputs(&self) -> Result<SchmidtInputs> {
        match (self.sigma_pump_mm, self.sigma_nu_per_mm, self.sigma_pump_ps, self.sigma_nu_thz) {
            (Some(p), Some(n), None, None) => Ok(SchmidtInputs {
                sigma_pump: p * MM,
                sigma_nu: n / MM,
            }),
            (None, None, Some(p), Some(n)) => Ok(SchmidtInputs {
                sigma_pump: p * 1e-12,
                sigma_nu: n * 1e12,
            }),
            _ => Err(Error::Config(format!(
                "schmidt entry `{}` needs sigma_pump_mm + sigma_nu_per_mm or sigma_pump_ps + sigma_nu_thz",
                self.label
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: ExecMode,
    /// Worker threads for parallel mode; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub precision: Precision,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Replaces both scatterer seeds: `nf = seed`, `ff = seed + 1`.
    pub fn override_seeds(&mut self, seed: u64) {
        self.scatterers.nf_seed = Some(seed);
        self.scatterers.ff_seed = Some(seed.wrapping_add(1));
    }

    pub fn idler_elements(&self) -> &[ElementConfig] {
        self.idler_arm.as_deref().unwrap_or(&self.signal_arm)
    }
}

/// A fully assembled scenario ready for the engine.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub pump: PumpSpec,
    pub crystal: CrystalSpec,
    pub signal_arm: OpticalSystem,
    pub idler_arm: OpticalSystem,
    pub outputs: OutputConfig,
    pub run: RunConfig,
}

pub fn build(config: &ScenarioConfig) -> Result<Scenario> {
    let dims = match config.grid.dims {
        1 => Dims::One,
        2 => Dims::Two,
        d => return Err(Error::Config(format!("grid.dims must be 1 or 2, got {d}"))),
    };
    let grid = GridSpec::new(
        config.grid.n,
        dims,
        config.grid.pitch_um * UM,
        PlaneKind::NearField,
    )?;
    let crystal = CrystalSpec {
        length: config.crystal.length_mm * MM,
        slices: config.crystal.slices,
        pm_type: config.crystal.pm_type,
        walkoff_angle: config.crystal.walkoff_mrad * 1e-3,
        wavelength_pump: config.crystal.wavelength_pump_nm * NM,
        wavelength_down: config.crystal.wavelength_down_nm * NM,
        refractive_index: config.crystal.refractive_index,
        slice_rule: config.crystal.slice_rule,
    };
    crystal.validate()?;
    let pump = PumpSpec {
        waist_fwhm: config.pump.fwhm_um * UM,
        center: (config.pump.center_um[0] * UM, config.pump.center_um[1] * UM),
        amplitude: config.pump.amplitude,
    };

    let sc = &config.scatterers;
    for plane in [ScattererPlane::Nf, ScattererPlane::Ff] {
        if !sc.enabled.includes(plane) {
            continue;
        }
        let seed = match plane {
            ScattererPlane::Nf => sc.nf_seed,
            ScattererPlane::Ff => sc.ff_seed,
        };
        if seed.is_none() {
            return Err(Error::Config(format!(
                "scatterers.{}_seed is required when the {} scatterer is enabled",
                plane.label(),
                plane.label()
            )));
        }
        let referenced = config
            .signal_arm
            .iter()
            .chain(config.idler_elements())
            .any(|e| matches!(e, ElementConfig::Scatterer { plane: p } if *p == plane));
        if !referenced {
            return Err(Error::Config(format!(
                "scatterer plane `{}` is enabled but no arm contains it",
                plane.label()
            )));
        }
    }

    let mut masks = BTreeMap::new();
    let signal_arm = assemble_arm(config, &config.signal_arm, grid, &crystal, &mut masks)?;
    let idler_arm = assemble_arm(config, config.idler_elements(), grid, &crystal, &mut masks)?;
    Ok(Scenario {
        name: config.name.clone(),
        grid,
        pump,
        crystal,
        signal_arm,
        idler_arm,
        outputs: config.outputs.clone(),
        run: config.run.clone(),
    })
}

/// Builds one arm. Masks are shared between arms so both photons meet the
/// same scatterer.
fn assemble_arm(
    config: &ScenarioConfig,
    elements: &[ElementConfig],
    grid: GridSpec,
    crystal: &CrystalSpec,
    masks: &mut BTreeMap<ScattererPlane, PhaseMask>,
) -> Result<OpticalSystem> {
    let sc = &config.scatterers;
    let mut current = grid;
    let mut out = Vec::new();
    for (index, e) in elements.iter().enumerate() {
        let element = match e {
            ElementConfig::Lens {
                focal_mm,
                wavelength_nm,
            } => OpticalElement::LensFourier {
                focal_length: focal_mm * MM,
                wavelength: wavelength_nm.map_or(crystal.wavelength_down, |w| w * NM),
            },
            ElementConfig::FreeSpace {
                distance_mm,
                wavelength_nm,
            } => OpticalElement::FreeSpace {
                distance: distance_mm * MM,
                wavelength: wavelength_nm.map_or(crystal.wavelength_down, |w| w * NM),
            },
            ElementConfig::Relay {
                magnification,
                invert,
            } => OpticalElement::Relay {
                magnification: *magnification,
                invert: *invert,
            },
            ElementConfig::Aperture { radius_um } => OpticalElement::Aperture {
                radius: radius_um * UM,
            },
            ElementConfig::Scatterer { plane } => {
                if !sc.enabled.includes(*plane) {
                    continue;
                }
                if current.plane() != plane.kind() {
                    return Err(Error::GridMismatch(format!(
                        "element {index}: `{}` scatterer placed in a {:?} plane",
                        plane.label(),
                        current.plane()
                    )));
                }
                let mask = match masks.get(plane) {
                    Some(m) if m.grid() == &current => m.clone(),
                    _ => {
                        let (seed, corr) = match plane {
                            ScattererPlane::Nf => (sc.nf_seed, sc.nf_correlation_um),
                            ScattererPlane::Ff => (sc.ff_seed, sc.ff_correlation_um),
                        };
                        let seed = seed.expect("seed checked during validation");
                        let m = random_phase_mask(current, seed, corr * UM)?;
                        masks.insert(*plane, m.clone());
                        m
                    }
                };
                OpticalElement::Phase(mask)
            }
        };
        current = element.output_grid(&current).map_err(|err| match err {
            Error::InvalidParameter(m) => Error::Config(format!("element {index}: {m}")),
            other => other,
        })?;
        out.push(element);
    }
    OpticalSystem::new(grid, out)
}

/// Everything derived from one engine run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub joint: JointProbability,
    pub sum: CorrelationMap,
    pub difference: CorrelationMap,
    pub signal_intensity: Vec<f64>,
    pub idler_intensity: Vec<f64>,
    pub wall_time_s: f64,
}

impl Simulation {
    pub fn total_weight(&self) -> f64 {
        self.joint.total()
    }

    pub fn detection_grid(&self) -> &GridSpec {
        self.joint.grid()
    }

    /// Row-major values and `(rows, cols, pitch)` of a requested map.
    pub fn map(&self, kind: MapKind) -> (Vec<f64>, usize, usize, f64) {
        let g = *self.detection_grid();
        let (rows, cols, pitch) = (g.rows(), g.cols(), g.pitch());
        match kind {
            MapKind::Sum => (self.sum.values().to_vec(), rows, cols, pitch),
            MapKind::Difference => (self.difference.values().to_vec(), rows, cols, pitch),
            MapKind::Joint => (self.joint.values().to_vec(), g.pixels(), g.pixels(), pitch),
            MapKind::JointX => (analysis::joint_x_marginal(&self.joint), cols, cols, pitch),
            MapKind::SignalIntensity => (self.signal_intensity.clone(), rows, cols, pitch),
            MapKind::IdlerIntensity => (self.idler_intensity.clone(), rows, cols, pitch),
            MapKind::IntensitySum => (
                self.signal_intensity
                    .iter()
                    .zip(&self.idler_intensity)
                    .map(|(a, b)| a + b)
                    .collect(),
                rows,
                cols,
                pitch,
            ),
        }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}

fn run_engine<T: Sample>(scenario: &Scenario) -> Result<BiphotonWavefunction<T>> {
    let engine = Engine::new(scenario.run.mode);
    let job = || {
        engine.thick::<T>(
            &scenario.pump,
            &scenario.crystal,
            &scenario.signal_arm,
            &scenario.idler_arm,
        )
    };
    match scenario.run.mode {
        ExecMode::Serial => job(),
        ExecMode::Parallel => thread_pool(scenario.run.threads)?.install(job),
    }
}

fn analyse<T: Sample>(psi: &BiphotonWavefunction<T>, started: Instant) -> Result<Simulation> {
    if psi.has_non_finite() {
        return Err(Error::Numerical(
            "non-finite amplitude in the wave function".into(),
        ));
    }
    let joint = joint_probability(psi)?;
    let wall_time_s = started.elapsed().as_secs_f64();
    Ok(Simulation {
        sum: sum_correlation(&joint),
        difference: difference_correlation(&joint),
        signal_intensity: analysis::signal_intensity(&joint),
        idler_intensity: analysis::idler_intensity(&joint),
        joint,
        wall_time_s,
    })
}

/// Runs the engine and the standard analysis chain.
pub fn simulate(scenario: &Scenario) -> Result<Simulation> {
    let started = Instant::now();
    match scenario.run.precision {
        Precision::F64 => analyse(&run_engine::<f64>(scenario)?, started),
        Precision::F32 => analyse(&run_engine::<f32>(scenario)?, started),
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed_override: Option<u64>,
    pub threads: Option<usize>,
    pub serial: bool,
}

impl RunOptions {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(seed) = self.seed_override {
            config.override_seeds(seed);
        }
        if let Some(t) = self.threads {
            config.run.threads = t;
            config.run.mode = ExecMode::Parallel;
        }
        if self.serial {
            config.run.mode = ExecMode::Serial;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtEntry {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config: ScenarioConfig,
    pub total_weight: f64,
    pub pairs_ratio: BTreeMap<String, f64>,
    /// `(σ_x, σ_y)` in meters of the detection plane.
    pub peak_std: BTreeMap<String, (f64, f64)>,
    pub schmidt: Vec<SchmidtEntry>,
    pub wall_time_s: f64,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub simulation: Simulation,
}

/// Loads, assembles, runs and writes every artifact of a scenario.
pub fn run_scenario(config_path: &Path, options: &RunOptions) -> Result<RunReport> {
    let mut config = ScenarioConfig::load(config_path)?;
    options.apply(&mut config);
    let dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("output").join(&config.name));
    run_config(&config, &dir)
}

pub fn run_config(config: &ScenarioConfig, dir: &Path) -> Result<RunReport> {
    let scenario = build(config)?;
    let simulation = simulate(&scenario)?;
    let manifest = write_outputs(config, &simulation, dir)?;
    Ok(RunReport {
        manifest,
        manifest_path: dir.join("manifest.json"),
        simulation,
    })
}

fn write_outputs(config: &ScenarioConfig, sim: &Simulation, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let out = &config.outputs;
    let mut files = Vec::new();
    let mut maps = out.maps.clone();
    maps.sort();
    maps.dedup();
    for kind in maps {
        let (values, rows, cols, pitch) = sim.map(kind);
        let stem = format!("{}_{}", config.name, kind.label());
        let bin = dir.join(format!("{stem}.bin"));
        write_map(&bin, &values, rows, cols, pitch, kind.label())?;
        let pgm = dir.join(format!("{stem}.pgm"));
        write_pgm(&pgm, &analysis::db_image(&values, out.db_floor), rows, cols)?;
        for path in [bin.clone(), bin.with_extension("hdr"), pgm] {
            files.push(file_entry(dir, &path)?);
        }
    }

    let mut pairs_ratio = BTreeMap::new();
    let mut peak_std = BTreeMap::new();
    for c in [&sim.sum, &sim.difference] {
        let label = c.kind().as_str().to_string();
        pairs_ratio.insert(label.clone(), analysis::pairs_ratio(c, out.peak_radius)?);
        peak_std.insert(label, analysis::peak_std(c, out.peak_window)?);
    }
    let schmidt = out
        .schmidt
        .iter()
        .map(|s| {
            Ok(SchmidtEntry {
                label: s.label.clone(),
                value: analysis::schmidt_number(s.inputs()?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        name: config.name.clone(),
        config: config.clone(),
        total_weight: sim.total_weight(),
        pairs_ratio,
        peak_std,
        schmidt,
        wall_time_s: sim.wall_time_s,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Numerical(format!("manifest serialization: {e}")))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Writes `values` as little-endian f64 plus the `.hdr` sidecar.
pub fn write_map(
    path: &Path,
    values: &[f64],
    rows: usize,
    cols: usize,
    pitch: f64,
    kind: &str,
) -> Result<()> {
    assert_eq!(values.len(), rows * cols);
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(
        path.with_extension("hdr"),
        format!("{MAP_MAGIC}\n{rows} {cols} {pitch:e} {kind}\n"),
    )?;
    Ok(())
}

/// A map read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredMap {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    pub kind: String,
    pub values: Vec<f64>,
}

pub fn read_map(path: &Path) -> Result<StoredMap> {
    let header = fs::read_to_string(path.with_extension("hdr"))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAP_MAGIC) {
        return Err(Error::Config(format!("{}: bad map header", path.display())));
    }
    let fields: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    let bad = || Error::Config(format!("{}: malformed map header", path.display()));
    if fields.len() != 4 {
        return Err(bad());
    }
    let rows: usize = fields[0].parse().map_err(|_| bad())?;
    let cols: usize = fields[1].parse().map_err(|_| bad())?;
    let pitch: f64 = fields[2].parse().map_err(|_| bad())?;
    let bytes = fs::read(path)?;
    if bytes.len() != rows * cols * 8 {
        return Err(bad());
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(StoredMap {
        rows,
        cols,
        pitch,
        kind: fields[3].to_string(),
        values,
    })
}

fn write_pgm(path: &Path, pixels: &[u8], rows: usize, cols: usize) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{cols} {rows}\n255\n")?;
    f.write_all(pixels)?;
    Ok(())
}

fn file_entry(dir: &Path, path: &Path) -> Result<FileEntry> {
    let bytes = fs::read(path)?;
    Ok(FileEntry {
        path: path
            .strip_prefix(dir)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned(),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Memory ceiling for a benchmark case.
pub const BENCH_MEMORY_LIMIT: u64 = 2 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    pub n: usize,
    pub slices: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cases: Vec<BenchCase>,
    /// Least-squares slope of `ln t` against `ln n`, per slice count.
    pub n_slopes: BTreeMap<usize, f64>,
}

/// Bytes held by the wave function and per-slice buffers for an `n × n` run.
pub fn estimated_memory(n: usize) -> u64 {
    let p = (n * n) as u64;
    // ψ (2 planes) + A, B (4 planes) + two complex column buffers.
    p * p * 8 * 6 + p * p * 16 * 2
}

/// The two-dimensional type-2 scenario used for timing.
pub fn bench_scenario(n: usize, slices: usize, mode: ExecMode) -> Result<Scenario> {
    let grid = GridSpec::square(n, 5e-6, PlaneKind::NearField)?;
    let lens = OpticalElement::LensFourier {
        focal_length: 0.1,
        wavelength: 710e-9,
    };
    let arm = OpticalSystem::new(grid, vec![lens])?;
    Ok(Scenario {
        name: format!("bench_n{n}_m{slices}"),
        grid,
        pump: PumpSpec {
            waist_fwhm: 24e-6 * n as f64 / 32.0,
            center: (0.0, 0.0),
            amplitude: 1.0,
        },
        crystal: CrystalSpec {
            length: 0.8e-3,
            slices,
            pm_type: PhaseMatching::Type2,
            walkoff_angle: 0.03,
            wavelength_pump: 355e-9,
            wavelength_down: 710e-9,
            refractive_index: 1.65,
            slice_rule: SliceRule::Midpoint,
        },
        signal_arm: arm.clone(),
        idler_arm: arm,
        outputs: OutputConfig::default(),
        run: RunConfig {
            mode,
            ..RunConfig::default()
        },
    })
}

/// Times the engine over every `(n, M)` pair, best of `repeats`.
pub fn run_benchmark(
    n_list: &[usize],
    m_list: &[usize],
    repeats: usize,
    options: &RunOptions,
) -> Result<BenchReport> {
    for &n in n_list {
        let need = estimated_memory(n);
        if need > BENCH_MEMORY_LIMIT {
            return Err(Error::SizeGuard(format!(
                "n = {n} needs about {:.1} GiB, above the {:.1} GiB benchmark limit",
                need as f64 / (1u64 << 30) as f64,
                BENCH_MEMORY_LIMIT as f64 / (1u64 << 30) as f64
            )));
        }
    }
    let mode = if options.serial || options.threads.is_none() {
        ExecMode::Serial
    } else {
        ExecMode::Parallel
    };
    let mut cases = Vec::new();
    for &m in m_list {
        for &n in n_list {
            let mut scenario = bench_scenario(n, m, mode)?;
            scenario.run.threads = options.threads.unwrap_or(0);
            let mut best = f64::INFINITY;
            for _ in 0..repeats.max(1) {
                let started = Instant::now();
                let psi = run_engine::<f64>(&scenario)?;
                best = best.min(started.elapsed().as_secs_f64());
                if psi.has_non_finite() {
                    return Err(Error::Numerical("non-finite amplitude in benchmark".into()));
                }
            }
            cases.push(BenchCase {
                n,
                slices: m,
                seconds: best,
            });
        }
    }
    let mut n_slopes = BTreeMap::new();
    for &m in m_list {
        let pts: Vec<(f64, f64)> = cases
            .iter()
            .filter(|c| c.slices == m)
            .map(|c| ((c.n as f64).ln(), c.seconds.ln()))
            .collect();
        if pts.len() >= 2 {
            n_slopes.insert(m, fit_slope(&pts));
        }
    }
    Ok(BenchReport { cases, n_slopes })
}

/// Ordinary least-squares slope.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub wavefunction_error: f64,
    pub correlation_error: f64,
}

/// Compares the engine against the dense brute-force reference.
pub fn oracle_check(config: &ScenarioConfig) -> Result<OracleReport> {
    if config.grid.n > oracle::MAX_GRID || config.crystal.slices > oracle::MAX_SLICES {
        return Err(Error::SizeGuard(format!(
            "oracle check needs n ≤ {} and slices ≤ {} (config has n = {}, slices = {})",
            oracle::MAX_GRID,
            oracle::MAX_SLICES,
            config.grid.n,
            config.crystal.slices
        )));
    }
    let mut scenario = build(config)?;
    scenario.run.precision = Precision::F64;
    let psi = run_engine::<f64>(&scenario)?;
    let reference = oracle::thick_wavefunction(
        &scenario.pump,
        &scenario.crystal,
        &scenario.signal_arm,
        &scenario.idler_arm,
    )?;
    let wavefunction_error = oracle::relative_error(&psi.to_amplitudes(), &reference);

    let joint = joint_probability(&psi)?;
    let (diff, sum) = oracle::brute_force_correlations(joint.grid(), joint.values())?;
    let fast_diff = difference_correlation(&joint);
    let fast_sum = sum_correlation(&joint);
    let correlation_error = diff
        .iter()
        .zip(fast_diff.values())
        .chain(sum.iter().zip(fast_sum.values()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(OracleReport {
        wavefunction_error,
        correlation_error,
    })
}
