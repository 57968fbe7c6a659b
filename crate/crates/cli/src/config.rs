//! Run configuration: parsing, validation, sweep expansion and hashing.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pnr_core::architecture::{
    ArchitectureKind, ArchitectureParams, DosModel, DosShape,
};
use pnr_core::pulse::{
    gaussian_envelope, load_tabulated, rising_exponential_envelope, square_envelope, FieldInput, PulseEnvelope,
};
use pnr_core::simulation::DetectionOptions;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_AXES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub architecture: Option<ArchitectureParams>,
    /// TOML file holding an `ArchitectureParams` table; resolved at load.
    #[serde(default)]
    pub architecture_file: Option<PathBuf>,
    /// Replace the total optical coupling by the value that makes the band
    /// center ideal.
    #[serde(default)]
    pub ideal_coupling: bool,
    pub field: FieldConfig,
    #[serde(default)]
    pub detection: DetectionOptions,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub trajectories: Option<TrajectoryConfig>,
    #[serde(default)]
    pub limits: Limits,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Fock number; mutually exclusive with `amplitudes`.
    #[serde(default)]
    pub photons: Option<usize>,
    /// Superposition amplitudes `[re, im]` over `|0⟩, |1⟩, ...`.
    #[serde(default)]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    pub envelope: EnvelopeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvelopeConfig {
    Gaussian {
        sigma0: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        carrier: f64,
    },
    Square {
        start: f64,
        width: f64,
        #[serde(default)]
        carrier: f64,
    },
    RisingExponential {
        end: f64,
        tau: f64,
        #[serde(default)]
        carrier: f64,
    },
    /// Two-column `(t, E)` text file.
    Tabulated {
        file: PathBuf,
        #[serde(default)]
        carrier: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Efficiency,
    Jitter,
    DarkCount,
    CountRate,
    Snr0,
    Bandwidth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Requested metrics; by default every metric the inputs allow.
    #[serde(default)]
    pub requested: Option<Vec<Metric>>,
    /// Measurement window; defaults to `detection.t_min` when positive.
    #[serde(default)]
    pub t_m: Option<f64>,
    /// Tolerated registration loss for the count-rate estimate.
    #[serde(default = "default_eff_loss")]
    pub eff_loss: f64,
    #[serde(default = "default_threshold")]
    pub bandwidth_threshold: f64,
    /// Detuning grid for the bandwidth scan.
    #[serde(default)]
    pub detunings: Option<Values>,
}

fn default_eff_loss() -> f64 {
    0.01
}

fn default_threshold() -> f64 {
    0.99
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            requested: None,
            t_m: None,
            eff_loss: default_eff_loss(),
            bandwidth_threshold: default_threshold(),
            detunings: None,
        }
    }
}

/// Explicit list or evenly spaced range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<SweepValue>),
    Range {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

impl Values {
    pub fn expand(&self) -> Result<Vec<SweepValue>, CliError> {
        match self {
            Values::List(v) if v.is_empty() => Err(CliError::config("value list is empty")),
            Values::List(v) => Ok(v.clone()),
            Values::Range { start, stop, count, log } => {
                if *count == 0 || !start.is_finite() || !stop.is_finite() {
                    return Err(CliError::config("range needs finite bounds and count >= 1"));
                }
                if *count == 1 {
                    return Ok(vec![SweepValue::Number(*start)]);
                }
                if *log && !(*start > 0.0 && *stop > 0.0) {
                    return Err(CliError::config("logarithmic range needs positive bounds"));
                }
                let f = |i: usize| i as f64 / (*count - 1) as f64;
                Ok((0..*count)
                    .map(|i| {
                        let v = if *log {
                            (start.ln() + (stop.ln() - start.ln()) * f(i)).exp()
                        } else {
                            start + (stop - start) * f(i)
                        };
                        SweepValue::Number(v)
                    })
                    .collect())
            }
        }
    }

    pub fn numbers(&self) -> Result<Vec<f64>, CliError> {
        self.expand()?
            .into_iter()
            .map(|v| match v {
                SweepValue::Number(x) => Ok(x),
                SweepValue::Text(s) => Err(CliError::config(format!("expected a number, got `{s}`"))),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: String,
    pub values: Values,
}

/// Per sweep point, the smallest `n_d` whose efficiency reaches `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub target: f64,
    #[serde(default = "default_search_max")]
    pub max_n_d: usize,
    /// Keep `n_d γ²` fixed while `n_d` varies.
    #[serde(default = "default_true")]
    pub hold_total_coupling: bool,
}

fn default_search_max() -> usize {
    4096
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub count: usize,
    pub dt: f64,
    #[serde(default = "default_traj_times")]
    pub n_times: usize,
    /// Absolute end time; pulse support plus settle window by default.
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Click threshold; `chi / 2` by default.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Window for click extraction; one output interval by default.
    #[serde(default)]
    pub t_m: Option<f64>,
    /// Trajectories whose full records are written out.
    #[serde(default = "default_saved")]
    pub save_records: usize,
    #[serde(default = "default_trace_tol")]
    pub trace_tolerance: f64,
}

fn default_traj_times() -> usize {
    201
}

fn default_saved() -> usize {
    5
}

fn default_trace_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default = "default_points")]
    pub max_sweep_points: usize,
    #[serde(default = "default_max_traj")]
    pub max_trajectories: usize,
    #[serde(default)]
    pub max_hilbert_dim: Option<usize>,
    #[serde(default)]
    pub max_liouville_dim: Option<usize>,
}

fn default_points() -> usize {
    1000
}

fn default_max_traj() -> usize {
    100_000
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_sweep_points: default_points(),
            max_trajectories: default_max_traj(),
            max_hilbert_dim: None,
            max_liouville_dim: None,
        }
    }
}

/// Configuration with every external reference resolved.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub hash: String,
    pub architecture: ArchitectureParams,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

fn relative(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Validates `config`, reads referenced files relative to `base` and
/// computes the configuration hash.
pub fn resolve(mut config: RunConfig, base: &Path, allow_large: bool) -> Result<Resolved, CliError> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    let mut arch = match (config.architecture.take(), config.architecture_file.take()) {
        (Some(a), None) => a,
        (None, Some(file)) => {
            let path = relative(base, &file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::config(format!("invalid architecture file: {e}")))?
        }
        _ => return Err(CliError::config("give exactly one of `architecture` and `architecture_file`")),
    };
    if allow_large {
        arch.max_hilbert_dim = Some(usize::MAX);
        arch.max_liouville_dim = Some(usize::MAX);
    } else {
        arch.max_hilbert_dim = arch.max_hilbert_dim.or(config.limits.max_hilbert_dim);
        arch.max_liouville_dim = arch.max_liouville_dim.or(config.limits.max_liouville_dim);
    }
    arch.validate()?;
    config.architecture = Some(arch.clone());

    if let EnvelopeConfig::Tabulated { file, .. } = &mut config.field.envelope {
        *file = relative(base, file);
    }
    build_field(&config.field, build_envelope(&config.field.envelope)?)?;
    config.detection.validate()?;
    if config.sweep.len() > MAX_AXES {
        return Err(CliError::config(format!("at most {MAX_AXES} sweep axes are supported")));
    }
    for axis in &config.sweep {
        check_parameter(&axis.parameter)?;
        axis.values.expand()?;
    }
    if let Some(d) = &config.metrics.detunings {
        d.numbers()?;
    }
    if let Some(s) = &config.search {
        if !(s.target > 0.0 && s.target <= 1.0) || s.max_n_d == 0 {
            return Err(CliError::config("search target must lie in (0, 1] and max_n_d be positive"));
        }
    }
    if let Some(t) = &config.trajectories {
        if t.count == 0 || !(t.dt > 0.0) || t.n_times < 2 || !(t.trace_tolerance > 0.0) {
            return Err(CliError::config("trajectories need count >= 1, dt > 0, n_times >= 2"));
        }
    }
    if !(config.metrics.eff_loss > 0.0 && config.metrics.eff_loss < 1.0) {
        return Err(CliError::config("metrics.eff_loss must lie in (0, 1)"));
    }
    let hash = config_hash(&config)?;
    Ok(Resolved { config, hash, architecture: arch })
}

pub fn config_hash(config: &RunConfig) -> Result<String, CliError> {
    let text = serde_json::to_string(config).map_err(|e| CliError::config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn build_envelope(cfg: &EnvelopeConfig) -> Result<PulseEnvelope, CliError> {
    Ok(match cfg {
        EnvelopeConfig::Gaussian { sigma0, center, carrier } => gaussian_envelope(*sigma0, *center, *carrier)?,
        EnvelopeConfig::Square { start, width, carrier } => square_envelope(*start, *width, *carrier)?,
        EnvelopeConfig::RisingExponential { end, tau, carrier } => rising_exponential_envelope(*end, *tau, *carrier)?,
        EnvelopeConfig::Tabulated { file, carrier } => load_tabulated(file, *carrier)?,
    })
}

pub fn build_field(cfg: &FieldConfig, envelope: PulseEnvelope) -> Result<FieldInput, CliError> {
    let field = match (cfg.photons, &cfg.amplitudes) {
        (Some(n), None) => pnr_core::pulse::fock_input(n, envelope),
        (None, Some(a)) => {
            let amps: Vec<C64> = a.iter().map(|[re, im]| C64::new(*re, *im)).collect();
            FieldInput::superposition(&amps, envelope)?
        }
        _ => return Err(CliError::config("field needs exactly one of `photons` and `amplitudes`")),
    };
    field.validate()?;
    Ok(field)
}

const ARCH_PARAMS: &[&str] = &[
    "gamma",
    "big_gamma",
    "delta",
    "chi",
    "k",
    "k_a",
    "omega0",
    "delta_omega",
    "n_b",
    "n_d",
    "n_a",
    "max_excitation",
];
const DERIVED_PARAMS: &[&str] = &["total_coupling", "transfer_rate", "dos_shape", "dos_width"];
const OTHER_PARAMS: &[&str] = &["photons", "sigma0", "t_min"];

fn check_parameter(name: &str) -> Result<(), CliError> {
    if ARCH_PARAMS.contains(&name) || DERIVED_PARAMS.contains(&name) || OTHER_PARAMS.contains(&name) {
        Ok(())
    } else {
        Err(CliError::config(format!("unknown sweep parameter `{name}`")))
    }
}

/// One fully specified run.
#[derive(Clone, Debug)]
pub struct Point {
    pub values: Vec<SweepValue>,
    pub architecture: ArchitectureParams,
    pub field: FieldInput,
    pub detection: DetectionOptions,
}

fn number(name: &str, v: &SweepValue) -> Result<f64, CliError> {
    match v {
        SweepValue::Number(x) => Ok(*x),
        SweepValue::Text(s) => Err(CliError::config(format!("`{name}` needs a number, got `{s}`"))),
    }
}

fn count(name: &str, v: &SweepValue) -> Result<usize, CliError> {
    let x = number(name, v)?;
    if x < 0.0 || x.fract() != 0.0 {
        return Err(CliError::config(format!("`{name}` needs a nonnegative integer, got {x}")));
    }
    Ok(x as usize)
}

/// Optically coupled levels sharing the field: `n_b` per element, times
/// `n_d` elements for multi-donor kinds.
fn levels(p: &ArchitectureParams) -> usize {
    match p.kind {
        ArchitectureKind::Single | ArchitectureKind::Band => p.n_b,
        _ => p.n_b * p.n_d,
    }
}

/// Total optical coupling carried by one set of absorbers.
pub fn set_total_coupling(p: &mut ArchitectureParams, total: f64) -> Result<(), CliError> {
    if !(total >= 0.0) {
        return Err(CliError::config(format!("total coupling must be nonnegative, got {total}")));
    }
    p.gamma = (total / levels(p) as f64).sqrt();
    Ok(())
}

pub fn total_coupling(p: &ArchitectureParams) -> f64 {
    levels(p) as f64 * p.gamma * p.gamma
}

fn set_dos_shape(p: &mut ArchitectureParams, name: &str) -> Result<(), CliError> {
    let dos = p.dos.clone().ok_or_else(|| CliError::config("`dos_shape` needs a dos model to start from"))?;
    let width = match dos.shape {
        DosShape::Lorentzian { zeta2 } => zeta2,
        DosShape::Flat2d { width } | DosShape::VanHove1d { width } => width,
        DosShape::Tabulated { .. } => return Err(CliError::config("`dos_shape` cannot start from a tabulated dos")),
    };
    let shape = match name {
        "lorentzian" => DosShape::Lorentzian { zeta2: width },
        "flat2d" => DosShape::Flat2d { width },
        "vanhove1d" => DosShape::VanHove1d { width },
        other => return Err(CliError::config(format!("unknown dos shape `{other}`"))),
    };
    p.dos = Some(DosModel { shape, ..dos });
    Ok(())
}

fn set_dos_width(p: &mut ArchitectureParams, w: f64) -> Result<(), CliError> {
    let dos = p.dos.as_mut().ok_or_else(|| CliError::config("`dos_width` needs a dos model"))?;
    match &mut dos.shape {
        DosShape::Lorentzian { zeta2 } => *zeta2 = w,
        DosShape::Flat2d { width } | DosShape::VanHove1d { width } => *width = w,
        DosShape::Tabulated { .. } => return Err(CliError::config("`dos_width` cannot rescale a tabulated dos")),
    }
    Ok(())
}

/// Total coupling that makes the element ideal at `omega0`.
pub fn ideal_total_coupling(p: &ArchitectureParams) -> Result<f64, CliError> {
    let probe = ArchitectureParams { gamma: 1.0, ..p.clone() };
    Ok(probe.element()?.ideal_total_coupling(p.omega0)?)
}

impl Resolved {
    /// Cartesian product of the sweep axes in row-major order (last axis
    /// fastest); a single point without axes.
    pub fn points(&self) -> Result<Vec<Point>, CliError> {
        let axes: Vec<(String, Vec<SweepValue>)> = self
            .config
            .sweep
            .iter()
            .map(|a| Ok((a.parameter.clone(), a.values.expand()?)))
            .collect::<Result<_, CliError>>()?;
        let total: usize = axes.iter().map(|(_, v)| v.len()).product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut values = vec![SweepValue::Number(0.0); axes.len()];
            for (k, (_, vals)) in axes.iter().enumerate().rev() {
                values[k] = vals[rem % vals.len()].clone();
                rem /= vals.len();
            }
            out.push(self.point(&axes, values)?);
        }
        Ok(out)
    }

    fn point(&self, axes: &[(String, Vec<SweepValue>)], values: Vec<SweepValue>) -> Result<Point, CliError> {
        let mut arch = self.architecture.clone();
        let mut field_cfg = self.config.field.clone();
        let mut detection = self.config.detection.clone();
        let mut total = None;
        let mut transfer = None;
        // Plain parameters first, then those defined relative to them.
        for ((name, _), v) in axes.iter().zip(&values) {
            match name.as_str() {
                "gamma" => arch.gamma = number(name, v)?,
                "big_gamma" => arch.big_gamma = number(name, v)?,
                "delta" => arch.delta = number(name, v)?,
                "chi" => arch.chi = number(name, v)?,
                "k" => arch.k = number(name, v)?,
                "k_a" => arch.k_a = number(name, v)?,
                "omega0" => arch.omega0 = number(name, v)?,
                "delta_omega" => arch.delta_omega = number(name, v)?,
                "n_b" => arch.n_b = count(name, v)?,
                "n_d" => arch.n_d = count(name, v)?,
                "n_a" => arch.n_a = count(name, v)?,
                "max_excitation" => arch.max_excitation = Some(count(name, v)? as u32),
                "dos_shape" => match v {
                    SweepValue::Text(s) => set_dos_shape(&mut arch, s)?,
                    SweepValue::Number(x) => return Err(CliError::config(format!("`dos_shape` needs a name, got {x}"))),
                },
                "dos_width" => set_dos_width(&mut arch, number(name, v)?)?,
                "photons" => {
                    field_cfg.photons = Some(count(name, v)?);
                    field_cfg.amplitudes = None;
                }
                "sigma0" => match &mut field_cfg.envelope {
                    EnvelopeConfig::Gaussian { sigma0, .. } => *sigma0 = number(name, v)?,
                    _ => return Err(CliError::config("`sigma0` sweeps need a gaussian envelope")),
                },
                "t_min" => detection.t_min = number(name, v)?,
                "total_coupling" => total = Some(number(name, v)?),
                "transfer_rate" => transfer = Some(number(name, v)?),
                other => return Err(CliError::config(format!("unknown sweep parameter `{other}`"))),
            }
        }
        if self.config.ideal_coupling {
            total = Some(ideal_total_coupling(&arch)?);
        }
        if let Some(t) = total {
            set_total_coupling(&mut arch, t)?;
        }
        if let Some(r) = transfer {
            if arch.n_a == 0 {
                return Err(CliError::config("`transfer_rate` needs n_a >= 1"));
            }
            arch.k_a = (r / arch.n_a as f64).sqrt();
        }
        arch.validate()?;
        detection.validate()?;
        let envelope = build_envelope(&field_cfg.envelope)?;
        let field = build_field(&field_cfg, envelope)?;
        Ok(Point { values, architecture: arch, field, detection })
    }

    pub fn axis_names(&self) -> Vec<String> {
        self.config.sweep.iter().map(|a| a.parameter.clone()).collect()
    }
}
