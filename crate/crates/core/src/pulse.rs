//! Incident single-mode pulse: envelope `E(t)`, cumulative profile `f(t)` and
//! Fock content `c_{N,M}`.
//!
//! Envelopes are real and expressed in the frame rotating at the band-center
//! frequency; the carrier is kept only to derive the detuning.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Intensity tails below this are treated as outside the support.
pub const TAIL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum PulseShape {
    Gaussian { sigma0: f64, t_center: f64 },
    /// Constant amplitude on `[t_start, t_start + width]`.
    Square { t_start: f64, width: f64 },
    /// `|E|² = e^{(t−t_end)/τ}/τ` for `t < t_end`, zero after.
    RisingExponential { t_end: f64, tau: f64 },
    /// Piecewise-linear amplitude through the samples, rescaled to unit norm.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub shape: PulseShape,
    /// Carrier angular frequency.
    #[serde(default)]
    pub carrier: f64,
}

pub fn gaussian_envelope(sigma0: f64, t_center: f64, carrier: f64) -> Result<PulseEnvelope> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(Error::invalid(format!("pulse width must be positive, got {sigma0}")));
    }
    Ok(PulseEnvelope { shape: PulseShape::Gaussian { sigma0, t_center }, carrier })
}

pub fn square_envelope(t_start: f64, width: f64, carrier: f64) -> Result<PulseEnvelope> {
    if !(width > 0.0) {
        return Err(Error::invalid(format!("pulse width must be positive, got {width}")));
    }
    Ok(PulseEnvelope { shape: PulseShape::Square { t_start, width }, carrier })
}

pub fn rising_exponential_envelope(t_end: f64, tau: f64, carrier: f64) -> Result<PulseEnvelope> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("rise time must be positive, got {tau}")));
    }
    Ok(PulseEnvelope { shape: PulseShape::RisingExponential { t_end, tau }, carrier })
}

pub fn tabulated_envelope(times: Vec<f64>, values: Vec<f64>, carrier: f64) -> Result<PulseEnvelope> {
    if times.len() < 2 || times.len() != values.len() {
        return Err(Error::invalid("tabulated envelope needs at least two (t, E) samples"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("tabulated times must be strictly increasing"));
    }
    let norm = segment_integrals(&times, &values).iter().sum::<f64>();
    if !(norm > 0.0) {
        return Err(Error::invalid("tabulated envelope has zero norm"));
    }
    let s = norm.sqrt();
    let values = values.into_iter().map(|v| v / s).collect();
    Ok(PulseEnvelope { shape: PulseShape::Tabulated { times, values }, carrier })
}

/// Reads whitespace- or comma-separated `(t, E)` rows; `#` starts a comment.
pub fn load_tabulated(path: &Path, carrier: f64) -> Result<PulseEnvelope> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if cols.len() != 2 {
            return Err(Error::Parse(format!("{}:{}: expected two columns", path.display(), lineno + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))
        };
        times.push(parse(cols[0])?);
        values.push(parse(cols[1])?);
    }
    tabulated_envelope(times, values, carrier)
}

/// `∫ E²` over each linear segment.
fn segment_integrals(times: &[f64], values: &[f64]) -> Vec<f64> {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]) / 3.0)
        .collect()
}

impl PulseEnvelope {
    pub fn amplitude(&self, t: f64) -> f64 {
        match &self.shape {
            PulseShape::Gaussian { sigma0, t_center } => {
                let x = t - t_center;
                (2.0 * std::f64::consts::PI * sigma0 * sigma0).powf(-0.25) * (-x * x / (4.0 * sigma0 * sigma0)).exp()
            }
            PulseShape::Square { t_start, width } => {
                if t >= *t_start && t <= t_start + width {
                    width.powf(-0.5)
                } else {
                    0.0
                }
            }
            PulseShape::RisingExponential { t_end, tau } => {
                if t <= *t_end {
                    tau.powf(-0.5) * ((t - t_end) / (2.0 * tau)).exp()
                } else {
                    0.0
                }
            }
            PulseShape::Tabulated { times, values } => {
                if t < times[0] || t > *times.last().unwrap() {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= t).min(times.len() - 1).max(1);
                let (t0, t1) = (times[k - 1], times[k]);
                let s = (t - t0) / (t1 - t0);
                values[k - 1] + (values[k] - values[k - 1]) * s
            }
        }
    }

    pub fn intensity(&self, t: f64) -> f64 {
        self.amplitude(t).powi(2)
    }

    /// `f(t) = ∫_{−∞}^t |E(τ)|² dτ`
    pub fn cumulative(&self, t: f64) -> f64 {
        let f = match &self.shape {
            PulseShape::Gaussian { sigma0, t_center } => 0.5 * erfc(-(t - t_center) / (std::f64::consts::SQRT_2 * sigma0)),
            PulseShape::Square { t_start, width } => ((t - t_start) / width).clamp(0.0, 1.0),
            PulseShape::RisingExponential { t_end, tau } => {
                if t >= *t_end {
                    1.0
                } else {
                    ((t - t_end) / tau).exp()
                }
            }
            PulseShape::Tabulated { times, values } => {
                if t <= times[0] {
                    return 0.0;
                }
                let seg = segment_integrals(times, values);
                let mut acc = 0.0;
                for k in 1..times.len() {
                    if t >= times[k] {
                        acc += seg[k - 1];
                    } else {
                        let (a, b) = (values[k - 1], values[k]);
                        let h = times[k] - times[k - 1];
                        let x = t - times[k - 1];
                        acc += a * a * x + a * (b - a) * x * x / h + (b - a).powi(2) * x.powi(3) / (3.0 * h * h);
                        break;
                    }
                }
                acc
            }
        };
        f.clamp(0.0, 1.0)
    }

    /// Interval outside of which the intensity carries less than [`TAIL`].
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            PulseShape::Gaussian { sigma0, t_center } => (t_center - 7.5 * sigma0, t_center + 7.5 * sigma0),
            PulseShape::Square { t_start, width } => (*t_start, t_start + width),
            PulseShape::RisingExponential { t_end, tau } => (t_end + tau * TAIL.ln(), *t_end),
            PulseShape::Tabulated { times, .. } => (times[0], *times.last().unwrap()),
        }
    }

    /// Mean arrival time of `|E|²`.
    pub fn mean_time(&self) -> f64 {
        match &self.shape {
            PulseShape::Gaussian { t_center, .. } => *t_center,
            PulseShape::Square { t_start, width } => t_start + width / 2.0,
            PulseShape::RisingExponential { t_end, tau } => t_end - tau,
            PulseShape::Tabulated { .. } => self.moments().0,
        }
    }

    /// Standard deviation `σ₀` of `|E|²`.
    pub fn sigma0(&self) -> f64 {
        match &self.shape {
            PulseShape::Gaussian { sigma0, .. } => *sigma0,
            PulseShape::Square { width, .. } => width / 12f64.sqrt(),
            PulseShape::RisingExponential { tau, .. } => *tau,
            PulseShape::Tabulated { .. } => self.moments().1,
        }
    }

    fn moments(&self) -> (f64, f64) {
        let (a, b) = self.support();
        let n = 20_000;
        let h = (b - a) / n as f64;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let t = a + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 } * self.intensity(t) * h;
            m0 += w;
            m1 += w * t;
            m2 += w * t * t;
        }
        let mean = m1 / m0;
        (mean, (m2 / m0 - mean * mean).max(0.0).sqrt())
    }

    /// Carrier minus the given band-center frequency.
    pub fn detuning(&self, center: f64) -> f64 {
        self.carrier - center
    }
}

/// Fock-superposition content of the incident mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldInput {
    /// `c[n][m] = c_{n,m}` for `n, m ∈ 0..=N_max`.
    pub coefficients: Vec<Vec<C64>>,
    pub envelope: PulseEnvelope,
}

pub fn fock_input(n: usize, envelope: PulseEnvelope) -> FieldInput {
    let mut c = vec![vec![C64::new(0.0, 0.0); n + 1]; n + 1];
    c[n][n] = C64::new(1.0, 0.0);
    FieldInput { coefficients: c, envelope }
}

impl FieldInput {
    pub fn new(coefficients: Vec<Vec<C64>>, envelope: PulseEnvelope) -> Result<Self> {
        let f = Self { coefficients, envelope };
        f.validate()?;
        Ok(f)
    }

    /// Pure superposition `Σ a_N |N⟩`, normalized.
    pub fn superposition(amplitudes: &[C64], envelope: PulseEnvelope) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || norm == 0.0 {
            return Err(Error::invalid("superposition needs a nonzero amplitude"));
        }
        let a: Vec<C64> = amplitudes.iter().map(|x| x / norm).collect();
        let c = a.iter().map(|an| a.iter().map(|am| an * am.conj()).collect()).collect();
        Self::new(c, envelope)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.coefficients.len();
        if n == 0 || self.coefficients.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("coefficient matrix must be square and nonempty"));
        }
        let mut tr = 0.0;
        for i in 0..n {
            let d = self.coefficients[i][i];
            if d.re < -1e-15 || d.im.abs() > 1e-12 {
                return Err(Error::invalid("diagonal coefficients must be real and nonnegative"));
            }
            tr += d.re;
            for j in 0..n {
                if (self.coefficients[i][j] - self.coefficients[j][i].conj()).norm() > 1e-12 {
                    return Err(Error::invalid("coefficient matrix must be Hermitian"));
                }
            }
        }
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("coefficients must have unit trace, got {tr}")));
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Largest `N` with nonzero weight.
    pub fn max_photons(&self) -> usize {
        (0..self.coefficients.len()).rev().find(|&i| self.coefficients[i][i].norm() > 0.0).unwrap_or(0)
    }

    /// `Some(N)` when the input is the Fock state `|N⟩`.
    pub fn fock_number(&self) -> Option<usize> {
        let n = self.max_photons();
        let single = self
            .coefficients
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, c)| (i == n && j == n) || c.norm() == 0.0));
        single.then_some(n)
    }
}
