//! Detector figures of merit computed from hierarchy outputs.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Registration flux below this fraction of its peak counts as settled.
pub const SETTLED_FLUX: f64 = 1e-6;
/// Efficiencies below this make the jitter estimate unreliable.
pub const UNRELIABLE_EFFICIENCY: f64 = 1e-3;

/// Photon-number-resolved detection probabilities on a time grid.
///
/// `at_least[n][i]` is the probability that at least `n` photons have been
/// registered by `times[i]`, already including the dwell time `t_min` and
/// the survival factor `exp(-n Δ t_min)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionDistribution {
    pub max_photons: usize,
    pub t_min: f64,
    pub delta: f64,
    pub times: Vec<f64>,
    pub at_least: Vec<Vec<f64>>,
}

/// Builds the distribution from raw registration probabilities.
/// `counted[n][i]` is the probability of at least `n` registrations by
/// `raw_times[i]`, for `n = 0..=M`. Output times are shifted by `t_min`.
pub fn detection_probabilities(
    counted: &[Vec<f64>],
    raw_times: &[f64],
    t_min: f64,
    delta: f64,
) -> Result<DetectionDistribution> {
    if counted.is_empty() {
        return Err(Error::invalid("need at least the zero-count series"));
    }
    if !(t_min >= 0.0) || !(delta >= 0.0) {
        return Err(Error::invalid("t_min and delta must be nonnegative"));
    }
    if let Some(s) = counted.iter().find(|s| s.len() != raw_times.len()) {
        return Err(Error::DimensionMismatch { expected: raw_times.len(), found: s.len() });
    }
    let at_least = counted
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let survive = (-(n as f64) * delta * t_min).exp();
            s.iter().map(|p| p * survive).collect()
        })
        .collect();
    Ok(DetectionDistribution {
        max_photons: counted.len() - 1,
        t_min,
        delta,
        times: raw_times.iter().map(|t| t + t_min).collect(),
        at_least,
    })
}

impl DetectionDistribution {
    /// Probability of exactly `n` registrations at each time.
    pub fn exactly(&self, n: usize) -> Vec<f64> {
        let a = &self.at_least[n];
        match self.at_least.get(n + 1) {
            Some(b) => a.iter().zip(b).map(|(x, y)| x - y).collect(),
            None => a.clone(),
        }
    }

    /// `table()[n][i]`: exactly-`n` probabilities for every `n`.
    pub fn table(&self) -> Vec<Vec<f64>> {
        (0..=self.max_photons).map(|n| self.exactly(n)).collect()
    }

    /// Time derivative of the at-least-`n` probability.
    pub fn flux(&self, n: usize) -> Vec<f64> {
        gradient(&self.times, &self.at_least[n])
    }

    /// Whether the registration flux for `n` has decayed below
    /// [`SETTLED_FLUX`] of its peak by the final time.
    pub fn settled(&self, n: usize) -> bool {
        let f = self.flux(n);
        let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        peak == 0.0 || f.last().map_or(true, |v| v.abs() <= SETTLED_FLUX * peak)
    }
}

/// Second-order finite-difference derivative on a possibly nonuniform grid.
pub fn gradient(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut d = vec![0.0; n];
    d[0] = (y[1] - y[0]) / (t[1] - t[0]);
    d[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
    for i in 1..n - 1 {
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1] + (h2 - h1) / (h1 * h2) * y[i] + h1 / (h2 * (h1 + h2)) * y[i + 1];
    }
    d
}

pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Efficiency `P_n(n, ∞)`, read at the final time. Fails if the
/// registration flux has not settled.
pub fn efficiency(dist: &DetectionDistribution, n: usize) -> Result<f64> {
    if n > dist.max_photons {
        return Err(Error::invalid(format!("n = {n} exceeds the resolved count {}", dist.max_photons)));
    }
    if !dist.settled(n) {
        return Err(Error::InsufficientTime(format!(
            "registration flux for n = {n} still above {SETTLED_FLUX:e} of its peak at t = {}",
            dist.times.last().copied().unwrap_or(0.0)
        )));
    }
    Ok(*dist.at_least[n].last().unwrap_or(&0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterReport {
    pub sigma: f64,
    pub mean_time: f64,
    pub efficiency: f64,
    /// Set when the efficiency is below [`UNRELIABLE_EFFICIENCY`].
    pub unreliable: bool,
}

/// Timing jitter: standard deviation of the registration-time density
/// `Ṗ_n / P_n(∞)`.
pub fn jitter(dist: &DetectionDistribution, n: usize) -> Result<JitterReport> {
    let eff = efficiency(dist, n)?;
    if !(eff > 0.0) {
        return Err(Error::ZeroEfficiency);
    }
    let flux = dist.flux(n);
    let t = &dist.times;
    let m0 = trapezoid(t, &flux);
    let m1 = trapezoid(t, &flux.iter().zip(t).map(|(f, t)| f * t).collect::<Vec<_>>());
    let m2 = trapezoid(t, &flux.iter().zip(t).map(|(f, t)| f * t * t).collect::<Vec<_>>());
    // Normalise by the integrated flux so the grid start need not sit at P = 0.
    let norm = if m0 > 0.0 { m0 } else { eff };
    let mean = m1 / norm;
    let var = m2 / norm - mean * mean;
    Ok(JitterReport { sigma: var.max(0.0).sqrt(), mean_time: mean, efficiency: eff, unreliable: eff < UNRELIABLE_EFFICIENCY })
}

/// System jitter `sqrt(σ² − σ₀²)`. The flag reports a negative radicand, in
/// which case the returned value is `sqrt(σ₀² − σ²)`.
pub fn system_jitter(sigma: f64, sigma0: f64) -> (f64, bool) {
    let d = sigma * sigma - sigma0 * sigma0;
    (d.abs().sqrt(), d < 0.0)
}

/// Zero-photon signal-to-noise ratio of an integrated current record.
pub fn snr0(k: f64, t_m: f64, delta_i_hit: f64) -> f64 {
    (8.0 * k * t_m).sqrt() * delta_i_hit
}

/// One amplified channel entering the dark-count estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarkCountChannel {
    /// Probability the channel is hit by `t_m + t_0` with no photon input.
    pub pi0: f64,
    pub k: f64,
    pub delta_i_hit: f64,
}

/// Dark-count rate summed over channels: intrinsic excitation plus the
/// Gaussian-noise false positive rate of each channel.
pub fn dark_count_rate(channels: &[DarkCountChannel], t_m: f64) -> Result<f64> {
    if !(t_m > 0.0) {
        return Err(Error::domain("dark count rate", "t_m must be positive"));
    }
    let mut r = 0.0;
    for c in channels {
        if !(c.k >= 0.0) || !(c.pi0 >= 0.0) {
            return Err(Error::domain("dark count rate", "k and pi0 must be nonnegative"));
        }
        r += c.pi0 / t_m + 0.5 / t_m * erfc(snr0(c.k, t_m, c.delta_i_hit) / std::f64::consts::SQRT_2);
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    /// The interval touches an end of the scan grid.
    pub clipped: bool,
}

/// Widest contiguous detuning interval with efficiency at or above
/// `threshold`, edges linearly interpolated.
pub fn bandwidth(detunings: &[f64], efficiencies: &[f64], threshold: f64) -> Result<Bandwidth> {
    if detunings.len() != efficiencies.len() {
        return Err(Error::DimensionMismatch { expected: detunings.len(), found: efficiencies.len() });
    }
    if detunings.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("detunings must be strictly increasing"));
    }
    let n = detunings.len();
    let cross = |i: usize, j: usize| {
        let (x0, x1, y0, y1) = (detunings[i], detunings[j], efficiencies[i], efficiencies[j]);
        x0 + (threshold - y0) * (x1 - x0) / (y1 - y0)
    };
    let mut best: Option<Bandwidth> = None;
    let mut i = 0;
    while i < n {
        if efficiencies[i] < threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && efficiencies[i + 1] >= threshold {
            i += 1;
        }
        let end = i;
        let lo = if start == 0 { detunings[0] } else { cross(start - 1, start) };
        let hi = if end == n - 1 { detunings[n - 1] } else { cross(end, end + 1) };
        let b = Bandwidth { lo, hi, width: hi - lo, clipped: start == 0 || end == n - 1 };
        if best.map_or(true, |x| b.width > x.width) {
            best = Some(b);
        }
        i += 1;
    }
    best.ok_or(Error::ThresholdNotReached(threshold))
}

/// Summary of one detection run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub photons: usize,
    pub efficiency: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma_sys: Option<f64>,
    pub sigma_sys_imaginary: bool,
    pub jitter_unreliable: bool,
    pub dark_count_rate: Option<f64>,
    pub count_rate: Option<f64>,
    pub snr0: Option<f64>,
    pub bandwidth: Option<Bandwidth>,
    pub max_trace_deviation: f64,
    pub error_estimate: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub notes: Vec<String>,
}
