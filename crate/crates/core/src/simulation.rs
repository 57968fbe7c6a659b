//! End-to-end detection runs: architecture + field → detection distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architecture::{build_architecture, ArchitectureParams, ArchitectureSpec};
use crate::error::{Error, Result};
use crate::hierarchy::{integrate_hierarchy, HierarchyOptions, HierarchyRun};
use crate::integrate::IntegratorOptions;
use crate::liouvillian::counting_resolve;
use crate::metrics::{bandwidth, detection_probabilities, efficiency, Bandwidth, DetectionDistribution};
use crate::pulse::{fock_input, FieldInput, PulseEnvelope};

/// How registered detections are read out of the hierarchy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Registration {
    /// Population readout when the reset rate is zero, counting otherwise.
    #[default]
    Auto,
    /// Counting-resolved generator over the registration channels.
    Counting,
    /// Populations of the monitored level. Equivalent to counting only
    /// when nothing resets.
    Population,
}

fn default_n_times() -> usize {
    401
}

fn default_extensions() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionOptions {
    #[serde(default)]
    pub integrator: IntegratorOptions,
    /// Dwell required before a registration counts.
    #[serde(default)]
    pub t_min: f64,
    #[serde(default = "default_n_times")]
    pub n_times: usize,
    /// Absolute final time; by default the pulse support plus `settle`.
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Time allowed after the pulse for registrations to finish.
    #[serde(default)]
    pub settle: Option<f64>,
    #[serde(default)]
    pub registration: Registration,
    /// Times the settle window is doubled when the flux has not died out.
    #[serde(default = "default_extensions")]
    pub max_extensions: usize,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            t_min: 0.0,
            n_times: default_n_times(),
            t_end: None,
            settle: None,
            registration: Registration::Auto,
            max_extensions: default_extensions(),
        }
    }
}

impl DetectionOptions {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !(self.t_min >= 0.0) || self.n_times < 3 {
            return Err(Error::invalid("t_min must be nonnegative and n_times at least 3"));
        }
        if matches!(self.settle, Some(s) if !(s > 0.0)) {
            return Err(Error::invalid("settle must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionRun {
    pub distribution: DetectionDistribution,
    pub hierarchy: HierarchyRun,
    /// Readout actually used.
    pub registration: Registration,
    pub extensions: usize,
}

/// Default post-pulse window: several of the slowest internal time scales.
pub fn default_settle(params: &ArchitectureParams, envelope: &PulseEnvelope) -> f64 {
    let mut rates = vec![params.big_gamma.powi(2)];
    if params.n_a > 0 {
        rates.push(params.k_a.powi(2));
    }
    let slowest = rates.into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min);
    let internal = if slowest.is_finite() { 20.0 / slowest } else { 0.0 };
    internal + 4.0 * envelope.sigma0()
}

/// Simulates detection of `field` and returns the distribution of
/// registered photon counts, resolved up to `max(M, 1)` photons.
pub fn simulate_detection(arch: &ArchitectureSpec, field: &FieldInput, opts: &DetectionOptions) -> Result<DetectionRun> {
    opts.validate()?;
    field.validate()?;
    let m = field.max_photons().max(1);
    let registration = match opts.registration {
        Registration::Auto if arch.params.delta == 0.0 => Registration::Population,
        Registration::Auto => Registration::Counting,
        r => r,
    };
    let liou = arch.liouvillian()?;
    let rho0 = liou.ground_state();
    let (lo, hi) = field.envelope.support();
    let mut settle = opts.settle.unwrap_or_else(|| default_settle(&arch.params, &field.envelope));
    let hopts = HierarchyOptions { freeze_after_pulse: true, ..HierarchyOptions::from(opts.integrator.clone()) };

    for ext in 0..=opts.max_extensions {
        let end = opts.t_end.unwrap_or(hi + settle);
        if !(end > lo) {
            return Err(Error::InsufficientTime(format!("final time {end} precedes the pulse start {lo}")));
        }
        let times: Vec<f64> =
            (0..opts.n_times).map(|i| lo + (end - lo) * i as f64 / (opts.n_times - 1) as f64).collect();
        let run = match registration {
            Registration::Counting => {
                let tags: Vec<&str> = arch.registration_tags.iter().map(String::as_str).collect();
                let c = counting_resolve(&liou, &tags, m)?;
                let w: Vec<_> = (0..=m).map(|n| c.at_least_functional(n)).collect();
                integrate_hierarchy(&c, field, &rho0, &times, &w, &hopts)?
            }
            _ => {
                let w = (0..=m).map(|n| arch.monitored_at_least(&liou, n)).collect::<Result<Vec<_>>>()?;
                integrate_hierarchy(&liou, field, &rho0, &times, &w, &hopts)?
            }
        };
        let dist = detection_probabilities(&run.values, &times, opts.t_min, arch.params.delta)?;
        let settled = (1..=m).all(|n| dist.settled(n));
        if settled || opts.t_end.is_some() || ext == opts.max_extensions {
            return Ok(DetectionRun { distribution: dist, hierarchy: run, registration, extensions: ext });
        }
        settle *= 2.0;
    }
    unreachable!("loop returns on its last iteration")
}

/// Efficiency `P_N(N, ∞)` for an `N`-photon Fock pulse.
pub fn fock_efficiency(arch: &ArchitectureSpec, n: usize, envelope: &PulseEnvelope, opts: &DetectionOptions) -> Result<f64> {
    let run = simulate_detection(arch, &fock_input(n, envelope.clone()), opts)?;
    efficiency(&run.distribution, n.max(1))
}

/// Single-photon efficiency at each detuning, evaluated in parallel.
pub fn efficiency_scan(
    params: &ArchitectureParams,
    envelope: &PulseEnvelope,
    detunings: &[f64],
    opts: &DetectionOptions,
) -> Result<Vec<f64>> {
    detunings
        .par_iter()
        .map(|&d| {
            let p = ArchitectureParams { delta_omega: d, ..params.clone() };
            fock_efficiency(&build_architecture(&p)?, 1, envelope, opts)
        })
        .collect()
}

/// Efficiency scan followed by the widest interval above `threshold`.
pub fn bandwidth_scan(
    params: &ArchitectureParams,
    envelope: &PulseEnvelope,
    detunings: &[f64],
    threshold: f64,
    opts: &DetectionOptions,
) -> Result<(Vec<f64>, Bandwidth)> {
    let effs = efficiency_scan(params, envelope, detunings, opts)?;
    let b = bandwidth(detunings, &effs, threshold)?;
    Ok((effs, b))
}

/// Smallest `n ∈ [1, n_max]` with `eval(n) ≥ target`, assuming `eval` is
/// nondecreasing. Brackets by doubling, then bisects.
pub fn minimum_satisfying(mut eval: impl FnMut(usize) -> Result<f64>, target: f64, n_max: usize) -> Result<Option<usize>> {
    if n_max == 0 {
        return Ok(None);
    }
    let mut lo = 0usize; // known to fail (0 means untested lower bound)
    let mut hi = 1usize;
    loop {
        if eval(hi)? >= target {
            break;
        }
        if hi == n_max {
            return Ok(None);
        }
        lo = hi;
        hi = (hi * 2).min(n_max);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if eval(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architecture::build_single_element;
    use crate::pulse::gaussian_envelope;

    #[test]
    fn counting_and_population_agree_without_reset() {
        let arch = build_single_element(1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let env = gaussian_envelope(2.0, 0.0, 0.0).unwrap();
        let field = fock_input(1, env);
        let mut opts = DetectionOptions { n_times: 101, ..Default::default() };
        opts.registration = Registration::Counting;
        let a = simulate_detection(&arch, &field, &opts).unwrap();
        opts.registration = Registration::Population;
        let b = simulate_detection(&arch, &field, &opts).unwrap();
        assert_eq!(a.distribution.times, b.distribution.times);
        for (x, y) in a.distribution.at_least[1].iter().zip(&b.distribution.at_least[1]) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn settle_window_extends() {
        let arch = build_single_element(1.0, 0.3, 0.0, 1.0, 0.0).unwrap();
        let env = gaussian_envelope(1.0, 0.0, 0.0).unwrap();
        let opts = DetectionOptions { settle: Some(1.0), n_times: 201, ..Default::default() };
        let run = simulate_detection(&arch, &fock_input(1, env), &opts).unwrap();
        assert!(run.extensions > 0);
        assert!(run.distribution.settled(1));
    }

    #[test]
    fn vacuum_has_no_detections() {
        let arch = build_single_element(1.0, 1.0, 0.5, 1.0, 0.0).unwrap();
        let env = gaussian_envelope(1.0, 0.0, 0.0).unwrap();
        let run = simulate_detection(&arch, &fock_input(0, env), &DetectionOptions::default()).unwrap();
        assert_eq!(run.registration, Registration::Counting);
        assert!(run.distribution.at_least[1].iter().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn minimum_search() {
        assert_eq!(minimum_satisfying(|n| Ok(n as f64), 13.0, 100).unwrap(), Some(13));
        assert_eq!(minimum_satisfying(|n| Ok(n as f64), 1.0, 100).unwrap(), Some(1));
        assert_eq!(minimum_satisfying(|n| Ok(n as f64), 200.0, 100).unwrap(), None);
        assert_eq!(minimum_satisfying(|n| Ok(n as f64), 100.0, 100).unwrap(), Some(100));
    }
}
