//! Closed-form predictions used for cross-validation and quick design work.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::architecture::ArchitectureSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub formula: String,
    pub inputs: BTreeMap<String, f64>,
}

impl OracleResult {
    fn new(value: f64, formula: &str, inputs: &[(&str, f64)]) -> Self {
        Self { value, formula: formula.into(), inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }
}

/// Single-photon efficiency of a band element driven by a long pulse.
/// `gamma`, `big_gamma` and `zeta` are amplitudes; rates are their squares.
pub fn band_efficiency(n_b: f64, gamma: f64, big_gamma: f64, zeta: f64, delta_omega: f64) -> Result<OracleResult> {
    const F: &str = "band-efficiency";
    if [n_b, gamma, big_gamma, zeta].iter().any(|v| !(*v >= 0.0)) || !delta_omega.is_finite() {
        return Err(Error::domain(F, "inputs must be nonnegative"));
    }
    let coupling = n_b * gamma * gamma;
    let loss = big_gamma * big_gamma + zeta * zeta;
    let s = coupling + loss;
    if s == 0.0 {
        return Err(Error::domain(F, "n_b γ² + Γ² + ζ² vanishes"));
    }
    let p = 4.0 * coupling * loss / (s * s) / (1.0 + 4.0 * delta_omega * delta_omega / (s * s));
    Ok(OracleResult::new(
        p,
        F,
        &[("n_b", n_b), ("gamma", gamma), ("big_gamma", big_gamma), ("zeta", zeta), ("delta_omega", delta_omega)],
    ))
}

/// Largest count rate of a single resetting element for a tolerated loss.
/// With `approximate` the small-loss branch is used.
pub fn single_element_count_rate(delta: f64, t_min: f64, eff_loss: f64, approximate: bool) -> Result<OracleResult> {
    const F: &str = "single-element-count-rate";
    if !(eff_loss > 0.0 && eff_loss < 1.0) {
        return Err(Error::domain(F, format!("Eff_LOSS must lie in (0, 1), got {eff_loss}")));
    }
    if !(delta >= 0.0) || !(t_min >= 0.0) {
        return Err(Error::domain(F, "Δ and t_MIN must be nonnegative"));
    }
    let arg = if approximate {
        (eff_loss + delta * t_min).abs()
    } else {
        (1.0 - (1.0 - eff_loss) * (delta * t_min).exp()).abs()
    };
    if arg == 0.0 || arg == 1.0 || !arg.is_finite() {
        return Err(Error::domain(F, format!("logarithm argument {arg} is singular")));
    }
    let r = if delta == 0.0 { 0.0 } else { -delta / arg.ln() };
    let name = if approximate { "single-element-count-rate-approx" } else { F };
    Ok(OracleResult::new(r, name, &[("delta", delta), ("t_min", t_min), ("eff_loss", eff_loss)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnrRates {
    pub eff_loss: f64,
    pub r_c: f64,
    /// First-order estimate `Eff_LOSS / t_MIN`, consistent with `r_C = NΔ`.
    pub r_c_approx: f64,
    /// The printed small-loss form `N Eff_LOSS / t_MIN`; exceeds `r_C` by `N`.
    pub r_c_printed: f64,
    pub r_dc: f64,
    /// `r_DC / r_C`.
    pub ratio: f64,
    /// The printed small-loss ratio `erfc(SNR₀/√2) / Eff_LOSS`, which is
    /// `ratio / N` to first order.
    pub ratio_approx: f64,
}

/// Count rate, dark-count rate and their ratio for an `N`-photon PNR
/// detector with reset rate `delta` and dwell `t_min` (window `t_m = t_min`).
pub fn pnr_rate_relations(n: usize, delta: f64, t_min: f64, snr0: f64) -> Result<PnrRates> {
    const F: &str = "pnr-rate-relations";
    if n == 0 {
        return Err(Error::domain(F, "N must be at least 1"));
    }
    if !(t_min > 0.0) || !(delta >= 0.0) {
        return Err(Error::domain(F, "t_MIN must be positive and Δ nonnegative"));
    }
    let nf = n as f64;
    let eff_loss = -(-nf * delta * t_min).exp_m1();
    let r_c = nf * delta;
    let tail = erfc(snr0 / std::f64::consts::SQRT_2);
    let r_dc = nf / t_min * tail;
    let ratio = if r_dc == 0.0 { 0.0 } else { r_dc / r_c };
    let ratio_approx = if tail == 0.0 { 0.0 } else { tail / eff_loss };
    Ok(PnrRates {
        eff_loss,
        r_c,
        r_c_approx: eff_loss / t_min,
        r_c_printed: nf * eff_loss / t_min,
        r_dc,
        ratio,
        ratio_approx,
    })
}

/// Jitter fit for an acceptor pool: `σ₀ / (k_A² (n_A − N + 1))` with `k_A²`
/// in units of `1/σ₀`.
pub fn jitter_model(sigma0: f64, n_a: usize, k_a2: f64, n: usize) -> Result<OracleResult> {
    const F: &str = "jitter-model";
    if n > n_a {
        return Err(Error::domain(F, format!("N = {n} exceeds n_A = {n_a}")));
    }
    if !(k_a2 > 0.0) || !(sigma0 > 0.0) {
        return Err(Error::domain(F, "σ₀ and k_A² must be positive"));
    }
    let v = sigma0 / (k_a2 * (n_a - n + 1) as f64);
    Ok(OracleResult::new(v, F, &[("sigma0", sigma0), ("n_a", n_a as f64), ("k_a2", k_a2), ("n", n as f64)]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealReport {
    pub conditions: Vec<ConditionCheck>,
}

impl IdealReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub const NO_BRIGHT_TO_BRIGHT: &str = "no-bright-to-bright";
pub const NO_DARK_TO_BRIGHT: &str = "no-dark-to-bright";
pub const SYMMETRIC_SPECTRUM: &str = "symmetric-spectrum";

/// Structural check of the conditions for unit efficiency at a frequency.
/// Bright states are those the field operator lowers; relaxation channels
/// must not end in a bright state, and the optical spectrum `γ_l²` must be
/// mirror symmetric about `ω₀` to relative tolerance `tol`.
pub fn check_ideal_conditions(arch: &ArchitectureSpec, tol: f64) -> IdealReport {
    let parts = arch.check_parts();
    let dim = parts.hamiltonian.dim();
    let bright = match &parts.field {
        Some((_, l)) => l.matrix().nonzero_columns(),
        None => vec![false; dim],
    };
    let mut b2b = Vec::new();
    let mut d2b = Vec::new();
    for (tag, y) in &parts.baths {
        for (r, c, v) in y.matrix().iter() {
            if v.norm() == 0.0 || !bright[r] {
                continue;
            }
            let msg = format!("{tag}: {c} -> {r}");
            if bright[c] {
                b2b.push(msg);
            } else {
                d2b.push(msg);
            }
        }
    }
    let describe = |v: &[String]| if v.is_empty() { "none".to_string() } else { v.join(", ") };

    let omega0 = arch.params.omega0;
    let mut spec = arch.spectrum.clone();
    spec.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = spec.len();
    let w_max = spec.iter().fold(0.0f64, |m, s| m.max(s.1));
    let width = spec.iter().fold(0.0f64, |m, s| m.max((s.0 - omega0).abs())).max(1.0);
    let mut worst = 0.0f64;
    for i in 0..n {
        let (a, b) = (spec[i], spec[n - 1 - i]);
        let pos = (a.0 + b.0 - 2.0 * omega0).abs() / width;
        let wt = if w_max > 0.0 { (a.1 - b.1).abs() / w_max } else { 0.0 };
        worst = worst.max(pos).max(wt);
    }

    IdealReport {
        conditions: vec![
            ConditionCheck { name: NO_BRIGHT_TO_BRIGHT.into(), pass: b2b.is_empty(), detail: describe(&b2b) },
            ConditionCheck { name: NO_DARK_TO_BRIGHT.into(), pass: d2b.is_empty(), detail: describe(&d2b) },
            ConditionCheck {
                name: SYMMETRIC_SPECTRUM.into(),
                pass: worst <= tol,
                detail: format!("largest relative asymmetry {worst:.3e}"),
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architecture::{build_band_element, DosModel};
    use crate::operator::{local_transition, OperatorSpec};
    use proptest::prelude::*;

    #[test]
    fn band_efficiency_examples() {
        assert!((band_efficiency(4.0, 0.5, 0.8, 0.6, 0.0).unwrap().value - 1.0).abs() < 1e-15);
        assert!((band_efficiency(1.0, 1.0, 1.0, 0.0, 1.0).unwrap().value - 0.5).abs() < 1e-15);
        assert!(band_efficiency(1.0, 1.0, 1.0, 0.0, 1e9).unwrap().value < 1e-15);
        assert!(band_efficiency(0.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn count_rate_examples() {
        assert_eq!(single_element_count_rate(0.0, 1.0, 0.1, false).unwrap().value, 0.0);
        let r = single_element_count_rate(2.0, 0.0, (-1.0f64).exp(), false).unwrap().value;
        assert!((r - 2.0).abs() < 1e-12);
        let exact = single_element_count_rate(1.0, 0.001, 0.01, false).unwrap().value;
        let approx = single_element_count_rate(1.0, 0.001, 0.01, true).unwrap().value;
        assert!(((exact - approx) / exact).abs() < 0.05);
        assert!(single_element_count_rate(1.0, 1.0, 1.0, false).is_err());
        assert!(single_element_count_rate(0.0, 0.0, 0.0, true).is_err());
    }

    #[test]
    fn pnr_rate_examples() {
        let r = pnr_rate_relations(12, 1e3, 1e-6, 1e3).unwrap();
        assert_eq!((r.r_dc, r.ratio), (0.0, 0.0));
        let r = pnr_rate_relations(3, 1e-3, 1e-2, 3.0).unwrap();
        assert!((r.eff_loss - 3e-5).abs() < 1e-9);
        assert!(((r.r_c_approx - r.r_c) / r.r_c).abs() < 1e-4);
        assert!(((r.r_c_printed - 3.0 * r.r_c) / r.r_c).abs() < 1e-4);
        assert!(((r.ratio - 3.0 * r.ratio_approx) / r.ratio).abs() < 1e-4);
    }

    #[test]
    fn jitter_model_examples() {
        let s1 = jitter_model(1.0, 8, 1.0, 1).unwrap().value;
        let s4 = jitter_model(1.0, 8, 1.0, 4).unwrap().value;
        assert!((s4 / s1 - 8.0 / 5.0).abs() < 1e-12);
        assert!((jitter_model(1.0, 8, 1.0, 8).unwrap().value / s1 - 8.0).abs() < 1e-12);
        assert!(jitter_model(1.0, 2, 1.0, 3).is_err());
    }

    #[test]
    fn band_element_is_ideal() {
        let arch = build_band_element(&DosModel::flat2d(2.0), 8, 0.5, 1.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(check_ideal_conditions(&arch, 1e-9).all_pass());
    }

    #[test]
    fn bright_coupling_violation_detected() {
        let arch = build_band_element(&DosModel::flat2d(2.0), 3, 0.5, 1.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        let space = arch.space().unwrap().clone();
        let y = OperatorSpec::new(space.clone(), local_transition(space.total_dim(), 2, 1, 0.3)).unwrap();
        let arch = arch.with_extra_bath("EXTRA", y).unwrap();
        let rep = check_ideal_conditions(&arch, 1e-9);
        assert!(!rep.get(NO_BRIGHT_TO_BRIGHT).unwrap().pass);
        assert!(rep.get(NO_DARK_TO_BRIGHT).unwrap().pass);
    }

    #[test]
    fn asymmetric_dos_detected() {
        let dos = DosModel::tabulated(vec![-1.0, 0.0, 1.0], vec![1.0, 2.0, 4.0]);
        let arch = build_band_element(&dos, 6, 0.5, 1.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(!check_ideal_conditions(&arch, 1e-6).get(SYMMETRIC_SPECTRUM).unwrap().pass);
    }

    proptest! {
        #[test]
        fn band_efficiency_is_probability(
            n_b in 1.0f64..64.0, g in 0.0f64..2.0, big in 0.0f64..2.0, z in 0.0f64..2.0, d in -5.0f64..5.0,
        ) {
            prop_assume!(n_b * g * g + big * big + z * z > 1e-9);
            let p = band_efficiency(n_b, g, big, z, d).unwrap().value;
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }
    }
}
