//! Physical-realization arithmetic and count-rate / dark-count trade-offs.
//! All quantities are SI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

fn positive(formula: &'static str, vals: &[(&str, f64)]) -> Result<()> {
    for (name, v) in vals {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::domain(formula, format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Waveguide-enhanced optical coupling `γ_Eff² = (3λ²/4πA) n_D γ_Free²`.
pub fn effective_coupling(lambda: f64, area: f64, n_d: f64, gamma_free2: f64) -> Result<f64> {
    positive("effective-coupling", &[("lambda", lambda), ("area", area), ("n_d", n_d), ("gamma_free2", gamma_free2)])?;
    Ok(3.0 * lambda * lambda / (4.0 * std::f64::consts::PI * area) * n_d * gamma_free2)
}

/// Absorbers needed to reach ideal coupling, `⌈2A/3σ⌉`.
pub fn required_absorbers(area: f64, cross_section: f64) -> Result<u64> {
    positive("required-absorbers", &[("area", area), ("cross_section", cross_section)])?;
    let n = 2.0 * area / (3.0 * cross_section);
    // Guard against 1.0000000000000002 style rounding up.
    let r = n.round();
    Ok(if (n - r).abs() < 1e-9 * r.max(1.0) { r as u64 } else { n.ceil() as u64 })
}

/// Equivalent film thickness `h = 2/(3α)`.
pub fn film_thickness(alpha: f64) -> Result<f64> {
    positive("film-thickness", &[("alpha", alpha)])?;
    Ok(2.0 / (3.0 * alpha))
}

/// Shot-noise-limited `SNR₀ = f √(I t_m / 2e)` of a transport amplifier.
pub fn snr0_transport(f: f64, current: f64, t_m: f64) -> Result<f64> {
    positive("snr0-transport", &[("f", f), ("current", current), ("t_m", t_m)])?;
    if f > 1.0 {
        return Err(Error::domain("snr0-transport", format!("f must not exceed 1, got {f}")));
    }
    Ok(f * (current * t_m / (2.0 * ELEMENTARY_CHARGE)).sqrt())
}

/// Transport amplifier model usable as the SNR₀ curve of a trade-off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportAmplifier {
    pub f: f64,
    pub current: f64,
}

impl TransportAmplifier {
    pub fn snr0(&self, t_m: f64) -> f64 {
        self.f * (self.current * t_m / (2.0 * ELEMENTARY_CHARGE)).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub t_min: f64,
    pub delta: f64,
    pub r_c: f64,
    pub r_dc: f64,
    pub snr0: f64,
    pub n_a: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
    pub metadata: BTreeMap<String, String>,
}

/// Operating point at dwell `t_min` (with `t_m = t_min`). The reset rate is
/// fixed by `Eff_LOSS = 1 − exp(−N Δ t_MIN)`. The `N`-photon requirement is
/// spread over `n_a` monitored channels, each contributing `Δ/2` to the
/// count rate and `erfc(SNR₀/√2)/(2 t_MIN)` to the dark-count rate; at
/// `n_a = 2N` this gives `r_C = NΔ` and `r_DC = (N/t_MIN) erfc(SNR₀/√2)`.
pub fn tradeoff_point(n: usize, n_a: usize, eff_loss: f64, snr0: impl Fn(f64) -> f64, t_min: f64) -> Result<TradeoffPoint> {
    const F: &str = "tradeoff-curve";
    if n == 0 || n_a == 0 {
        return Err(Error::domain(F, "N and n_A must be at least 1"));
    }
    if !(eff_loss > 0.0 && eff_loss < 1.0) {
        return Err(Error::domain(F, format!("Eff_LOSS must lie in (0, 1), got {eff_loss}")));
    }
    positive(F, &[("t_min", t_min)])?;
    let delta = -(-eff_loss).ln_1p() / (n as f64 * t_min);
    let s = snr0(t_min);
    let half = n_a as f64 / 2.0;
    Ok(TradeoffPoint {
        t_min,
        delta,
        r_c: half * delta,
        r_dc: half / t_min * erfc(s / std::f64::consts::SQRT_2),
        snr0: s,
        n_a,
    })
}

pub fn tradeoff_curve(
    n: usize,
    n_a: usize,
    eff_loss: f64,
    snr0: impl Fn(f64) -> f64,
    t_min_grid: &[f64],
) -> Result<TradeoffCurve> {
    let points = t_min_grid.iter().map(|&t| tradeoff_point(n, n_a, eff_loss, &snr0, t)).collect::<Result<Vec<_>>>()?;
    let mut metadata = BTreeMap::new();
    metadata.insert("photons".into(), n.to_string());
    metadata.insert("eff_loss".into(), eff_loss.to_string());
    metadata.insert("n_a".into(), n_a.to_string());
    metadata.insert(
        "n_a_scaling".into(),
        "r_C = (n_A/2) Delta, r_DC = (n_A/(2 t_MIN)) erfc(SNR0/sqrt 2), t_m = t_MIN".into(),
    );
    Ok(TradeoffCurve { points, metadata })
}

/// Logarithmically spaced grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Highest count rate whose dark-count rate stays at or below `r_dc_max`,
/// searching dwell times in `[t_lo, t_hi]`. Both rates fall with `t_MIN`,
/// so the answer is the shortest admissible dwell. `None` when even `t_hi`
/// is too noisy.
pub fn max_count_rate(
    n: usize,
    n_a: usize,
    eff_loss: f64,
    snr0: impl Fn(f64) -> f64,
    r_dc_max: f64,
    t_lo: f64,
    t_hi: f64,
) -> Result<Option<TradeoffPoint>> {
    positive("max-count-rate", &[("t_lo", t_lo), ("t_hi", t_hi)])?;
    let at = |t: f64| tradeoff_point(n, n_a, eff_loss, &snr0, t);
    let hi_pt = at(t_hi)?;
    if hi_pt.r_dc > r_dc_max {
        return Ok(None);
    }
    let lo_pt = at(t_lo)?;
    if lo_pt.r_dc <= r_dc_max {
        return Ok(Some(lo_pt));
    }
    let (mut a, mut b) = (t_lo.ln(), t_hi.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if at(m.exp())?.r_dc <= r_dc_max {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-13 {
            break;
        }
    }
    Ok(Some(at(b.exp())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_examples() {
        let l = 1.55e-6;
        let unit = 3.0 * l * l / (4.0 * std::f64::consts::PI);
        assert!((effective_coupling(l, unit, 1.0, 2.5).unwrap() - 2.5).abs() < 1e-12);
        let r = effective_coupling(l, 1e-12, 1e5, 1.0).unwrap();
        assert!((r / 5.7e4 - 1.0).abs() < 0.01, "{r}");
        assert!(effective_coupling(l, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn absorber_examples() {
        assert_eq!(required_absorbers(1.5, 1.0).unwrap(), 1);
        // A tightly confined mode of about 100 nm on a side.
        let wg = 1e-14;
        let lo = required_absorbers(wg, 10e-20).unwrap();
        let hi = required_absorbers(wg, 1e-20).unwrap();
        assert!(lo >= 10_000 && hi <= 1_000_000, "{lo} {hi}");
        assert!((film_thickness(2e7).unwrap() - 3.333e-8).abs() < 1e-11);
    }

    #[test]
    fn snr_examples() {
        assert!((snr0_transport(1.0, 2.0 * ELEMENTARY_CHARGE, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let a = snr0_transport(0.1, 10e-6, 1e-3).unwrap();
        let b = snr0_transport(0.1, 10e-6, 4e-3).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        assert!(snr0_transport(1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn tradeoff_reduces_to_pnr_relations() {
        let p = tradeoff_point(12, 24, 0.01, |_| 3.0, 1e-6).unwrap();
        let q = crate::oracles::pnr_rate_relations(12, p.delta, 1e-6, 3.0).unwrap();
        assert!((p.r_c - q.r_c).abs() < 1e-9 * q.r_c);
        assert!((p.r_dc - q.r_dc).abs() < 1e-9 * q.r_dc);
        assert!((q.eff_loss - 0.01).abs() < 1e-12);
    }

    #[test]
    fn infinite_snr_limb() {
        let p = tradeoff_point(4, 8, 0.01, |_| 1e3, 1e-9).unwrap();
        assert_eq!(p.r_dc, 0.0);
        assert!(tradeoff_point(4, 8, 1.0, |_| 1.0, 1e-9).is_err());
    }

    #[test]
    fn max_count_rate_respects_bound() {
        let amp = TransportAmplifier { f: 0.1, current: 10e-6 };
        let p = max_count_rate(12, 24, 0.01, |t| amp.snr0(t), 1e-3, 1e-12, 1.0).unwrap().unwrap();
        assert!(p.r_dc <= 1e-3 * (1.0 + 1e-9));
        let q = tradeoff_point(12, 24, 0.01, |t| amp.snr0(t), p.t_min * 0.99).unwrap();
        assert!(q.r_dc > 1e-3);
    }
}
