//! Densities of optically active states and their discretization into bands.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DosShape {
    /// Lorentzian with full width at half maximum `zeta2` (a rate, ζ²).
    Lorentzian { zeta2: f64 },
    /// Constant density across a band of width `width`.
    Flat2d { width: f64 },
    /// `[1 − (2(ω−ω₀)/W)²]^{−1/2}` on `|ω−ω₀| < W/2`.
    VanHove1d { width: f64 },
    /// Piecewise-linear density through `(omega, density)` samples, given
    /// relative to the center.
    Tabulated { omegas: Vec<f64>, density: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosModel {
    #[serde(flatten)]
    pub shape: DosShape,
    #[serde(default)]
    pub center: f64,
    /// Half-width of the discretized support; defaults to 10ζ² for the
    /// Lorentzian and to the band edge otherwise.
    #[serde(default)]
    pub support_half_width: Option<f64>,
}

impl DosModel {
    pub fn lorentzian(zeta2: f64) -> Self {
        Self { shape: DosShape::Lorentzian { zeta2 }, center: 0.0, support_half_width: None }
    }

    pub fn flat2d(width: f64) -> Self {
        Self { shape: DosShape::Flat2d { width }, center: 0.0, support_half_width: None }
    }

    pub fn vanhove1d(width: f64) -> Self {
        Self { shape: DosShape::VanHove1d { width }, center: 0.0, support_half_width: None }
    }

    pub fn tabulated(omegas: Vec<f64>, density: Vec<f64>) -> Self {
        Self { shape: DosShape::Tabulated { omegas, density }, center: 0.0, support_half_width: None }
    }

    pub fn with_support(mut self, half_width: f64) -> Self {
        self.support_half_width = Some(half_width);
        self
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {x}")))
            }
        };
        match &self.shape {
            DosShape::Lorentzian { zeta2 } => pos(*zeta2, "zeta2")?,
            DosShape::Flat2d { width } | DosShape::VanHove1d { width } => pos(*width, "band width")?,
            DosShape::Tabulated { omegas, density } => {
                if omegas.len() < 2 || omegas.len() != density.len() {
                    return Err(Error::invalid("tabulated DOS needs matching columns of at least two rows"));
                }
                if omegas.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("tabulated DOS frequencies must increase"));
                }
                if density.iter().any(|&d| d < 0.0) {
                    return Err(Error::invalid("tabulated DOS must be nonnegative"));
                }
            }
        }
        if let Some(h) = self.support_half_width {
            pos(h, "support half-width")?;
        }
        Ok(())
    }

    /// Unnormalized density at absolute frequency `omega`.
    pub fn density(&self, omega: f64) -> f64 {
        let x = omega - self.center;
        match &self.shape {
            DosShape::Lorentzian { zeta2 } => 1.0 / (x * x + 0.25 * zeta2 * zeta2),
            DosShape::Flat2d { width } => {
                if x.abs() <= width / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
            DosShape::VanHove1d { width } => {
                let u = 2.0 * x / width;
                if u.abs() < 1.0 {
                    (1.0 - u * u).powf(-0.5)
                } else {
                    0.0
                }
            }
            DosShape::Tabulated { omegas, density } => {
                if x < omegas[0] || x > *omegas.last().unwrap() {
                    return 0.0;
                }
                let k = omegas.partition_point(|&w| w <= x).clamp(1, omegas.len() - 1);
                let s = (x - omegas[k - 1]) / (omegas[k] - omegas[k - 1]);
                density[k - 1] + (density[k] - density[k - 1]) * s
            }
        }
    }

    /// Discretization interval relative to the center.
    pub fn support(&self) -> (f64, f64) {
        if let Some(h) = self.support_half_width {
            return (-h, h);
        }
        match &self.shape {
            DosShape::Lorentzian { zeta2 } => (-10.0 * zeta2, 10.0 * zeta2),
            DosShape::Flat2d { width } | DosShape::VanHove1d { width } => (-width / 2.0, width / 2.0),
            DosShape::Tabulated { omegas, .. } => (omegas[0], *omegas.last().unwrap()),
        }
    }

    /// `ζ²` of a Lorentzian; zero for the other shapes.
    pub fn zeta2(&self) -> f64 {
        match self.shape {
            DosShape::Lorentzian { zeta2 } => zeta2,
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            DosShape::Lorentzian { .. } => "lorentzian",
            DosShape::Flat2d { .. } => "flat2d",
            DosShape::VanHove1d { .. } => "vanhove1d",
            DosShape::Tabulated { .. } => "tabulated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDiscretization {
    /// Level frequencies `ω_l`, sorted ascending.
    pub levels: Vec<f64>,
    /// Optical amplitudes `γ_l` (rates `γ_l²`).
    pub couplings: Vec<f64>,
    /// Shelving amplitudes `Γ_l`.
    pub decays: Vec<f64>,
}

impl BandDiscretization {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn total_coupling(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }

    /// Single level at `omega` carrying the whole coupling.
    pub fn single(omega: f64, gamma: f64, big_gamma: f64) -> Self {
        Self { levels: vec![omega], couplings: vec![gamma], decays: vec![big_gamma] }
    }

    /// Total coupling that makes the steady-state transmission vanish at the
    /// band center: `Σ_l γ_l² (Γ_l²/2) / ((Γ_l²/2)² + (ω_l−ω₀)²) = 2`.
    ///
    /// For a Lorentzian continuum this is `Γ² + ζ²`.
    pub fn ideal_total_coupling(&self, center: f64) -> Result<f64> {
        let total = self.total_coupling();
        let k: f64 = self
            .levels
            .iter()
            .zip(&self.couplings)
            .zip(&self.decays)
            .map(|((w, g), d)| {
                let h = d * d / 2.0;
                g * g * h / (h * h + (w - center).powi(2))
            })
            .sum();
        if !(k > 0.0) || total == 0.0 {
            return Err(Error::invalid("band has no optical weight at its center"));
        }
        Ok(2.0 * total / k)
    }

    pub fn rescaled(&self, total_coupling: f64) -> Self {
        let s = (total_coupling / self.total_coupling()).sqrt();
        Self { couplings: self.couplings.iter().map(|g| g * s).collect(), ..self.clone() }
    }
}

/// Uniform midpoint grid over the DOS support with `γ_l² ∝ ρ(ω_l)` and
/// `Σ γ_l² = total_coupling`; every level shelves at amplitude `big_gamma`.
///
/// Midpoints sit half a spacing inside the support, which is where the van
/// Hove edge divergence gets clipped.
pub fn discretize_dos(dos: &DosModel, n_b: usize, total_coupling: f64, big_gamma: f64) -> Result<BandDiscretization> {
    dos.validate()?;
    if n_b == 0 {
        return Err(Error::invalid("n_b must be at least 1"));
    }
    if total_coupling < 0.0 || big_gamma < 0.0 {
        return Err(Error::invalid("rates must be nonnegative"));
    }
    let (lo, hi) = dos.support();
    let h = (hi - lo) / n_b as f64;
    let levels: Vec<f64> = (0..n_b).map(|l| dos.center + lo + (l as f64 + 0.5) * h).collect();
    let rho: Vec<f64> = levels.iter().map(|&w| dos.density(w)).collect();
    let sum: f64 = rho.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::invalid("density of states vanishes on every level"));
    }
    let couplings = rho.iter().map(|r| (r / sum * total_coupling).sqrt()).collect();
    Ok(BandDiscretization { levels, couplings, decays: vec![big_gamma; n_b] })
}
