use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::dos::{discretize_dos, BandDiscretization, DosModel};
use super::symmetric::{
    dissipator_map, hamiltonian_map, jump_map, left_map, right_map, scale_map, LocalMap, Species, SymmetricBasis,
    TermAssembler,
};
use crate::error::{Error, Result};
use crate::liouvillian::{AmpChannel, AmpSpec, Channel, FieldSuperops, LiouvilleBasis, Liouvillian, LiouvillianParts};
use crate::operator::{embed, local_transition, OperatorSpec};
use crate::space::{build_space, HilbertSpace, SubsystemSpec};
use crate::sparse::CsrMatrix;

pub const ABSORB: &str = "ABSORB";
pub const SHELVE: &str = "SHELVE";
pub const RESET: &str = "RESET";
pub const AMP: &str = "AMP";
pub const TRANSFER: &str = "TRANSFER";

pub const DEFAULT_MAX_HILBERT_DIM: usize = 1 << 14;
pub const DEFAULT_MAX_LIOUVILLE_DIM: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchitectureKind {
    Single,
    Band,
    Array,
    Pnr,
    PnrSymmetric,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

/// Declarative description of a detector. Amplitudes follow the
/// square-root-of-rate convention except `delta`, which is the reset rate Δ
/// itself (the reset operator carries amplitude `√Δ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureParams {
    pub kind: ArchitectureKind,
    /// Per-level optical amplitude γ; a band carries total coupling `n_b γ²`.
    #[serde(default)]
    pub gamma: f64,
    /// Shelving amplitude Γ.
    #[serde(default)]
    pub big_gamma: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "unit")]
    pub chi: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub dos: Option<DosModel>,
    #[serde(default = "one")]
    pub n_b: usize,
    #[serde(default = "one")]
    pub n_d: usize,
    #[serde(default)]
    pub n_a: usize,
    #[serde(default)]
    pub k_a: f64,
    #[serde(default)]
    pub omega0: f64,
    #[serde(default)]
    pub delta_omega: f64,
    /// Largest total excitation kept in the state space.
    #[serde(default)]
    pub max_excitation: Option<u32>,
    #[serde(default)]
    pub max_hilbert_dim: Option<usize>,
    #[serde(default)]
    pub max_liouville_dim: Option<usize>,
}

impl ArchitectureParams {
    pub fn new(kind: ArchitectureKind) -> Self {
        Self {
            kind,
            gamma: 0.0,
            big_gamma: 0.0,
            delta: 0.0,
            chi: 1.0,
            k: 0.0,
            dos: None,
            n_b: 1,
            n_d: 1,
            n_a: 0,
            k_a: 0.0,
            omega0: 0.0,
            delta_omega: 0.0,
            max_excitation: None,
            max_hilbert_dim: None,
            max_liouville_dim: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("big_gamma", self.big_gamma),
            ("delta", self.delta),
            ("k", self.k),
            ("k_a", self.k_a),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        if !self.chi.is_finite() || !self.delta_omega.is_finite() || !self.omega0.is_finite() {
            return Err(Error::invalid("chi, omega0 and delta_omega must be finite"));
        }
        if self.n_b == 0 {
            return Err(Error::invalid("n_b must be at least 1"));
        }
        match self.kind {
            ArchitectureKind::Pnr => {
                if self.n_d == 0 || self.n_a == 0 {
                    return Err(Error::invalid("pnr needs n_d >= 1 and n_a >= 1"));
                }
            }
            ArchitectureKind::Array | ArchitectureKind::PnrSymmetric => {
                if self.n_d == 0 {
                    return Err(Error::invalid("n_d must be at least 1"));
                }
            }
            ArchitectureKind::Band => {
                if self.dos.is_none() {
                    return Err(Error::invalid("band kind needs a dos model"));
                }
            }
            ArchitectureKind::Single => {}
        }
        if let Some(d) = &self.dos {
            d.validate()?;
        }
        Ok(())
    }

    /// Level structure of one absorbing element.
    pub fn element(&self) -> Result<BandDiscretization> {
        match &self.dos {
            Some(dos) => {
                let mut dos = dos.clone();
                dos.center = self.omega0;
                discretize_dos(&dos, self.n_b, self.n_b as f64 * self.gamma * self.gamma, self.big_gamma)
            }
            None => Ok(BandDiscretization::single(self.omega0, self.gamma * (self.n_b as f64).sqrt(), self.big_gamma)),
        }
    }
}

/// Local operators of one absorbing element `{0, 1_1..1_{n_b}, C}`.
#[derive(Clone, Debug)]
pub struct ElementOps {
    pub dim: usize,
    pub labels: Vec<String>,
    pub excitations: Vec<u32>,
    pub hamiltonian: CsrMatrix,
    pub lowering: CsrMatrix,
    pub shelves: Vec<CsrMatrix>,
    pub c_level: usize,
}

/// Rotating-frame element: `H = Σ_l (ω_l − ω₀ − δω)|1_l⟩⟨1_l|`,
/// `ℓ = Σ_l γ_l|0⟩⟨1_l|`, shelving `Γ_l|C⟩⟨1_l|`.
pub fn element_ops(band: &BandDiscretization, omega0: f64, delta_omega: f64) -> ElementOps {
    let nb = band.len();
    let dim = nb + 2;
    let c = nb + 1;
    let mut labels = vec!["0".to_string()];
    if nb == 1 {
        labels.push("1".into());
    } else {
        labels.extend((1..=nb).map(|l| format!("1_{l}")));
    }
    labels.push("C".into());
    let mut excitations = vec![1; dim];
    excitations[0] = 0;
    let hamiltonian = CsrMatrix::from_triplets(
        dim,
        dim,
        band.levels.iter().enumerate().map(|(l, w)| (l + 1, l + 1, C64::new(w - omega0 - delta_omega, 0.0))),
    );
    let lowering =
        CsrMatrix::from_triplets(dim, dim, band.couplings.iter().enumerate().map(|(l, g)| (0, l + 1, C64::new(*g, 0.0))));
    let shelves = band.decays.iter().enumerate().map(|(l, d)| local_transition(dim, c, l + 1, *d)).collect();
    ElementOps { dim, labels, excitations, hamiltonian, lowering, shelves, c_level: c }
}

#[derive(Clone, Debug)]
enum Model {
    Operators(LiouvillianParts),
    Symmetric(Arc<Liouvillian>),
}

/// Which subsystems and level count as "registered" in population readouts.
#[derive(Clone, Debug)]
enum Monitor {
    Composite { positions: Vec<usize>, level: usize },
    Symmetric { species: usize, level: usize },
}

#[derive(Clone, Debug)]
pub struct ArchitectureSpec {
    pub params: ArchitectureParams,
    /// Channels whose jumps register a detection.
    pub registration_tags: Vec<String>,
    /// Per element level: `(ω_l, γ_l²)`.
    pub spectrum: Vec<(f64, f64)>,
    pub metadata: BTreeMap<String, String>,
    model: Model,
    monitor: Monitor,
    /// One isolated element, used for structural checks of multi-element builds.
    element_parts: LiouvillianParts,
}

impl ArchitectureSpec {
    pub fn kind(&self) -> ArchitectureKind {
        self.params.kind
    }

    /// Operator content, when built on a tensor-product space.
    pub fn parts(&self) -> Option<&LiouvillianParts> {
        match &self.model {
            Model::Operators(p) => Some(p),
            Model::Symmetric(_) => None,
        }
    }

    /// Operators the ideal-condition checker inspects: the whole model for a
    /// single absorbing element, one isolated element otherwise.
    pub fn check_parts(&self) -> &LiouvillianParts {
        match (&self.model, self.params.kind) {
            (Model::Operators(p), ArchitectureKind::Single | ArchitectureKind::Band) => p,
            _ => &self.element_parts,
        }
    }

    pub fn space(&self) -> Option<&Arc<HilbertSpace>> {
        self.parts().map(|p| p.hamiltonian.space())
    }

    /// Appends a relaxation channel (tensor-product models only).
    pub fn with_extra_bath(mut self, tag: impl Into<String>, op: OperatorSpec) -> Result<Self> {
        match &mut self.model {
            Model::Operators(p) => {
                if **op.space() != **p.hamiltonian.space() {
                    return Err(Error::SpaceMismatch);
                }
                p.baths.push((tag.into(), op));
                Ok(self)
            }
            Model::Symmetric(_) => Err(Error::invalid("symmetric models cannot take extra operators")),
        }
    }

    /// Generator on the configured state space (excitation-truncated when
    /// `max_excitation` is set).
    pub fn liouvillian(&self) -> Result<Liouvillian> {
        self.liouvillian_with(self.params.max_excitation)
    }

    pub fn liouvillian_with(&self, max_excitation: Option<u32>) -> Result<Liouvillian> {
        match &self.model {
            Model::Symmetric(l) => Ok((**l).clone()),
            Model::Operators(parts) => {
                let space = parts.hamiltonian.space();
                let kept = match max_excitation {
                    Some(k) => (0..space.total_dim()).filter(|&s| space.excitation(s) <= k).count(),
                    None => space.total_dim(),
                };
                let limit = self.params.max_liouville_dim.unwrap_or(DEFAULT_MAX_LIOUVILLE_DIM);
                if kept * kept > limit {
                    return Err(Error::ResourceGuard(format!(
                        "Liouville dimension {} exceeds {limit}; lower max_excitation or use pnr-symmetric",
                        kept * kept
                    )));
                }
                match max_excitation {
                    None => Liouvillian::assemble_on(parts.clone(), (0..space.total_dim()).collect()),
                    Some(k) => crate::hierarchy::truncate_parts(parts, k),
                }
            }
        }
    }

    /// Functional giving the probability that at least `n` monitored
    /// subsystems sit in their monitored level.
    pub fn monitored_at_least(&self, liou: &Liouvillian, n: usize) -> Result<Vec<C64>> {
        self.monitored_weight(liou, |c| if c >= n { 1.0 } else { 0.0 })
    }

    /// Functional giving the mean number of monitored subsystems excited.
    pub fn monitored_mean(&self, liou: &Liouvillian) -> Result<Vec<C64>> {
        self.monitored_weight(liou, |c| c as f64)
    }

    fn monitored_weight(&self, liou: &Liouvillian, w: impl Fn(usize) -> f64) -> Result<Vec<C64>> {
        match (&self.monitor, liou.basis()) {
            (Monitor::Composite { positions, level }, LiouvilleBasis::Vectorized { space, .. }) => {
                liou.population_functional_weighted(|s| {
                    let lv = space.decompose(s);
                    w(positions.iter().filter(|&&p| lv[p] == *level).count())
                })
            }
            (Monitor::Symmetric { species, level }, LiouvilleBasis::Symmetric(b)) => {
                Ok(b.population_functional(|occ| w(occ[*species][*level])))
            }
            _ => Err(Error::invalid("Liouvillian does not belong to this architecture")),
        }
    }
}

fn guard_hilbert(params: &ArchitectureParams, dim: usize) -> Result<()> {
    let limit = params.max_hilbert_dim.unwrap_or(DEFAULT_MAX_HILBERT_DIM);
    if dim > limit {
        return Err(Error::ResourceGuard(format!(
            "Hilbert dimension {dim} exceeds {limit}; use kind pnr-symmetric or raise max_hilbert_dim"
        )));
    }
    Ok(())
}

fn spectrum_of(band: &BandDiscretization) -> Vec<(f64, f64)> {
    band.levels.iter().zip(&band.couplings).map(|(w, g)| (*w, g * g)).collect()
}

fn single_element_parts(params: &ArchitectureParams, band: &BandDiscretization) -> Result<LiouvillianParts> {
    let el = element_ops(band, params.omega0, params.delta_omega);
    let space = Arc::new(build_space(vec![SubsystemSpec::new("e", el.dim)
        .with_states(el.labels.clone())
        .with_excitations(el.excitations.clone())])?);
    let op = |m: &CsrMatrix| OperatorSpec::new(space.clone(), m.clone());
    let c = el.c_level;
    let mut baths: Vec<(String, OperatorSpec)> =
        el.shelves.iter().map(|s| Ok((SHELVE.to_string(), op(s)?))).collect::<Result<_>>()?;
    baths.push((RESET.into(), op(&local_transition(el.dim, 0, c, params.delta.sqrt()))?));
    let proj = op(&local_transition(el.dim, c, c, 1.0))?;
    Ok(LiouvillianParts {
        hamiltonian: op(&el.hamiltonian)?,
        baths,
        field: Some((ABSORB.into(), op(&el.lowering)?)),
        amps: vec![AmpSpec::projector(AMP, &proj, params.chi, params.k)],
    })
}

/// Three-level element `{0, 1, C}`: `L = γ|0⟩⟨1|`, `Y = Γ|C⟩⟨1|`,
/// reset `√Δ|0⟩⟨C|`, amplifier on `C`.
pub fn build_single_element(gamma: f64, big_gamma: f64, delta: f64, chi: f64, k: f64) -> Result<ArchitectureSpec> {
    let params = ArchitectureParams { gamma, big_gamma, delta, chi, k, ..ArchitectureParams::new(ArchitectureKind::Single) };
    build_architecture(&params)
}

pub fn build_band_element(
    dos: &DosModel,
    n_b: usize,
    gamma: f64,
    big_gamma: f64,
    delta: f64,
    chi: f64,
    k: f64,
    delta_omega: f64,
) -> Result<ArchitectureSpec> {
    let params = ArchitectureParams {
        dos: Some(dos.clone()),
        n_b,
        gamma,
        big_gamma,
        delta,
        chi,
        k,
        delta_omega,
        omega0: dos.center,
        ..ArchitectureParams::new(ArchitectureKind::Band)
    };
    build_architecture(&params)
}

/// Donor/acceptor detector on the full tensor-product space.
#[allow(clippy::too_many_arguments)]
pub fn build_pnr(
    n_d: usize,
    n_a: usize,
    dos: Option<&DosModel>,
    n_b: usize,
    gamma: f64,
    big_gamma: f64,
    k_a: f64,
    delta: f64,
    chi: f64,
    k: f64,
) -> Result<ArchitectureSpec> {
    let params = ArchitectureParams {
        n_d,
        n_a,
        dos: dos.cloned(),
        n_b,
        gamma,
        big_gamma,
        k_a,
        delta,
        chi,
        k,
        omega0: dos.map_or(0.0, |d| d.center),
        ..ArchitectureParams::new(ArchitectureKind::Pnr)
    };
    build_architecture(&params)
}

/// Permutation-invariant donor/acceptor model truncated at `max_excitation`
/// total excitations. With `n_a = 0` it describes the plain array instead.
#[allow(clippy::too_many_arguments)]
pub fn build_symmetric_reduced(
    n_d: usize,
    n_a: usize,
    gamma_eff: f64,
    big_gamma: f64,
    k_a: f64,
    delta: f64,
    chi: f64,
    k: f64,
    max_excitation: u32,
) -> Result<ArchitectureSpec> {
    let params = ArchitectureParams {
        n_d,
        n_a,
        gamma: gamma_eff,
        big_gamma,
        k_a,
        delta,
        chi,
        k,
        max_excitation: Some(max_excitation),
        ..ArchitectureParams::new(ArchitectureKind::PnrSymmetric)
    };
    build_architecture(&params)
}

pub fn build_architecture(params: &ArchitectureParams) -> Result<ArchitectureSpec> {
    params.validate()?;
    let band = params.element()?;
    let element_parts = single_element_parts(params, &band)?;
    let mut metadata = BTreeMap::new();
    metadata.insert("kind".into(), format!("{:?}", params.kind).to_lowercase());
    metadata.insert(
        "element".into(),
        match &params.dos {
            Some(d) => format!("band of {} levels, {} DOS", params.n_b, d.name()),
            None if params.n_b > 1 => format!("idealized: one effective level with gamma_eff^2 = n_b gamma^2 = {}", params.n_b as f64 * params.gamma.powi(2)),
            None => "single optical level".into(),
        },
    );
    metadata.insert("reset".into(), "amplitude sqrt(delta), rate delta".into());
    let spectrum = spectrum_of(&band);
    match params.kind {
        ArchitectureKind::Single | ArchitectureKind::Band => {
            metadata.insert("registration".into(), SHELVE.into());
            Ok(ArchitectureSpec {
                params: params.clone(),
                registration_tags: vec![SHELVE.into()],
                spectrum,
                metadata,
                model: Model::Operators(element_parts.clone()),
                monitor: Monitor::Composite { positions: vec![0], level: band.len() + 1 },
                element_parts,
            })
        }
        ArchitectureKind::Array | ArchitectureKind::Pnr => {
            let n_a = if params.kind == ArchitectureKind::Array { 0 } else { params.n_a };
            let (parts, monitor) = tensor_model(params, &band, n_a)?;
            let tag = if n_a == 0 { SHELVE } else { TRANSFER };
            metadata.insert("registration".into(), tag.into());
            metadata.insert("transfer".into(), "all-to-all, uniform k_a".into());
            Ok(ArchitectureSpec {
                params: params.clone(),
                registration_tags: vec![tag.into()],
                spectrum,
                metadata,
                model: Model::Operators(parts),
                monitor,
                element_parts,
            })
        }
        ArchitectureKind::PnrSymmetric => {
            let k = params.max_excitation.ok_or_else(|| Error::invalid("pnr-symmetric needs max_excitation"))?;
            let (liou, monitor) = symmetric_model(params, &band, k)?;
            let tag = if params.n_a == 0 { SHELVE } else { TRANSFER };
            metadata.insert("registration".into(), tag.into());
            metadata.insert("transfer".into(), "all-to-all, uniform k_a".into());
            metadata.insert("basis".into(), format!("permutation-invariant, {} types", liou.state_dim()));
            Ok(ArchitectureSpec {
                params: params.clone(),
                registration_tags: vec![tag.into()],
                spectrum,
                metadata,
                model: Model::Symmetric(Arc::new(liou)),
                monitor,
                element_parts,
            })
        }
    }
}

fn tensor_model(params: &ArchitectureParams, band: &BandDiscretization, n_a: usize) -> Result<(LiouvillianParts, Monitor)> {
    let el = element_ops(band, params.omega0, params.delta_omega);
    let n_d = params.n_d;
    let dim = el.dim.checked_pow(n_d as u32).and_then(|d| d.checked_mul(1usize.checked_shl(n_a as u32)?));
    guard_hilbert(params, dim.unwrap_or(usize::MAX))?;
    let mut subs: Vec<SubsystemSpec> = (0..n_d)
        .map(|i| SubsystemSpec::new(format!("D{i}"), el.dim).with_states(el.labels.clone()).with_excitations(el.excitations.clone()))
        .collect();
    subs.extend(
        (0..n_a).map(|j| SubsystemSpec::new(format!("A{j}"), 2).with_states(["A0", "A1"]).with_excitations([0, 1])),
    );
    let space = Arc::new(build_space(subs)?);
    let on = |m: &CsrMatrix, label: &str| embed(m, label, &space);
    let c = el.c_level;

    let mut h = OperatorSpec::zero(space.clone());
    let mut l = OperatorSpec::zero(space.clone());
    let mut baths = Vec::new();
    let mut amps = Vec::new();
    for i in 0..n_d {
        let d = format!("D{i}");
        h = h.add(&on(&el.hamiltonian, &d)?)?;
        l = l.add(&on(&el.lowering, &d)?)?;
        for s in &el.shelves {
            baths.push((SHELVE.to_string(), on(s, &d)?));
        }
        if n_a == 0 {
            baths.push((RESET.to_string(), on(&local_transition(el.dim, 0, c, params.delta.sqrt()), &d)?));
            amps.push(AmpSpec::projector(AMP, &on(&local_transition(el.dim, c, c, 1.0), &d)?, params.chi, params.k));
        }
    }
    for j in 0..n_a {
        let a = format!("A{j}");
        let excite = on(&local_transition(2, 1, 0, 1.0), &a)?;
        for i in 0..n_d {
            let release = on(&local_transition(el.dim, 0, c, params.k_a), &format!("D{i}"))?;
            baths.push((TRANSFER.to_string(), release.mul(&excite)?));
        }
        baths.push((RESET.to_string(), on(&local_transition(2, 0, 1, params.delta.sqrt()), &a)?));
        amps.push(AmpSpec::projector(AMP, &on(&local_transition(2, 1, 1, 1.0), &a)?, params.chi, params.k));
    }
    let monitor = if n_a == 0 {
        Monitor::Composite { positions: (0..n_d).collect(), level: c }
    } else {
        Monitor::Composite { positions: (n_d..n_d + n_a).collect(), level: 1 }
    };
    Ok((LiouvillianParts { hamiltonian: h, baths, field: Some((ABSORB.into(), l)), amps }, monitor))
}

fn symmetric_model(params: &ArchitectureParams, band: &BandDiscretization, k: u32) -> Result<(Liouvillian, Monitor)> {
    let el = element_ops(band, params.omega0, params.delta_omega);
    let n_a = params.n_a;
    let mut species = vec![Species::new("D", params.n_d, el.excitations.clone())];
    if n_a > 0 {
        species.push(Species::new("A", n_a, vec![0, 1]));
    }
    let basis = Arc::new(SymmetricBasis::new(species, k)?);
    let c = el.c_level;
    let ell = &el.lowering;
    let ell_dag = ell.adjoint();
    let half = C64::new(-0.5, 0.0);

    let absorb_jump = |asm: &mut TermAssembler| {
        asm.one_body(0, &jump_map(ell));
        asm.pair_same(0, &left_map(ell), &right_map(&ell_dag));
    };
    let shelve_jump = |asm: &mut TermAssembler| {
        for s in &el.shelves {
            asm.one_body(0, &jump_map(s));
        }
    };
    let y_d = local_transition(el.dim, 0, c, params.k_a);
    let y_a = local_transition(2, 1, 0, 1.0);
    let transfer_jump = |asm: &mut TermAssembler| {
        asm.pair_cross(0, &jump_map(&y_d), 1, &jump_map(&y_a));
    };
    let (reset_species, reset_op, amp_op) = if n_a == 0 {
        (0, local_transition(el.dim, 0, c, params.delta.sqrt()), local_transition(el.dim, c, c, 1.0))
    } else {
        (1, local_transition(2, 0, 1, params.delta.sqrt()), local_transition(2, 1, 1, 1.0))
    };
    let amp_scaled = amp_op.scale(C64::new((2.0 * params.k).sqrt() * params.chi, 0.0));

    let mut asm = TermAssembler::new(&basis);
    asm.one_body(0, &hamiltonian_map(&el.hamiltonian));
    for s in &el.shelves {
        asm.one_body(0, &dissipator_map(s));
    }
    asm.one_body(0, &dissipator_map(ell));
    asm.pair_same(0, &left_map(ell), &right_map(&ell_dag));
    asm.pair_same(0, &scale_map(&left_map(&ell_dag), half), &left_map(ell));
    asm.pair_same(0, &scale_map(&right_map(&ell_dag), half), &right_map(ell));
    if n_a > 0 {
        let pd = y_d.adjoint().matmul(&y_d);
        let pa = y_a.adjoint().matmul(&y_a);
        transfer_jump(&mut asm);
        asm.pair_cross(0, &scale_map(&left_map(&pd), half), 1, &left_map(&pa));
        asm.pair_cross(0, &scale_map(&right_map(&pd), half), 1, &right_map(&pa));
    }
    asm.one_body(reset_species, &dissipator_map(&reset_op));
    asm.one_body(reset_species, &dissipator_map(&amp_scaled));
    let generator = asm.finish();

    let build = |f: &dyn Fn(&mut TermAssembler)| {
        let mut a = TermAssembler::new(&basis);
        f(&mut a);
        a.finish()
    };
    let mut channels = vec![
        Channel { tag: SHELVE.into(), jump: build(&shelve_jump) },
        Channel { tag: ABSORB.into(), jump: build(&absorb_jump) },
    ];
    if n_a > 0 {
        channels.push(Channel { tag: TRANSFER.into(), jump: build(&transfer_jump) });
    }
    channels.push(Channel { tag: RESET.into(), jump: build(&|a| a.one_body(reset_species, &jump_map(&reset_op))) });
    channels.push(Channel { tag: AMP.into(), jump: build(&|a| a.one_body(reset_species, &jump_map(&amp_scaled))) });

    let sub = |x: &LocalMap, y: &LocalMap| {
        let mut m = x.clone();
        m.extend(scale_map(y, C64::new(-1.0, 0.0)));
        m
    };
    let raise = build(&|a| a.one_body(0, &sub(&right_map(&ell_dag), &left_map(&ell_dag))));
    let lower = build(&|a| a.one_body(0, &sub(&left_map(ell), &right_map(ell))));

    let monitored_level = if n_a == 0 { c } else { 1 };
    let expectation = basis.population_functional(|occ| params.chi * occ[reset_species][monitored_level] as f64);
    let amp_channels = vec![AmpChannel { tag: AMP.into(), k: params.k, chi: params.chi, measure: None, expectation }];
    let liou = Liouvillian::from_symmetric(
        basis.clone(),
        generator,
        channels,
        amp_channels,
        Some(FieldSuperops { raise, lower }),
    );
    Ok((liou, Monitor::Symmetric { species: reset_species, level: monitored_level }))
}
