//! Vectorized Lindblad generators.
//!
//! Density matrices are vectorized by stacking columns: `ρ_ab` sits at index
//! `a + b·d`. With that convention `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`, so
//!
//! * `−i[H, ρ]`  → `−i (I ⊗ H − Hᵀ ⊗ I)`
//! * `𝒟[A]ρ`     → `Ā ⊗ A − ½ I ⊗ A†A − ½ (A†A)ᵀ ⊗ I`
//! * jump part   → `Ā ⊗ A`
//!
//! The field coupling operator `L` additionally provides the two hierarchy
//! superoperators `X ↦ [X, L†]` (raise) and `X ↦ [L, X]` (lower).

use std::collections::BTreeSet;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::architecture::symmetric::SymmetricBasis;
use crate::error::{Error, Result};
use crate::operator::OperatorSpec;
use crate::space::HilbertSpace;
use crate::sparse::CsrMatrix;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Left multiplication `ρ ↦ Aρ`.
pub fn left(a: &CsrMatrix) -> CsrMatrix {
    CsrMatrix::identity(a.rows()).kron(a)
}

/// Right multiplication `ρ ↦ ρB`.
pub fn right(b: &CsrMatrix) -> CsrMatrix {
    b.transpose().kron(&CsrMatrix::identity(b.rows()))
}

pub fn commutator_hamiltonian(h: &CsrMatrix) -> CsrMatrix {
    left(h).sub(&right(h)).scale(-I)
}

/// `ρ ↦ AρA†`
pub fn jump(a: &CsrMatrix) -> CsrMatrix {
    a.conj().kron(a)
}

pub fn dissipator(a: &CsrMatrix) -> CsrMatrix {
    let ada = a.adjoint().matmul(a);
    jump(a).sub(&left(&ada).scale(C64::new(0.5, 0.0))).sub(&right(&ada).scale(C64::new(0.5, 0.0)))
}

#[derive(Clone, Debug)]
pub enum LiouvilleBasis {
    /// Vectorized density matrices over the listed composite states of `space`.
    Vectorized { space: Arc<HilbertSpace>, states: Vec<usize> },
    /// Permutation-invariant operator basis of identical subsystems.
    Symmetric(Arc<SymmetricBasis>),
}

#[derive(Clone, Debug)]
pub struct Channel {
    pub tag: String,
    /// Jump part of the dissipator, `ρ ↦ AρA†` in vectorized form.
    pub jump: CsrMatrix,
}

#[derive(Clone, Debug)]
pub struct AmpSpec {
    pub tag: String,
    /// Full measured operator `X̂ = χ x̂`.
    pub x: OperatorSpec,
    pub k: f64,
    pub chi: f64,
}

impl AmpSpec {
    pub fn projector(tag: impl Into<String>, projector: &OperatorSpec, chi: f64, k: f64) -> Self {
        Self { tag: tag.into(), x: projector.scale(chi), k, chi }
    }
}

#[derive(Clone, Debug)]
pub struct AmpChannel {
    pub tag: String,
    pub k: f64,
    pub chi: f64,
    /// `ρ ↦ Xρ + ρX†`, present for vectorized bases.
    pub measure: Option<CsrMatrix>,
    /// Linear functional giving `Tr(Xρ)`.
    pub expectation: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct FieldSuperops {
    /// `X ↦ [X, L†]`
    pub raise: CsrMatrix,
    /// `X ↦ [L, X]`
    pub lower: CsrMatrix,
}

/// The operator content a Liouvillian was assembled from.
#[derive(Clone, Debug)]
pub struct LiouvillianParts {
    pub hamiltonian: OperatorSpec,
    pub baths: Vec<(String, OperatorSpec)>,
    pub field: Option<(String, OperatorSpec)>,
    pub amps: Vec<AmpSpec>,
}

#[derive(Clone, Debug)]
pub struct Liouvillian {
    pub(crate) basis: LiouvilleBasis,
    pub(crate) generator: CsrMatrix,
    pub(crate) channels: Vec<Channel>,
    pub(crate) amp_channels: Vec<AmpChannel>,
    pub(crate) field: Option<FieldSuperops>,
    pub(crate) ket_exc: Vec<u32>,
    pub(crate) bra_exc: Vec<u32>,
    pub(crate) trace: Vec<C64>,
    pub(crate) adjoint_perm: Vec<usize>,
    pub(crate) parts: Option<LiouvillianParts>,
}

/// Common view of a generator used by the integration engines.
pub trait Dynamics: Send + Sync {
    fn dim(&self) -> usize;
    fn generator(&self) -> &CsrMatrix;
    fn field(&self) -> Option<&FieldSuperops>;
    fn ket_excitation(&self) -> &[u32];
    fn bra_excitation(&self) -> &[u32];
    fn trace_functional(&self) -> &[C64];
    /// `(x†)_i = conj(x_{perm[i]})`
    fn adjoint_permutation(&self) -> &[usize];
    /// Embeds a state of the underlying plain Liouvillian.
    fn lift_state(&self, base: &[C64]) -> Vec<C64>;
    /// Extends a functional of the underlying plain Liouvillian.
    fn lift_functional(&self, base: &[C64]) -> Vec<C64>;
}

/// `−i[H,·] + Σ𝒟[Ŷ_i] + 𝒟[L̂] + Σ𝒟[(2k_i)^{1/2} X̂_i]`, with every dissipator
/// recorded as a tagged channel.
pub fn assemble_liouvillian(
    hamiltonian: &OperatorSpec,
    baths: &[(String, OperatorSpec)],
    field: Option<(String, OperatorSpec)>,
    amps: &[AmpSpec],
) -> Result<Liouvillian> {
    let parts = LiouvillianParts {
        hamiltonian: hamiltonian.clone(),
        baths: baths.to_vec(),
        field,
        amps: amps.to_vec(),
    };
    let space = hamiltonian.space().clone();
    let check = |op: &OperatorSpec| -> Result<()> {
        if **op.space() != *space {
            Err(Error::SpaceMismatch)
        } else {
            Ok(())
        }
    };
    parts.baths.iter().try_for_each(|(_, op)| check(op))?;
    if let Some((_, l)) = &parts.field {
        check(l)?;
    }
    parts.amps.iter().try_for_each(|a| check(&a.x))?;
    for a in &parts.amps {
        if a.k < 0.0 {
            return Err(Error::invalid(format!("amplifier `{}` has negative strength", a.tag)));
        }
    }
    let states: Vec<usize> = (0..space.total_dim()).collect();
    Liouvillian::assemble_on(parts, states)
}

impl Liouvillian {
    pub(crate) fn assemble_on(parts: LiouvillianParts, states: Vec<usize>) -> Result<Self> {
        let space = parts.hamiltonian.space().clone();
        let d = states.len();
        let dd = d * d;
        let restrict = |op: &OperatorSpec| op.matrix().restrict(&states, &states);

        let mut terms = vec![commutator_hamiltonian(&restrict(&parts.hamiltonian))];
        let mut channels = Vec::new();
        for (tag, y) in &parts.baths {
            let a = restrict(y);
            terms.push(dissipator(&a));
            channels.push(Channel { tag: tag.clone(), jump: jump(&a) });
        }
        let field = if let Some((tag, l)) = &parts.field {
            let a = restrict(l);
            terms.push(dissipator(&a));
            channels.push(Channel { tag: tag.clone(), jump: jump(&a) });
            let ad = a.adjoint();
            Some(FieldSuperops { raise: right(&ad).sub(&left(&ad)), lower: left(&a).sub(&right(&a)) })
        } else {
            None
        };
        let mut amp_channels = Vec::new();
        for amp in &parts.amps {
            let x = restrict(&amp.x);
            let scaled = x.scale(C64::new((2.0 * amp.k).sqrt(), 0.0));
            terms.push(dissipator(&scaled));
            channels.push(Channel { tag: amp.tag.clone(), jump: jump(&scaled) });
            amp_channels.push(AmpChannel {
                tag: amp.tag.clone(),
                k: amp.k,
                chi: amp.chi,
                measure: Some(left(&x).add(&right(&x.adjoint()))),
                expectation: expectation_vec(&x),
            });
        }
        let generator = CsrMatrix::sum(dd, dd, terms.iter());

        let exc: Vec<u32> = states.iter().map(|&s| space.excitation(s)).collect();
        let mut ket_exc = vec![0; dd];
        let mut bra_exc = vec![0; dd];
        let mut trace = vec![C64::new(0.0, 0.0); dd];
        let mut adjoint_perm = vec![0; dd];
        for b in 0..d {
            for a in 0..d {
                let k = a + b * d;
                ket_exc[k] = exc[a];
                bra_exc[k] = exc[b];
                adjoint_perm[k] = b + a * d;
            }
            trace[b + b * d] = ONE;
        }
        Ok(Self {
            basis: LiouvilleBasis::Vectorized { space, states },
            generator,
            channels,
            amp_channels,
            field,
            ket_exc,
            bra_exc,
            trace,
            adjoint_perm,
            parts: Some(parts),
        })
    }

    /// Generator on a permutation-invariant basis, assembled by the symmetric
    /// builder.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_symmetric(
        basis: Arc<SymmetricBasis>,
        generator: CsrMatrix,
        channels: Vec<Channel>,
        amp_channels: Vec<AmpChannel>,
        field: Option<FieldSuperops>,
    ) -> Self {
        let ket_exc = basis.ket_excitations();
        let bra_exc = basis.bra_excitations();
        let trace = basis.trace_functional();
        let adjoint_perm = basis.adjoint_permutation();
        Self {
            basis: LiouvilleBasis::Symmetric(basis),
            generator,
            channels,
            amp_channels,
            field,
            ket_exc,
            bra_exc,
            trace,
            adjoint_perm,
            parts: None,
        }
    }

    pub fn basis(&self) -> &LiouvilleBasis {
        &self.basis
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn amp_channels(&self) -> &[AmpChannel] {
        &self.amp_channels
    }

    pub fn parts(&self) -> Option<&LiouvillianParts> {
        self.parts.as_ref()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.channels.iter().any(|c| c.tag == tag)
    }

    /// Side length of the density matrix (vectorized) or number of basis types.
    pub fn state_dim(&self) -> usize {
        match &self.basis {
            LiouvilleBasis::Vectorized { states, .. } => states.len(),
            LiouvilleBasis::Symmetric(b) => b.len(),
        }
    }

    fn vectorized(&self) -> Result<(&Arc<HilbertSpace>, &[usize])> {
        match &self.basis {
            LiouvilleBasis::Vectorized { space, states } => Ok((space, states)),
            LiouvilleBasis::Symmetric(_) => Err(Error::invalid("operation needs a vectorized basis")),
        }
    }

    /// `|s⟩⟨s|` for a composite state index.
    pub fn pure_state(&self, composite: usize) -> Result<Vec<C64>> {
        let (_, states) = self.vectorized()?;
        let d = states.len();
        let a = states
            .iter()
            .position(|&s| s == composite)
            .ok_or_else(|| Error::invalid(format!("state {composite} not in basis")))?;
        let mut v = vec![C64::new(0.0, 0.0); d * d];
        v[a + a * d] = ONE;
        Ok(v)
    }

    /// All subsystems in their level 0 (all donors/acceptors in ground state).
    pub fn ground_state(&self) -> Vec<C64> {
        match &self.basis {
            LiouvilleBasis::Vectorized { .. } => self.pure_state(0).expect("ground state kept by every truncation"),
            LiouvilleBasis::Symmetric(b) => b.ground_state(),
        }
    }

    /// Vectorizes a full-space density matrix onto the basis.
    pub fn density_vector(&self, rho: &CsrMatrix) -> Result<Vec<C64>> {
        let (_, states) = self.vectorized()?;
        let r = rho.restrict(states, states);
        let d = states.len();
        let mut v = vec![C64::new(0.0, 0.0); d * d];
        for (a, b, x) in r.iter() {
            v[a + b * d] = x;
        }
        Ok(v)
    }

    /// Unvectorizes onto the kept states (row-major `d × d`).
    pub fn density_matrix(&self, v: &[C64]) -> Result<Vec<Vec<C64>>> {
        let (_, states) = self.vectorized()?;
        let d = states.len();
        Ok((0..d).map(|a| (0..d).map(|b| v[a + b * d]).collect()).collect())
    }

    pub fn expectation_functional(&self, op: &OperatorSpec) -> Result<Vec<C64>> {
        let (_, states) = self.vectorized()?;
        Ok(expectation_vec(&op.matrix().restrict(states, states)))
    }

    /// Functional summing populations of composite states matching `pred`.
    pub fn population_functional(&self, pred: impl Fn(usize) -> bool) -> Result<Vec<C64>> {
        self.population_functional_weighted(|s| if pred(s) { 1.0 } else { 0.0 })
    }

    /// Functional `Σ_s w(s) ρ_ss` over kept composite states.
    pub fn population_functional_weighted(&self, weight: impl Fn(usize) -> f64) -> Result<Vec<C64>> {
        let (_, states) = self.vectorized()?;
        let d = states.len();
        let mut w = vec![C64::new(0.0, 0.0); d * d];
        for (a, &s) in states.iter().enumerate() {
            w[a + a * d] = C64::new(weight(s), 0.0);
        }
        Ok(w)
    }

    /// Kept composite state indices (vectorized bases).
    pub fn kept_states(&self) -> Option<&[usize]> {
        match &self.basis {
            LiouvilleBasis::Vectorized { states, .. } => Some(states),
            LiouvilleBasis::Symmetric(_) => None,
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.generator.mul_vec(x)
    }
}

/// `w` such that `Σ w_k x_k = Tr(O ρ)`.
fn expectation_vec(o: &CsrMatrix) -> Vec<C64> {
    let d = o.rows();
    let mut w = vec![C64::new(0.0, 0.0); d * d];
    for (b, a, v) in o.iter() {
        w[a + b * d] = v;
    }
    w
}

pub fn apply_functional(w: &[C64], x: &[C64]) -> C64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl Dynamics for Liouvillian {
    fn dim(&self) -> usize {
        self.generator.rows()
    }
    fn generator(&self) -> &CsrMatrix {
        &self.generator
    }
    fn field(&self) -> Option<&FieldSuperops> {
        self.field.as_ref()
    }
    fn ket_excitation(&self) -> &[u32] {
        &self.ket_exc
    }
    fn bra_excitation(&self) -> &[u32] {
        &self.bra_exc
    }
    fn trace_functional(&self) -> &[C64] {
        &self.trace
    }
    fn adjoint_permutation(&self) -> &[usize] {
        &self.adjoint_perm
    }
    fn lift_state(&self, base: &[C64]) -> Vec<C64> {
        base.to_vec()
    }
    fn lift_functional(&self, base: &[C64]) -> Vec<C64> {
        base.to_vec()
    }
}

/// Generator resolved by the number of jumps in a set of counted channels.
///
/// Sector `n` holds the part of the state in which exactly `n` counted jumps
/// have occurred; the last sector collects everything from `max_count` on.
#[derive(Clone, Debug)]
pub struct CountingLiouvillian {
    base: Liouvillian,
    counted_tags: BTreeSet<String>,
    max_count: usize,
    generator: CsrMatrix,
    field: Option<FieldSuperops>,
    ket_exc: Vec<u32>,
    bra_exc: Vec<u32>,
    trace: Vec<C64>,
    adjoint_perm: Vec<usize>,
}

pub fn counting_resolve(liou: &Liouvillian, counted_tags: &[&str], max_count: usize) -> Result<CountingLiouvillian> {
    if max_count < 1 {
        return Err(Error::invalid("max_count must be at least 1"));
    }
    for tag in counted_tags {
        if !liou.has_tag(tag) {
            return Err(Error::TagNotFound(tag.to_string()));
        }
    }
    let tags: BTreeSet<String> = counted_tags.iter().map(|s| s.to_string()).collect();
    let n = liou.dim();
    let counted = CsrMatrix::sum(n, n, liou.channels.iter().filter(|c| tags.contains(&c.tag)).map(|c| &c.jump));
    let sectors = max_count + 1;
    let mut trip = Vec::new();
    for s in 0..sectors {
        let off = s * n;
        for (r, c, v) in liou.generator.iter() {
            trip.push((off + r, off + c, v));
        }
        if s < max_count {
            for (r, c, v) in counted.iter() {
                trip.push((off + r, off + c, -v));
                trip.push((off + n + r, off + c, v));
            }
        }
    }
    let generator = CsrMatrix::from_triplets(sectors * n, sectors * n, trip);
    let block_diag = |m: &CsrMatrix| {
        CsrMatrix::from_triplets(
            sectors * n,
            sectors * n,
            (0..sectors).flat_map(|s| m.iter().map(move |(r, c, v)| (s * n + r, s * n + c, v))),
        )
    };
    let field = liou.field.as_ref().map(|f| FieldSuperops { raise: block_diag(&f.raise), lower: block_diag(&f.lower) });
    let repeat = |v: &[u32]| (0..sectors).flat_map(|_| v.iter().copied()).collect::<Vec<_>>();
    Ok(CountingLiouvillian {
        ket_exc: repeat(&liou.ket_exc),
        bra_exc: repeat(&liou.bra_exc),
        trace: (0..sectors).flat_map(|_| liou.trace.iter().copied()).collect(),
        adjoint_perm: (0..sectors).flat_map(|s| liou.adjoint_perm.iter().map(move |&p| p + s * n)).collect(),
        base: liou.clone(),
        counted_tags: tags,
        max_count,
        generator,
        field,
    })
}

impl CountingLiouvillian {
    pub fn base(&self) -> &Liouvillian {
        &self.base
    }

    pub fn max_count(&self) -> usize {
        self.max_count
    }

    pub fn counted_tags(&self) -> &BTreeSet<String> {
        &self.counted_tags
    }

    pub fn sectors(&self) -> usize {
        self.max_count + 1
    }

    /// Trace restricted to sector `s`: `P(count = s)` (or `≥ s` for the last).
    pub fn sector_functional(&self, s: usize) -> Vec<C64> {
        let n = self.base.dim();
        let mut w = vec![C64::new(0.0, 0.0); self.dim()];
        w[s * n..(s + 1) * n].copy_from_slice(&self.base.trace);
        w
    }

    /// `P(count ≥ s)`.
    pub fn at_least_functional(&self, s: usize) -> Vec<C64> {
        let n = self.base.dim();
        let mut w = vec![C64::new(0.0, 0.0); self.dim()];
        for k in s.min(self.sectors())..self.sectors() {
            w[k * n..(k + 1) * n].copy_from_slice(&self.base.trace);
        }
        w
    }

    /// Sector `s` part of a resolved state.
    pub fn sector<'a>(&self, x: &'a [C64], s: usize) -> &'a [C64] {
        let n = self.base.dim();
        &x[s * n..(s + 1) * n]
    }

    /// Sum over sectors, giving the unresolved state.
    pub fn collapse(&self, x: &[C64]) -> Vec<C64> {
        let n = self.base.dim();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for s in 0..self.sectors() {
            for (o, v) in out.iter_mut().zip(&x[s * n..(s + 1) * n]) {
                *o += v;
            }
        }
        out
    }
}

impl Dynamics for CountingLiouvillian {
    fn dim(&self) -> usize {
        self.generator.rows()
    }
    fn generator(&self) -> &CsrMatrix {
        &self.generator
    }
    fn field(&self) -> Option<&FieldSuperops> {
        self.field.as_ref()
    }
    fn ket_excitation(&self) -> &[u32] {
        &self.ket_exc
    }
    fn bra_excitation(&self) -> &[u32] {
        &self.bra_exc
    }
    fn trace_functional(&self) -> &[C64] {
        &self.trace
    }
    fn adjoint_permutation(&self) -> &[usize] {
        &self.adjoint_perm
    }
    fn lift_state(&self, base: &[C64]) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[..base.len()].copy_from_slice(base);
        v
    }
    fn lift_functional(&self, base: &[C64]) -> Vec<C64> {
        (0..self.sectors()).flat_map(|_| base.iter().copied()).collect()
    }
}
