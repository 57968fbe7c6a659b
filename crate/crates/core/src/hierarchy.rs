//! Ensemble-averaged hierarchy of auxiliary matrices for Fock-state inputs.
//!
//! ```text
//! dϱ^{n,m}/dt = 𝓛ϱ^{n,m} + √n E(t) [ϱ^{n−1,m}, L†] + √m E(t) [L, ϱ^{n,m−1}]
//! ϱ^{n,n}(t₀) = ρ₀,   ϱ^{n,m}(t₀) = 0 for n ≠ m
//! ρ_matter(t) = Σ c_{n,m} ϱ^{n,m}(t)
//! ```
//!
//! Member `(n, m)` is supported on basis elements whose ket carries at most
//! `n + e₀` excitations and whose bra at most `m + e₀`, where `e₀` is the
//! largest excitation present in `ρ₀`. Each member is stored on that support
//! only, which is exact because no generator term raises excitation.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegrationStats, IntegratorOptions, LinearSystem};
use crate::liouvillian::{Dynamics, LiouvilleBasis, Liouvillian, LiouvillianParts};
use crate::pulse::{FieldInput, PulseEnvelope};
use crate::sparse::CsrMatrix;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Snapshot of every auxiliary matrix at one time, each on the full basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyState {
    pub n_max: usize,
    pub t: f64,
    /// `members[n][m]` is the vectorized `ϱ^{n,m}`.
    pub members: Vec<Vec<Vec<C64>>>,
}

impl HierarchyState {
    pub fn member(&self, n: usize, m: usize) -> &[C64] {
        &self.members[n][m]
    }
}

/// `ρ_matter = Σ c_{n,m} ϱ^{n,m}`.
pub fn reduced_matter_state(h: &HierarchyState, field: &FieldInput) -> Result<Vec<C64>> {
    if field.n_max() != h.n_max {
        return Err(Error::DimensionMismatch { expected: h.n_max, found: field.n_max() });
    }
    let dim = h.members[0][0].len();
    let mut out = vec![ZERO; dim];
    for (n, row) in field.coefficients.iter().enumerate() {
        for (m, c) in row.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(&h.members[n][m]) {
                *o += c * x;
            }
        }
    }
    Ok(out)
}

pub(crate) struct Member {
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) idx: Vec<usize>,
    pub(crate) offset: usize,
    generator: CsrMatrix,
    raise: Option<(usize, CsrMatrix)>,
    lower: Option<(usize, CsrMatrix)>,
}

pub(crate) struct HierarchySystem<'a> {
    pub(crate) members: Vec<Member>,
    envelope: &'a PulseEnvelope,
    len: usize,
    field_window: (f64, f64),
    /// Members left unchanged once the pulse has passed.
    frozen: Vec<bool>,
}

/// Functional on `ρ_matter` expressed through the stacked member vector:
/// `(offset, restricted weights, c_{n,m})` per contributing member.
pub(crate) type Plan = Vec<(usize, Vec<C64>, C64)>;

pub(crate) fn eval_plan(plan: &Plan, y: &[C64]) -> C64 {
    let mut acc = ZERO;
    for (off, w, c) in plan {
        let s: C64 = w.iter().zip(&y[*off..*off + w.len()]).map(|(a, b)| a * b).sum();
        acc += c * s;
    }
    acc
}

impl HierarchySystem<'_> {
    /// Stops evolving, after the pulse, every member that does not enter
    /// `ρ_matter`. Once the field is off the members decouple, so the
    /// reduced state is unaffected.
    pub(crate) fn freeze_spent_members(&mut self, field: &FieldInput) {
        self.frozen = self.members.iter().map(|m| field.coefficients[m.n][m.m].norm() == 0.0).collect();
    }

    pub(crate) fn plan(&self, w: &[C64], field: &FieldInput) -> Plan {
        self.members
            .iter()
            .filter_map(|mem| {
                let c = field.coefficients[mem.n][mem.m];
                (c.norm() != 0.0).then(|| (mem.offset, mem.idx.iter().map(|&i| w[i]).collect(), c))
            })
            .collect()
    }
}

/// Stacked hierarchy for `field` with initial member vector.
pub(crate) struct Assembly<'a> {
    pub(crate) sys: HierarchySystem<'a>,
    pub(crate) y0: Vec<C64>,
    pub(crate) n_max: usize,
    pub(crate) dim: usize,
    /// Lifted initial state.
    pub(crate) rho0: Vec<C64>,
}

pub(crate) fn assemble<'a, D: Dynamics + ?Sized>(dynamics: &D, field: &'a FieldInput, rho0: &[C64]) -> Result<Assembly<'a>> {
    field.validate()?;
    let rho0 = dynamics.lift_state(rho0);
    let dim = dynamics.dim();
    if rho0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho0.len() });
    }
    let n_max = field.n_max();
    if n_max > 0 && dynamics.field().is_none() {
        return Err(Error::invalid("photon input needs a field-coupling operator"));
    }

    let ket = dynamics.ket_excitation();
    let bra = dynamics.bra_excitation();
    let e0 = rho0
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() != 0.0)
        .map(|(i, _)| ket[i].max(bra[i]))
        .max()
        .unwrap_or(0) as usize;

    let id = |n: usize, m: usize| n * (n_max + 1) + m;
    let mut members: Vec<Member> = Vec::with_capacity((n_max + 1).pow(2));
    let mut offset = 0;
    for n in 0..=n_max {
        for m in 0..=n_max {
            let idx: Vec<usize> =
                (0..dim).filter(|&i| ket[i] as usize <= n + e0 && bra[i] as usize <= m + e0).collect();
            let generator = dynamics.generator().restrict(&idx, &idx);
            members.push(Member { n, m, idx, offset, generator, raise: None, lower: None });
            offset += members.last().unwrap().idx.len();
        }
    }
    if let Some(f) = dynamics.field() {
        for n in 0..=n_max {
            for m in 0..=n_max {
                let me = id(n, m);
                if n > 0 {
                    let src = id(n - 1, m);
                    let r = f.raise.restrict(&members[me].idx, &members[src].idx);
                    members[me].raise = Some((src, r));
                }
                if m > 0 {
                    let src = id(n, m - 1);
                    let l = f.lower.restrict(&members[me].idx, &members[src].idx);
                    members[me].lower = Some((src, l));
                }
            }
        }
    }

    let mut y0 = vec![ZERO; offset];
    for n in 0..=n_max {
        let mem = &members[id(n, n)];
        for (k, &i) in mem.idx.iter().enumerate() {
            y0[mem.offset + k] = rho0[i];
        }
    }
    let env = &field.envelope;
    let field_window = env.support();
    let frozen = vec![false; members.len()];
    Ok(Assembly { sys: HierarchySystem { envelope: env, len: offset, field_window, members, frozen }, y0, n_max, dim, rho0 })
}

impl LinearSystem for HierarchySystem<'_> {
    fn dim(&self) -> usize {
        self.len
    }

    fn apply(&self, t: f64, y: &[C64], out: &mut [C64]) {
        let e = if t >= self.field_window.0 && t <= self.field_window.1 { self.envelope.amplitude(t) } else { 0.0 };
        let mut slices = Vec::with_capacity(self.members.len());
        let mut rest = out;
        for mem in &self.members {
            let (head, tail) = rest.split_at_mut(mem.idx.len());
            slices.push(head);
            rest = tail;
        }
        let spent = t > self.field_window.1;
        let work = |((mem, frozen), o): ((&Member, &bool), &mut &mut [C64])| {
            o.iter_mut().for_each(|v| *v = ZERO);
            if spent && *frozen {
                return;
            }
            let x = &y[mem.offset..mem.offset + mem.idx.len()];
            mem.generator.mul_vec_acc(C64::new(1.0, 0.0), x, o);
            if e != 0.0 {
                if let Some((src, r)) = &mem.raise {
                    let s = &self.members[*src];
                    let xs = &y[s.offset..s.offset + s.idx.len()];
                    r.mul_vec_acc(C64::new((mem.n as f64).sqrt() * e, 0.0), xs, o);
                }
                if let Some((src, l)) = &mem.lower {
                    let s = &self.members[*src];
                    let xs = &y[s.offset..s.offset + s.idx.len()];
                    l.mul_vec_acc(C64::new((mem.m as f64).sqrt() * e, 0.0), xs, o);
                }
            }
        };
        if self.len > 20_000 {
            self.members.par_iter().zip(self.frozen.par_iter()).zip(slices.par_iter_mut()).for_each(work);
        } else {
            self.members.iter().zip(&self.frozen).zip(slices.iter_mut()).for_each(work);
        }
    }
}

/// Result of a hierarchy integration.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct HierarchyRun {
    pub times: Vec<f64>,
    /// `values[k][i]`: real part of functional `k` on `ρ_matter(times[i])`.
    pub values: Vec<Vec<f64>>,
    /// Largest `|Tr ϱ^{n,n} − Tr ρ₀|` seen over members and output times.
    pub max_trace_deviation: f64,
    pub stats: IntegrationStats,
    /// Full snapshots, when requested.
    #[serde(skip)]
    pub states: Vec<HierarchyState>,
    pub member_dims: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct HierarchyOptions {
    pub integrator: IntegratorOptions,
    pub keep_states: bool,
    /// Freeze members that no longer influence the reduced state once the
    /// pulse has passed. Snapshots of those members then stop updating.
    pub freeze_after_pulse: bool,
}

impl From<IntegratorOptions> for HierarchyOptions {
    fn from(integrator: IntegratorOptions) -> Self {
        Self { integrator, keep_states: false, freeze_after_pulse: false }
    }
}

/// Integrates the hierarchy for `field` starting from `rho0` (a state of the
/// plain Liouvillian underlying `dynamics`), evaluating each functional on
/// the reduced matter state at every time. Functionals live on the basis of
/// `dynamics`; use [`Dynamics::lift_functional`] to extend plain ones.
pub fn integrate_hierarchy<D: Dynamics + ?Sized>(
    dynamics: &D,
    field: &FieldInput,
    rho0: &[C64],
    times: &[f64],
    functionals: &[Vec<C64>],
    opts: &HierarchyOptions,
) -> Result<HierarchyRun> {
    let Assembly { mut sys, y0, n_max, dim, rho0 } = assemble(dynamics, field, rho0)?;
    if opts.freeze_after_pulse {
        sys.freeze_spent_members(field);
    }
    if let Some(w) = functionals.iter().find(|w| w.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: w.len() });
    }
    let trace = dynamics.trace_functional();
    let tr0: C64 = trace.iter().zip(&rho0).map(|(a, b)| a * b).sum();
    let member_dims: Vec<usize> = sys.members.iter().map(|m| m.idx.len()).collect();
    let plans: Vec<Plan> = functionals.iter().map(|w| sys.plan(w, field)).collect();
    let diag_traces: Vec<(usize, Vec<C64>)> = sys
        .members
        .iter()
        .filter(|m| m.n == m.m)
        .map(|m| (m.offset, m.idx.iter().map(|&i| trace[i]).collect()))
        .collect();

    let mut run = HierarchyRun {
        times: times.to_vec(),
        values: vec![Vec::with_capacity(times.len()); functionals.len()],
        member_dims,
        ..Default::default()
    };
    let mut max_dev: f64 = 0.0;
    let mut states = Vec::new();
    let stats = integrate(&sys, y0, times, &opts.integrator, |_, t, y| {
        for (k, plan) in plans.iter().enumerate() {
            run.values[k].push(eval_plan(plan, y).re);
        }
        for (off, w) in &diag_traces {
            let s: C64 = w.iter().zip(&y[*off..*off + w.len()]).map(|(a, b)| a * b).sum();
            max_dev = max_dev.max((s - tr0).norm());
        }
        if opts.keep_states {
            let mut grid = vec![vec![Vec::new(); n_max + 1]; n_max + 1];
            for mem in &sys.members {
                let mut full = vec![ZERO; dim];
                for (k, &i) in mem.idx.iter().enumerate() {
                    full[i] = y[mem.offset + k];
                }
                grid[mem.n][mem.m] = full;
            }
            states.push(HierarchyState { n_max, t, members: grid });
        }
        Ok(())
    })?;
    run.stats = stats;
    run.max_trace_deviation = max_dev;
    run.states = states;
    Ok(run)
}

/// Plain Lindblad evolution of `rho0`, returning the state at each time.
pub fn evolve_lindblad<D: Dynamics + ?Sized>(
    dynamics: &D,
    rho0: &[C64],
    times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<Vec<C64>>> {
    struct Plain<'a>(&'a CsrMatrix);
    impl LinearSystem for Plain<'_> {
        fn dim(&self) -> usize {
            self.0.rows()
        }
        fn apply(&self, _t: f64, y: &[C64], out: &mut [C64]) {
            out.iter_mut().for_each(|v| *v = ZERO);
            self.0.mul_vec_acc(C64::new(1.0, 0.0), y, out);
        }
    }
    let mut out = Vec::with_capacity(times.len());
    integrate(&Plain(dynamics.generator()), dynamics.lift_state(rho0), times, opts, |_, _, y| {
        out.push(y.to_vec());
        Ok(())
    })?;
    Ok(out)
}

/// Restricts a vectorized Liouvillian to states with at most `n_max` total
/// excitations. Exact when no channel raises excitation.
pub fn truncate_by_excitation(liou: &Liouvillian, n_max: u32) -> Result<Liouvillian> {
    let LiouvilleBasis::Vectorized { states, .. } = liou.basis() else {
        return Err(Error::invalid("excitation truncation applies to vectorized bases"));
    };
    let parts = liou.parts().ok_or_else(|| Error::invalid("Liouvillian has no source operators"))?;
    restrict_parts(parts, states, n_max)
}

/// Builds the excitation-truncated generator directly from operators,
/// without assembling the full space first.
pub fn truncate_parts(parts: &LiouvillianParts, n_max: u32) -> Result<Liouvillian> {
    let all: Vec<usize> = (0..parts.hamiltonian.dim()).collect();
    restrict_parts(parts, &all, n_max)
}

fn restrict_parts(parts: &LiouvillianParts, states: &[usize], n_max: u32) -> Result<Liouvillian> {
    let space = parts.hamiltonian.space();
    let raises = |m: &CsrMatrix| m.iter().any(|(r, c, _)| space.excitation(r) > space.excitation(c));
    if raises(parts.hamiltonian.matrix()) {
        return Err(Error::ExcitationRaising("hamiltonian".into()));
    }
    for (tag, y) in &parts.baths {
        if raises(y.matrix()) {
            return Err(Error::ExcitationRaising(tag.clone()));
        }
    }
    for a in &parts.amps {
        if raises(a.x.matrix()) {
            return Err(Error::ExcitationRaising(a.tag.clone()));
        }
    }
    if let Some((tag, l)) = &parts.field {
        if raises(l.matrix()) {
            return Err(Error::ExcitationRaising(tag.clone()));
        }
    }
    let kept: Vec<usize> = states.iter().copied().filter(|&s| space.excitation(s) <= n_max).collect();
    Liouvillian::assemble_on(parts.clone(), kept)
}
