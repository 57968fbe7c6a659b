//! Permutation-invariant operator basis for ensembles of identical subsystems.
//!
//! Each species (e.g. donors, acceptors) consists of `count` identical
//! subsystems of local dimension `d`. A basis element is labeled by a *type*:
//! for every species, how many of its members carry each local matrix unit
//! `|a⟩⟨b|`. The element itself is the average over all assignments of units
//! to members consistent with the type, so for population types its
//! coefficient is directly the probability of that occupation pattern.
//!
//! A symmetric `k`-body superoperator maps the element of type `t` onto
//! elements of the types reachable by changing `k` units, with a coefficient
//! equal to the local amplitude times the number of ways of choosing the
//! acting members in `t`. This is exact; no collective-occupation
//! approximation is made, so coherence between members is retained.

use std::collections::HashMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct Species {
    pub label: String,
    pub count: usize,
    pub dim: usize,
    pub excitations: Vec<u32>,
}

impl Species {
    pub fn new(label: impl Into<String>, count: usize, excitations: Vec<u32>) -> Self {
        Self { label: label.into(), count, dim: excitations.len(), excitations }
    }

    fn units(&self) -> usize {
        self.dim * self.dim
    }
}

#[derive(Clone, Debug)]
pub struct SymmetricBasis {
    species: Vec<Species>,
    unit_offsets: Vec<usize>,
    types: Vec<Vec<u16>>,
    lookup: HashMap<Vec<u16>, usize>,
    max_excitation: u32,
}

/// `(target unit, source unit, amplitude)` triples of a map on local units.
pub type LocalMap = Vec<(usize, usize, C64)>;

impl SymmetricBasis {
    /// All types whose ket and bra excitation are each at most `max_excitation`.
    pub fn new(species: Vec<Species>, max_excitation: u32) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::EmptySpace);
        }
        for s in &species {
            if s.dim == 0 {
                return Err(Error::ZeroDimension(s.label.clone()));
            }
            if s.count > u16::MAX as usize {
                return Err(Error::invalid(format!("species `{}` too large", s.label)));
            }
        }
        let mut unit_offsets = Vec::with_capacity(species.len());
        let mut off = 0;
        for s in &species {
            unit_offsets.push(off);
            off += s.units();
        }
        let per_species: Vec<Vec<(Vec<u16>, u32, u32)>> =
            species.iter().map(|s| enumerate_species(s, max_excitation)).collect();
        let mut types = Vec::new();
        let mut current = Vec::with_capacity(off);
        combine(&per_species, 0, 0, 0, max_excitation, &mut current, &mut types);
        let lookup = types.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { species, unit_offsets, types, lookup, max_excitation })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn max_excitation(&self) -> u32 {
        self.max_excitation
    }

    pub fn species_index(&self, label: &str) -> Result<usize> {
        self.species.iter().position(|s| s.label == label).ok_or_else(|| Error::UnknownLabel(label.into()))
    }

    pub fn type_of(&self, index: usize) -> &[u16] {
        &self.types[index]
    }

    pub fn index_of(&self, t: &[u16]) -> Option<usize> {
        self.lookup.get(t).copied()
    }

    fn unit_exc(&self, t: &[u16], ket: bool) -> u32 {
        let mut e = 0;
        for (s, sp) in self.species.iter().enumerate() {
            let d = sp.dim;
            for u in 0..sp.units() {
                let c = t[self.unit_offsets[s] + u] as u32;
                if c > 0 {
                    let lvl = if ket { u / d } else { u % d };
                    e += c * sp.excitations[lvl];
                }
            }
        }
        e
    }

    pub fn ket_excitations(&self) -> Vec<u32> {
        self.types.iter().map(|t| self.unit_exc(t, true)).collect()
    }

    pub fn bra_excitations(&self) -> Vec<u32> {
        self.types.iter().map(|t| self.unit_exc(t, false)).collect()
    }

    fn is_diagonal(&self, t: &[u16]) -> bool {
        self.species.iter().enumerate().all(|(s, sp)| {
            (0..sp.units()).all(|u| t[self.unit_offsets[s] + u] == 0 || u / sp.dim == u % sp.dim)
        })
    }

    pub fn trace_functional(&self) -> Vec<C64> {
        self.types.iter().map(|t| if self.is_diagonal(t) { ONE } else { C64::new(0.0, 0.0) }).collect()
    }

    pub fn adjoint_permutation(&self) -> Vec<usize> {
        self.types
            .iter()
            .map(|t| {
                let mut a = t.clone();
                for (s, sp) in self.species.iter().enumerate() {
                    let d = sp.dim;
                    for u in 0..sp.units() {
                        let (x, y) = (u / d, u % d);
                        a[self.unit_offsets[s] + y * d + x] = t[self.unit_offsets[s] + u];
                    }
                }
                self.lookup[&a]
            })
            .collect()
    }

    /// Per species, per level occupation counts of a population type.
    pub fn level_occupations(&self, index: usize) -> Option<Vec<Vec<usize>>> {
        let t = &self.types[index];
        if !self.is_diagonal(t) {
            return None;
        }
        Some(
            self.species
                .iter()
                .enumerate()
                .map(|(s, sp)| (0..sp.dim).map(|l| t[self.unit_offsets[s] + l * sp.dim + l] as usize).collect())
                .collect(),
        )
    }

    /// Every member of every species in its level 0.
    pub fn ground_state(&self) -> Vec<C64> {
        let mut t = vec![0u16; self.types[0].len()];
        for (s, sp) in self.species.iter().enumerate() {
            t[self.unit_offsets[s]] = sp.count as u16;
        }
        let mut v = vec![C64::new(0.0, 0.0); self.len()];
        v[self.lookup[&t]] = ONE;
        v
    }

    /// Functional `Σ_t w(occupations(t)) x_t` over population types.
    pub fn population_functional(&self, weight: impl Fn(&[Vec<usize>]) -> f64) -> Vec<C64> {
        (0..self.len())
            .map(|i| match self.level_occupations(i) {
                Some(occ) => C64::new(weight(&occ), 0.0),
                None => C64::new(0.0, 0.0),
            })
            .collect()
    }
}

fn enumerate_species(s: &Species, k: u32) -> Vec<(Vec<u16>, u32, u32)> {
    let d = s.dim;
    let units = s.units();
    let mut out = Vec::new();
    let mut counts = vec![0u16; units];
    #[allow(clippy::too_many_arguments)]
    fn rec(
        u: usize,
        remaining: usize,
        ket: u32,
        bra: u32,
        k: u32,
        s: &Species,
        counts: &mut Vec<u16>,
        out: &mut Vec<(Vec<u16>, u32, u32)>,
    ) {
        let d = s.dim;
        if u == counts.len() {
            if remaining == 0 {
                out.push((counts.clone(), ket, bra));
            }
            return;
        }
        let (ek, eb) = (s.excitations[u / d], s.excitations[u % d]);
        let mut max = remaining;
        if ek > 0 {
            max = max.min(((k - ket) / ek) as usize);
        }
        if eb > 0 {
            max = max.min(((k - bra) / eb) as usize);
        }
        for c in (0..=max).rev() {
            counts[u] = c as u16;
            rec(u + 1, remaining - c, ket + c as u32 * ek, bra + c as u32 * eb, k, s, counts, out);
        }
        counts[u] = 0;
    }
    let _ = d;
    rec(0, s.count, 0, 0, k, s, &mut counts, &mut out);
    out
}

fn combine(
    per: &[Vec<(Vec<u16>, u32, u32)>],
    s: usize,
    ket: u32,
    bra: u32,
    k: u32,
    current: &mut Vec<u16>,
    out: &mut Vec<Vec<u16>>,
) {
    if s == per.len() {
        out.push(current.clone());
        return;
    }
    for (c, ek, eb) in &per[s] {
        if ket + ek <= k && bra + eb <= k {
            let len = current.len();
            current.extend_from_slice(c);
            combine(per, s + 1, ket + ek, bra + eb, k, current, out);
            current.truncate(len);
        }
    }
}

/// `|a⟩⟨b| ↦ A|a⟩⟨b|`
pub fn left_map(a: &CsrMatrix) -> LocalMap {
    let d = a.rows();
    a.iter().flat_map(|(r, c, v)| (0..d).map(move |b| (r * d + b, c * d + b, v))).collect()
}

/// `|a⟩⟨b| ↦ |a⟩⟨b|B`
pub fn right_map(bm: &CsrMatrix) -> LocalMap {
    let d = bm.rows();
    bm.iter().flat_map(|(r, c, v)| (0..d).map(move |a| (a * d + c, a * d + r, v))).collect()
}

/// `|a⟩⟨b| ↦ A|a⟩⟨b|A†`
pub fn jump_map(a: &CsrMatrix) -> LocalMap {
    let d = a.rows();
    let mut out = Vec::new();
    for (r1, c1, v1) in a.iter() {
        for (r2, c2, v2) in a.iter() {
            out.push((r1 * d + r2, c1 * d + c2, v1 * v2.conj()));
        }
    }
    out
}

pub fn scale_map(m: &LocalMap, s: C64) -> LocalMap {
    m.iter().map(|&(t, u, v)| (t, u, v * s)).collect()
}

/// Local Lindblad dissipator `𝒟[A]`.
pub fn dissipator_map(a: &CsrMatrix) -> LocalMap {
    let ada = a.adjoint().matmul(a);
    let h = C64::new(-0.5, 0.0);
    let mut m = jump_map(a);
    m.extend(scale_map(&left_map(&ada), h));
    m.extend(scale_map(&right_map(&ada), h));
    m
}

/// `−i[H, ·]` on one member.
pub fn hamiltonian_map(h: &CsrMatrix) -> LocalMap {
    let mi = C64::new(0.0, -1.0);
    let mut m = scale_map(&left_map(h), mi);
    m.extend(scale_map(&right_map(h), -mi));
    m
}

/// Accumulates symmetric superoperators as sparse matrices on the basis.
pub struct TermAssembler<'a> {
    basis: &'a SymmetricBasis,
    triplets: Vec<(usize, usize, C64)>,
}

impl<'a> TermAssembler<'a> {
    pub fn new(basis: &'a SymmetricBasis) -> Self {
        Self { basis, triplets: Vec::new() }
    }

    fn push(&mut self, src: usize, target: &[u16], v: C64) {
        if let Some(&row) = self.basis.lookup.get(target) {
            self.triplets.push((row, src, v));
        }
    }

    /// `Σ_i map_i` over the members of `species`.
    pub fn one_body(&mut self, species: usize, map: &LocalMap) {
        let off = self.basis.unit_offsets[species];
        let mut target = Vec::new();
        for src in 0..self.basis.len() {
            let t = &self.basis.types[src];
            for &(v, u, amp) in map {
                let n = t[off + u];
                if n == 0 {
                    continue;
                }
                target.clear();
                target.extend_from_slice(t);
                target[off + u] -= 1;
                target[off + v] += 1;
                self.push(src, &target.clone(), amp * n as f64);
            }
        }
    }

    /// `Σ_{i≠j} first_i ∘ second_j` over ordered pairs of distinct members.
    pub fn pair_same(&mut self, species: usize, first: &LocalMap, second: &LocalMap) {
        let off = self.basis.unit_offsets[species];
        let mut target = Vec::new();
        for src in 0..self.basis.len() {
            let t = &self.basis.types[src];
            for &(v1, u1, a1) in first {
                let n1 = t[off + u1] as i64;
                if n1 == 0 {
                    continue;
                }
                for &(v2, u2, a2) in second {
                    let n2 = t[off + u2] as i64 - (u1 == u2) as i64;
                    if n2 <= 0 {
                        continue;
                    }
                    target.clear();
                    target.extend_from_slice(t);
                    target[off + u1] -= 1;
                    target[off + u2] -= 1;
                    target[off + v1] += 1;
                    target[off + v2] += 1;
                    self.push(src, &target.clone(), a1 * a2 * (n1 * n2) as f64);
                }
            }
        }
    }

    /// `Σ_{i∈a, j∈b} first_i ∘ second_j` for two different species.
    pub fn pair_cross(&mut self, species_a: usize, first: &LocalMap, species_b: usize, second: &LocalMap) {
        let oa = self.basis.unit_offsets[species_a];
        let ob = self.basis.unit_offsets[species_b];
        let mut target = Vec::new();
        for src in 0..self.basis.len() {
            let t = &self.basis.types[src];
            for &(v1, u1, a1) in first {
                let n1 = t[oa + u1];
                if n1 == 0 {
                    continue;
                }
                for &(v2, u2, a2) in second {
                    let n2 = t[ob + u2];
                    if n2 == 0 {
                        continue;
                    }
                    target.clear();
                    target.extend_from_slice(t);
                    target[oa + u1] -= 1;
                    target[oa + v1] += 1;
                    target[ob + u2] -= 1;
                    target[ob + v2] += 1;
                    self.push(src, &target.clone(), a1 * a2 * (n1 as f64 * n2 as f64));
                }
            }
        }
    }

    pub fn finish(self) -> CsrMatrix {
        let n = self.basis.len();
        CsrMatrix::from_triplets(n, n, self.triplets)
    }
}
