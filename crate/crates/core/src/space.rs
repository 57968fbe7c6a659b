//! Labeled tensor-product Hilbert spaces.
//!
//! Subsystems are ordered; the composite index places the first subsystem in
//! the most significant position, matching `A ⊗ B ⊗ …` Kronecker order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPACE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub label: String,
    pub dim: usize,
    /// One label per level; generated as `0..dim` when empty.
    #[serde(default)]
    pub state_labels: Vec<String>,
    /// Excitation number carried by each level; all zero when empty.
    #[serde(default)]
    pub excitations: Vec<u32>,
}

impl SubsystemSpec {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Self { label: label.into(), dim, state_labels: Vec::new(), excitations: Vec::new() }
    }

    pub fn with_states<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Self {
        self.state_labels = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_excitations(mut self, exc: impl IntoIterator<Item = u32>) -> Self {
        self.excitations = exc.into_iter().collect();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpace {
    pub schema_version: u32,
    subsystems: Vec<SubsystemSpec>,
    total_dim: usize,
}

pub fn build_space(specs: Vec<SubsystemSpec>) -> Result<HilbertSpace> {
    if specs.is_empty() {
        return Err(Error::EmptySpace);
    }
    let mut seen = std::collections::HashSet::new();
    let mut subsystems = Vec::with_capacity(specs.len());
    for mut s in specs {
        if s.dim == 0 {
            return Err(Error::ZeroDimension(s.label));
        }
        if !seen.insert(s.label.clone()) {
            return Err(Error::DuplicateLabel(s.label));
        }
        if s.state_labels.is_empty() {
            s.state_labels = (0..s.dim).map(|i| i.to_string()).collect();
        } else if s.state_labels.len() != s.dim {
            return Err(Error::DimensionMismatch { expected: s.dim, found: s.state_labels.len() });
        }
        if s.excitations.is_empty() {
            s.excitations = vec![0; s.dim];
        } else if s.excitations.len() != s.dim {
            return Err(Error::DimensionMismatch { expected: s.dim, found: s.excitations.len() });
        }
        subsystems.push(s);
    }
    let total_dim = subsystems.iter().map(|s| s.dim).product();
    Ok(HilbertSpace { schema_version: SPACE_SCHEMA_VERSION, subsystems, total_dim })
}

impl HilbertSpace {
    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.subsystems
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn subsystem(&self, label: &str) -> Result<&SubsystemSpec> {
        Ok(&self.subsystems[self.position(label)?])
    }

    /// Stride of subsystem `pos` in the composite index.
    pub fn stride(&self, pos: usize) -> usize {
        self.subsystems[pos + 1..].iter().map(|s| s.dim).product()
    }

    /// Per-subsystem level indices of a composite index.
    pub fn decompose(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.subsystems.len()];
        for (k, s) in self.subsystems.iter().enumerate().rev() {
            out[k] = index % s.dim;
            index /= s.dim;
        }
        out
    }

    pub fn compose(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.subsystems.len() {
            return Err(Error::DimensionMismatch { expected: self.subsystems.len(), found: levels.len() });
        }
        let mut idx = 0;
        for (s, &l) in self.subsystems.iter().zip(levels) {
            if l >= s.dim {
                return Err(Error::DimensionMismatch { expected: s.dim, found: l + 1 });
            }
            idx = idx * s.dim + l;
        }
        Ok(idx)
    }

    /// Composite index from `(subsystem label, state label)` pairs; subsystems
    /// not mentioned sit in their level 0.
    pub fn index_of(&self, assignment: &[(&str, &str)]) -> Result<usize> {
        let mut levels = vec![0; self.subsystems.len()];
        for (sub, state) in assignment {
            let pos = self.position(sub)?;
            let lvl = self.subsystems[pos]
                .state_labels
                .iter()
                .position(|l| l == state)
                .ok_or_else(|| Error::UnknownLabel(format!("{sub}:{state}")))?;
            levels[pos] = lvl;
        }
        self.compose(&levels)
    }

    pub fn labels_of(&self, index: usize) -> Vec<(String, String)> {
        self.decompose(index)
            .into_iter()
            .zip(&self.subsystems)
            .map(|(l, s)| (s.label.clone(), s.state_labels[l].clone()))
            .collect()
    }

    pub fn excitation(&self, index: usize) -> u32 {
        self.decompose(index).into_iter().zip(&self.subsystems).map(|(l, s)| s.excitations[l]).sum()
    }

    pub fn excitations(&self) -> Vec<u32> {
        (0..self.total_dim).map(|i| self.excitation(i)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: HilbertSpace = serde_json::from_str(text)?;
        if raw.schema_version != SPACE_SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported space schema version {}", raw.schema_version)));
        }
        build_space(raw.subsystems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn element() -> SubsystemSpec {
        SubsystemSpec::new("e", 3).with_states(["0", "1", "C"]).with_excitations([0, 1, 1])
    }

    #[test]
    fn single_element_dim() {
        let s = build_space(vec![element()]).unwrap();
        assert_eq!(s.total_dim(), 3);
    }

    #[test]
    fn donors_and_acceptors_dim() {
        let s = build_space(vec![
            SubsystemSpec::new("D0", 3),
            SubsystemSpec::new("D1", 3),
            SubsystemSpec::new("A0", 2),
            SubsystemSpec::new("A1", 2),
        ])
        .unwrap();
        assert_eq!(s.total_dim(), 36);
    }

    #[test]
    fn band_element_dim() {
        let mut labels = vec!["0".to_string()];
        labels.extend((1..=8).map(|l| format!("1_{l}")));
        labels.push("C".into());
        let s = build_space(vec![SubsystemSpec::new("band", 10).with_states(labels)]).unwrap();
        assert_eq!(s.total_dim(), 10);
    }

    #[test]
    fn rejects_duplicates_and_zero_dims() {
        assert!(matches!(
            build_space(vec![SubsystemSpec::new("a", 2), SubsystemSpec::new("a", 2)]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(matches!(build_space(vec![SubsystemSpec::new("a", 0)]), Err(Error::ZeroDimension(_))));
        assert!(matches!(build_space(vec![]), Err(Error::EmptySpace)));
    }

    #[test]
    fn index_maps_round_trip() {
        let s = build_space(vec![element(), SubsystemSpec::new("A", 2).with_excitations([0, 1])]).unwrap();
        for i in 0..s.total_dim() {
            assert_eq!(s.compose(&s.decompose(i)).unwrap(), i);
        }
        let idx = s.index_of(&[("e", "C"), ("A", "1")]).unwrap();
        assert_eq!(idx, 5);
        assert_eq!(s.excitation(idx), 2);
        assert_eq!(s.labels_of(idx)[0], ("e".to_string(), "C".to_string()));
    }

    #[test]
    fn json_snapshot_round_trip() {
        let s = build_space(vec![element()]).unwrap();
        let back = HilbertSpace::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
