//! Sparse operators on a [`HilbertSpace`].
//!
//! Amplitudes follow the square-root-of-rate convention: a jump operator
//! `γ|0⟩⟨1|` produces the transition rate `γ²`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::HilbertSpace;
use crate::sparse::CsrMatrix;

pub const OPERATOR_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct OperatorSpec {
    space: Arc<HilbertSpace>,
    matrix: CsrMatrix,
    hermitian: bool,
}

impl OperatorSpec {
    pub fn new(space: Arc<HilbertSpace>, matrix: CsrMatrix) -> Result<Self> {
        let d = space.total_dim();
        if matrix.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.rows().max(matrix.cols()) });
        }
        Ok(Self { space, matrix, hermitian: false })
    }

    /// Marks the operator Hermitian after checking its entries.
    pub fn hermitian(mut self) -> Result<Self> {
        if !self.matrix.is_hermitian(1e-12) {
            return Err(Error::invalid("operator flagged Hermitian is not"));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn zero(space: Arc<HilbertSpace>) -> Self {
        let d = space.total_dim();
        Self { space, matrix: CsrMatrix::zeros(d, d), hermitian: true }
    }

    pub fn identity(space: Arc<HilbertSpace>) -> Self {
        let d = space.total_dim();
        Self { space, matrix: CsrMatrix::identity(d), hermitian: true }
    }

    pub fn from_triplets(space: Arc<HilbertSpace>, entries: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Self> {
        let d = space.total_dim();
        let entries: Vec<_> = entries.into_iter().collect();
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= d || *c >= d) {
            return Err(Error::DimensionMismatch { expected: d, found: r.max(c) + 1 });
        }
        Self::new(space, CsrMatrix::from_triplets(d, d, entries))
    }

    /// `amp · |to⟩⟨from|` on composite indices.
    pub fn transition(space: Arc<HilbertSpace>, to: usize, from: usize, amp: f64) -> Result<Self> {
        Self::from_triplets(space, [(to, from, C64::new(amp, 0.0))])
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: self.matrix.add(&other.matrix),
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(Self { space: self.space.clone(), matrix: self.matrix.matmul(&other.matrix), hermitian: false })
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.scale(C64::new(a, 0.0)), hermitian: self.hermitian }
    }

    pub fn sum(space: Arc<HilbertSpace>, ops: &[OperatorSpec]) -> Result<Self> {
        let mut acc = Self::zero(space);
        for op in ops {
            acc = acc.add(op)?;
        }
        Ok(acc)
    }

    pub fn snapshot(&self) -> OperatorSnapshot {
        OperatorSnapshot {
            schema_version: OPERATOR_SCHEMA_VERSION,
            space: (*self.space).clone(),
            hermitian: self.hermitian,
            entries: self.matrix.iter().map(|(r, c, v)| (r, c, v.re, v.im)).collect(),
        }
    }

    pub fn from_snapshot(s: &OperatorSnapshot) -> Result<Self> {
        if s.schema_version != OPERATOR_SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported operator schema version {}", s.schema_version)));
        }
        let space = Arc::new(crate::space::build_space(s.space.subsystems().to_vec())?);
        let op = Self::from_triplets(space, s.entries.iter().map(|&(r, c, re, im)| (r, c, C64::new(re, im))))?;
        if s.hermitian {
            op.hermitian()
        } else {
            Ok(op)
        }
    }
}

/// Versioned, serializable form of an operator together with its space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSnapshot {
    pub schema_version: u32,
    pub space: HilbertSpace,
    pub hermitian: bool,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

/// Lifts `local_op`, defined on the single subsystem `label`, to the full
/// space by tensoring with identities on every other factor.
pub fn embed(local_op: &CsrMatrix, label: &str, space: &Arc<HilbertSpace>) -> Result<OperatorSpec> {
    let pos = space.position(label)?;
    let dim = space.subsystems()[pos].dim;
    if local_op.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: local_op.rows() });
    }
    let left: usize = space.subsystems()[..pos].iter().map(|s| s.dim).product();
    let right = space.stride(pos);
    let m = CsrMatrix::identity(left).kron(local_op).kron(&CsrMatrix::identity(right));
    OperatorSpec::new(space.clone(), m)
}

/// `amp · |to⟩⟨from|` on a single subsystem of dimension `dim`.
pub fn local_transition(dim: usize, to: usize, from: usize, amp: f64) -> CsrMatrix {
    CsrMatrix::from_triplets(dim, dim, [(to, from, C64::new(amp, 0.0))])
}
