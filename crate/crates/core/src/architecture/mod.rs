//! Detector models: single element, band element, arrays and the
//! donor/acceptor photon-number-resolving architecture.

pub mod builders;
pub mod dos;
pub mod symmetric;

pub use builders::*;
pub use dos::{discretize_dos, BandDiscretization, DosModel, DosShape};
pub use symmetric::{Species, SymmetricBasis};
