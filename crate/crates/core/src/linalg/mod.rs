//! Sparse symmetric storage and an envelope (skyline) Cholesky solver.
//!
//! System sizes in this toolkit stay below ~50k unknowns and come from
//! structured or locally refined simplicial meshes, whose reverse
//! Cuthill-McKee envelopes are narrow. A profile factorization is therefore
//! both simple and fast enough, and keeps factorization deterministic.

mod envelope;
mod sparse;

pub use envelope::{reverse_cuthill_mckee, EnvelopeCholesky};
pub use sparse::SymmetricCsr;
