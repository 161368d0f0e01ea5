//! Influence matrices of kicked and Trotterized Ising chains.
//!
//! The environment of a single spin is summarised by its influence matrix
//! (IM): a functional of the spin's forward/backward z-trajectory, stored as a
//! matrix-product state over folded time sites. Each folded site carries the
//! pair `(σ_τ, σ̄_τ)` with the fixed ordering `↑↑, ↑↓, ↓↑, ↓↓ → 0..3`.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`]: dense complex tensors, contraction and truncated SVD.
//! * [`mps`]: temporal MPS/MPO algebra, zip-up application, entropies and a
//!   binary container.
//! * [`model`]: model parameters and the single-spin local kernel.
//! * [`influence`]: dual transfer slices, the power-iteration solver, the
//!   exact disorder-averaged slice and impurity IMs.
//! * [`observables`]: contraction of two IMs with the local kernel and the
//!   series drivers built on it.
//! * [`oracles`]: closed forms and brute-force references used for
//!   cross-checking every layer above.

pub mod error;
pub mod influence;
pub mod model;
pub mod mps;
pub mod observables;
pub mod oracles;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Version string written into run manifests and checkpoints.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
