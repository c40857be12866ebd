//! Dense Lindblad simulations of temporary bond-dissipation quenches.
//!
//! The crate builds single-particle lattice models ([`model`]), assembles
//! their Liouvillian superoperators and biorthogonal spectra ([`superop`]),
//! propagates density matrices through piecewise-constant quench protocols
//! ([`evolve`]), and measures relaxation through trace distances and
//! slow-mode amplitudes ([`observables`]). The [`experiment`] module ties
//! these together into a configuration-driven runner with deterministic
//! CSV output.
//!
//! All matrices are dense `faer` matrices over `c64`. Density matrices are
//! vectorized by column stacking, `vec(ρ)[i + D·j] = ρ[i, j]`.

pub mod error;
pub mod evolve;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod superop;

pub use error::{Error, Result};
pub use faer::c64;

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
