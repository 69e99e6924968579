//! Exact construction and verification of projective quantum-state structures
//! for tensor field theories.
//!
//! The crate works at desk scale: the spatial manifold is a finite set of
//! labelled points, all field and d.o.f. arithmetic is exact over the
//! rationals, and Hilbert spaces are finite-dimensional. On top of that it
//! builds
//!
//! - configurational and momentum degrees of freedom and their pairing
//!   ([`dof`]), with an independent discretized Poisson-bracket oracle
//!   ([`dof::oracle`]),
//! - discrete frames and the induced d.o.f. sets `K_γ` ([`frames`]),
//! - finite physical systems, their order and the constructive join
//!   ([`systems`]),
//! - families of factorized Hilbert spaces, operator embeddings and state
//!   pull-backs ([`hilbert`]),
//! - the combination of two families and the LQG coupling set Θ
//!   ([`coupling`]).

pub mod coupling;
pub mod dof;
pub mod error;
pub mod frames;
pub mod geometry;
pub mod hilbert;
pub mod linalg;
pub mod polynomial;
pub mod random;
pub mod rational;
pub mod scenario;
pub mod systems;

pub use error::{Error, Result};
pub use rational::Q;
