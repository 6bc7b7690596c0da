//! Quench dynamics of long-range spin-1/2 Heisenberg models.
//!
//! Backends: exact Krylov propagation (`ed`), closed forms for the Ising limit
//! (`oracle`), the discrete truncated Wigner approximation (`dtwa`) and the
//! multilayer MCTDH tree-tensor method (`mlmctdh`). All of them report through
//! `observables::ObservableSeries`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dtwa;
pub mod ed;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod mlmctdh;
pub mod observables;
pub mod oracle;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
