//! Kernel towers on branching systems and the electrical network they induce
//! on the word tree.
//!
//! Starting from a positive definite seed kernel `K` and branch maps
//! `φ_1, …, φ_m` with `LK ≥ K` (where `(LJ)(s,t) = Σ_i J(φ_i s, φ_i t)`),
//! this crate computes:
//!
//! * the monotone tower `K_n = LⁿK` and its diagonals `u_n` ([`kernel`]),
//! * diagonal increments as edge conductances on the rooted m-ary word
//!   tree, cutset masses and the level telescoping identity ([`tree`]),
//! * effective resistance / capacity of that network with two-sided
//!   bounds and the scalar series criterion ([`resistance`]),
//! * the invariant completion `K_∞` on the finiteness locus with
//!   certified tail bounds ([`completion`]),
//! * Gram-level splitting identities (isometry, word operators,
//!   Parseval) ([`splitting`]),
//! * the boundary martingale `M_n = mⁿ K_∞(φ_{ω|n}·, φ_{ω|n}·)`, its
//!   shift cocycles and diagonal boundary factors ([`boundary`]),
//! * weighted boundary kernels `J_f` for cylinder weights ([`weights`]).
//!
//! Shipped systems (two analytic fixtures and arbitrary finite systems,
//! including a subinvariant-seed generator) live in [`systems`].

pub mod boundary;
pub mod completion;
mod error;
pub mod extended;
pub mod kernel;
pub mod resistance;
pub mod splitting;
pub mod system;
pub mod systems;
pub mod tol;
pub mod tree;
pub mod weights;

pub use error::{Error, Result};
pub use extended::ExtendedNonneg;
pub use kernel::{GramMatrix, TowerCache};
pub use system::{KernelSystem, Word};
