//! Central tolerance and budget constants.
//!
//! Everything that compares floating point against an exact statement goes
//! through one of these, so a report can always name the threshold it used.

/// Absolute entrywise tolerance for Hermitian symmetry of kernel values.
pub const HERMITIAN_ABS: f64 = 1e-12;

/// Default relative PSD tolerance: a Gram matrix counts as positive
/// semidefinite when `λ_min ≥ -tol · max(1, λ_max)`.
pub const PSD_REL: f64 = 1e-9;

/// Relative tolerance for the tower recursion `u_{n+1} = Σ_i u_n ∘ φ_i`.
pub const TOWER_REL: f64 = 1e-10;

/// Negative diagonal increments within this (relative) band are clipped to
/// zero; anything worse signals broken subinvariance.
pub const INCREMENT_CLIP_REL: f64 = 1e-12;

/// Relative tolerance for the level telescoping identity.
pub const TELESCOPE_REL: f64 = 1e-10;

/// Relative agreement required between the series-parallel resistance and
/// the Dirichlet (graph Laplacian) oracle.
pub const RESISTANCE_ORACLE_REL: f64 = 1e-9;

/// Cauchy-tail threshold for declaring the capacity series stabilized.
pub const SERIES_CAUCHY_TAIL: f64 = 1e-9;

/// Partial sums beyond this are reported as divergent (zero capacity).
pub const SERIES_DIVERGENCE: f64 = 1e12;

/// Diagonal values beyond this are treated as divergent (outside the
/// finiteness locus).
pub const DIAGONAL_DIVERGENCE: f64 = 1e15;

/// Stall tolerance for the finiteness probe: increments below
/// `stall · max(1, u_n)` count as converged.
pub const PROBE_STALL_REL: f64 = 1e-13;

/// Levels inspected by the geometric-decay certificate window.
pub const PROBE_WINDOW: usize = 5;

/// Observed increment ratios are capped here; a window whose worst ratio
/// exceeds the cap yields no convergence certificate.
pub const GEOMETRIC_RATIO_CAP: f64 = 0.99;

/// Default word-evaluation budget per call; beyond it only systems whose
/// point keys collapse the word tree are allowed.
pub const ENUMERATION_BUDGET: usize = 1 << 20;

/// Unit-flow constraint tolerance (root normalization and conservation).
pub const FLOW_ABS: f64 = 1e-12;
