//! Computation and experimental verification of the distribution theory of
//! polynomials over prime fields: Gowers uniformity norms, polynomial rank,
//! polynomial factors and regularity, the derivative-sampling low-rank
//! approximation, and the symmetric-polynomial apparatus in characteristic 2.
//!
//! Everything exact stays in integer or residue arithmetic until a final
//! complex reconstruction; everything randomized is driven by a counter-based
//! generator so results are reproducible for a fixed seed regardless of
//! thread count.

pub mod approx;
pub mod bits;
pub mod error;
pub mod factor;
pub mod field;
pub mod gowers;
pub mod linalg;
pub mod par;
pub mod poly;
pub mod rank;
pub mod rng;
pub mod symmetric;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Complex, CycloSum, Point, PrimeFieldCtx};
pub use poly::{PhaseTable, Poly};

/// Default memory budget for dense truth tables (entries).
pub const DEFAULT_TABLE_CAP: u128 = 1 << 28;

/// Default enumeration budget for exact Gowers cubes (shift-tuple count
/// times table size, i.e. p^(n * order)).
pub const DEFAULT_CUBE_CAP: u128 = 1 << 34;

/// Default candidate budget for the exhaustive weak-norm search.
pub const DEFAULT_SEARCH_CAP: u128 = 1 << 30;
