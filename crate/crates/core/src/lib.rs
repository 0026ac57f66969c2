//! Computational geometry on the m-ary Cantor space.
//!
//! The space is the set of infinite words over the alphabet `{1..m}` with the
//! ultrametric `d(x, y) = r^k`, where `k` is the length of the longest common
//! prefix and `r` is a fixed scale in `(0, 1)`. Everything here is built from
//! three finite objects:
//!
//! - [`trie::CylinderTrie`] / [`sets::CantorSet`] — which level-k cylinders a
//!   set meets, to a working depth;
//! - [`isometry::Automorphism`] — an isometry of the space, i.e. a rooted-tree
//!   automorphism given by one child permutation per node, either lazily
//!   derived from a seed or explicitly tabulated;
//! - [`measure::MassTrie`] — a measure described by its cylinder masses.
//!
//! On top of these sit dimension functionals (box-counting regression, the
//! interval premeasure, s-energy), the intersection martingale for a pair of
//! measures under a random isometry, and an experiment harness that drives
//! seeded Monte Carlo runs and exact small-case enumerations from the CLI.

pub mod boxdim;
pub mod dimension;
pub mod error;
pub mod experiments;
pub mod isometry;
pub mod measure;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod sets;
pub mod space;
pub mod trie;

pub use error::{CantorError, Result};
pub use space::{SpaceParams, Word};
