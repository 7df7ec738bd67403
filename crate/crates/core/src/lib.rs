//! Exact symbolic computation for quantum principal bundles over compact
//! matrix quantum groups.
//!
//! The crate builds up in layers:
//!
//! * [`scalar`]: the coefficient field, rational functions in a deformation
//!   parameter `q` with exact half-integer powers.
//! * [`free`]: presentations of finitely generated *-algebras and
//!   noncommutative polynomials.
//! * [`rewrite`]: degree-bounded completion of rewriting systems and normal
//!   forms.
//! * [`linalg`]: exact sparse linear algebra over the scalar field.
//! * [`tensor`]: tensor products of presented algebras, with optional graded
//!   sign rules.
//!
//! On top of those sit the domain layers: [`hopf`] (compact matrix quantum
//! groups, Haar states, canonical intertwiners), [`od`] (the universal
//! quantum-sphere algebras `O_d` and their multiplet calculus), [`crossprod`]
//! (classifying maps, the flip operator, and crossproduct bundles), and
//! [`diffcalc`] (differential calculi, invariant forms, connections, and
//! characteristic classes).

pub mod crossprod;
pub mod free;
pub mod hopf;
pub mod io;
pub mod linalg;
pub mod od;
pub mod oracle;
pub mod report;
pub mod rewrite;
pub mod sample;
pub mod scalar;
pub mod tensor;
