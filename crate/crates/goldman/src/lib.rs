//! Goldman symplectic pairing on PSL(n,R)-Hitchin components, computed
//! through labelled barrier systems on a pants-adapted ideal triangulation.
//!
//! The pipeline:
//!
//! 1. [`surface`] builds the combinatorics of a pants decomposition: the
//!    ideal triangulation, its barrier system, bridges and spiral sequences,
//!    and the finite triangulation used for the cup product.
//! 2. [`fuchsian`] realizes that data hyperbolically: Fenchel-Nielsen
//!    coordinates to a discrete PSL(2,R) group, the principal (symmetric
//!    power) embedding into SL(n,R), boundary flags, and the Klein-model
//!    geometry with algebraic intersection numbers.
//! 3. [`labelling`] implements legal and admissible labellings of the
//!    barrier system by sl(n) matrices, their diagonal/nilpotent corrections
//!    K0/K1 across closed edges, and the special (eruption/hexagon/twist/
//!    length) labellings.
//! 4. [`pairing`] evaluates the resulting 1-cocycles on the finite
//!    triangulation and computes the Goldman symplectic pairing by the cup
//!    product formula.
//!
//! [`flagkit`] supplies the projective-invariant linear algebra everything
//! else is built from, and [`verify`] packages the checks behind the CLI.

pub mod flagkit;
pub mod surface;
pub mod fuchsian;
pub mod labelling;
pub mod pairing;
// pub mod verify;
// pub mod io;
