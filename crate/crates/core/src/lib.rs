//! Certified upper bounds on the entangled values of multi-prover nonlocal
//! games, computed through a hierarchy of moment-matrix / noncommutative
//! sum-of-squares semidefinite relaxations with a built-in interior-point
//! solver and verifiable certificates.

pub mod algebra;
pub mod certificates;
pub mod games;
pub mod hierarchy;
pub mod oracles;
pub mod sdp;

pub use algebra::{Generator, Mode, Monomial, NCPolynomial, Schema};
pub use games::{Game, GameForm};
pub use sdp::{SdpProblem, SdpSolution, SolveOptions};
