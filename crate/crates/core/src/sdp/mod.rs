//! Semidefinite programming: problem containers, a dense interior-point
//! solver, and SDPA sparse-format interchange.

pub mod problem;
pub mod sdpa;
pub mod solver;

pub use problem::{BlockLayout, SdpError, SdpForm, SdpProblem, SparseSym};
pub use sdpa::{export_sdpa, parse_sdpa, read_sdpa, write_sdpa_string};
pub use solver::{solve, SdpSolution, SolveOptions, SolveStatus};
