//! Max-Cut by semidefinite relaxation and random-hyperplane rounding.
//!
//! The relaxation `min Tr(CX) s.t. X_ii = 1, X ⪰ 0` is solved by a
//! primal-dual barrier method whose Newton systems go through conjugate
//! gradient at a configurable floating-point precision (64 to 1024 mantissa
//! bits, backed by MPFR). A memory-traffic model turns the recorded CG
//! iteration counts into time estimates for an extended-precision
//! accelerator.
//!
//! ```
//! use gwsdp::graph::Graph;
//! use gwsdp::ipm::{solve, IpmConfig, SdpProblem};
//! use gwsdp::rounding::{best_of_rounds, sdp_cut_bound};
//!
//! let g = Graph::parse_gset("3 3\n1 2 1\n2 3 1\n1 3 1").unwrap();
//! let out = solve(&SdpProblem::from_graph(&g).unwrap(), &IpmConfig::default()).unwrap();
//! assert!(out.converged());
//! let bound = sdp_cut_bound(&g, &out.state.x).unwrap();
//! assert!((bound - 2.25).abs() < 0.005);
//! assert_eq!(best_of_rounds(&g, &out.state.x, 10, 1).unwrap().cut, 2);
//! ```

pub mod arith;
pub mod cg;
pub mod cli;
pub mod error;
pub mod graph;
pub mod hwmodel;
pub mod ipm;
pub mod linalg;
pub mod rounding;

pub use error::{Error, Result};

/// Version string embedded in every artifact.
pub const VERSION: &str = concat!("gwsdp ", env!("CARGO_PKG_VERSION"));

/// The guide's chapters, compiled as doctests so their snippets keep working.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/precision.md")]
    mod precision {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/barrier.md")]
    mod barrier {}
    #[doc = include_str!("../../../book/src/cg.md")]
    mod cg {}
    #[doc = include_str!("../../../book/src/rounding.md")]
    mod rounding {}
    #[doc = include_str!("../../../book/src/hardware.md")]
    mod hardware {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
