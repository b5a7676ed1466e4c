//! Certified construction of a harmonic map `h: R² → R²` whose number of
//! isolated zeros in `B_{2^k}` grows as fast as a prescribed sequence while
//! its maximal modulus stays below `exp(r^{1+ε})`.
//!
//! The crate is organised bottom-up:
//!
//! * [`exactpoly`]: exact rational expansion of the polynomials `P_c` and
//!   the block coefficient tables `b_j`.
//! * [`blocks`]: the harmonic building blocks `u_k` with exact dyadic phase
//!   reduction, norm bounds and zero-set tracing.
//! * [`assembly`]: the inductive choice of amplitudes and margins, plus
//!   evaluation of `g`, `h`, the holomorphic extension `f` and the dimension
//!   lift with certified error.
//! * [`certify`]: certified zero counting on integer lines, Jacobian
//!   regularity and modulus checks.
//! * [`coarse`]: grid-based coarse zero counts of sublevel sets of `|h|`.
//!
//! All floating computations run on MPFR floats at the construction's
//! precision and carry a forward error bound (see [`Bounded`]).

pub mod assembly;
pub mod blocks;
pub mod bounded;
pub mod certify;
pub mod coarse;
mod error;
pub mod exactpoly;

pub use assembly::{build_construction, Construction, Level, TailBound};
pub use blocks::{Block, DyadicRational};
pub use bounded::Bounded;
pub use error::{Error, Result};
pub use exactpoly::{BlockCoefficients, ExactRoot, RationalPolynomial};
