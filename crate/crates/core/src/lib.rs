//! Numerical toolkit for planar piecewise-smooth systems with a saddle on the switching curve.
//!
//! The crate computes homoclinic loops, perturbed stable and unstable leaves, the piecewise
//! Melnikov function, forward and backward loop maps and the scaling laws of their fly time
//! and return displacement. It is `no_std` (with `alloc`); file formats and the command line
//! live in the companion `homloop` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod builtins;
pub mod dichotomy;
pub mod error;
pub mod flow;
pub mod geom;
pub mod leaves;
pub mod loopmap;
pub mod melnikov;
pub mod ode;
pub mod poly;
pub mod psys;
pub mod quad;
pub mod scaling;

pub use error::{Error, Result};
pub use geom::{pt, Mat2, Point2};
pub use psys::{PiecewiseSystem, Side};
