//! Backward reachability analysis for neural feedback loops.

pub mod crown;
pub mod error;
pub mod geom;
pub mod matrix;
pub mod linear;
pub mod nn;
pub mod nonlinear;
pub mod oracle;
pub mod overt;
pub mod partition;
pub mod policy;
pub mod render;
pub mod scenario;
pub mod solver;
pub mod sweep;
pub mod system;

pub use error::{Error, Result};
pub use geom::{Hyperrectangle, Region};
