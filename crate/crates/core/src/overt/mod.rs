//! Piecewise-linear over-approximation of nonlinear dynamics.

mod abstraction;
mod expr;
mod scalar;

pub use abstraction::{
    abstract_dynamics, encode_abstraction, AbstractDynamics, ClipRelation, EncodedDynamics, Lin, PwlRelation,
};
pub use expr::{Expr, VarRef};
pub use scalar::{bound_scalar, bound_scalar_uniform, max_gap, BoundKind, PiecewiseLinearBound, ScalarFn, MAX_SEGMENTS};
