//! Canonical Lagrange-Finsler geometry from a parsed Lagrangian, nonholonomic
//! Ricci flow on periodic grids, and Perelman-type entropy functionals.
//!
//! The crate is organized around two derivative backends behind the same
//! tensor formulas: an analytic one (exact truncated-Taylor expansions of the
//! Lagrangian) and a grid one (4th-order periodic finite differences on
//! sampled fields). The analytic path provides high-precision references;
//! the grid path carries the flow, whose metrics leave the Hessian class.

pub mod entropy;
pub mod expr;
pub mod connections;
pub mod flow;
pub mod geometry;
pub mod fdref;
pub mod fields;

pub use expr::{jet, parse, ExpressionAst, Jet};
