//! Extrinsic geometry of parametrized Euclidean submanifolds, centered on the
//! canonical vector field `x^T` (the tangential part of the position vector).
//!
//! The crate evaluates an immersion given in a small expression language as
//! exact Taylor jets, builds the second fundamental form and everything derived
//! from it, and checks pointwise identities relating conformality of `x^T`,
//! umbilicity, Yamabe solitons and self-similar submanifolds on sample grids.

pub mod dsl;
pub mod geometry;
pub mod sampling;
pub mod canonical;
pub mod applications;
pub mod classifiers;
pub mod report;
pub mod config;
pub mod acceptance;
