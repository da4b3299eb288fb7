//! Exact Krylov-space dynamics for drives that close on rank-one Lie algebras:
//! su(2), su(1,1) and Heisenberg–Weyl, plus commuting products of such sectors.
//!
//! The library is generic over the real scalar (`f32` or `f64`); the aliases at
//! the crate root fix `f64`, which every tolerance in the test suite assumes.

pub mod algebra;
pub mod error;
pub mod generator;
pub mod krylov;
pub mod linalg;
pub mod ode;
pub mod qsl;
pub mod reference;
pub mod scenario;
pub mod scalar;
pub mod weinorman;

pub use error::{Error, Result};
pub use scalar::{Real, C};

pub type SectorSignature64 = algebra::SectorSignature<f64>;
pub type DriveEnvelope64 = algebra::DriveEnvelope<f64>;
pub type EffectiveCoupling64 = algebra::EffectiveCoupling<f64>;
pub type CMatrix64 = linalg::CMatrix<f64>;
