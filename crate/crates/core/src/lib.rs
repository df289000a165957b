//! Cramér–Rao bounds and LED power allocation for visible-light positioning.
//!
//! The geometric, channel and Fisher-information kernels are generic over
//! [`num::Real`] (`f32` or `f64`). Optimization and experiments run in `f64`.

// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod conic;
pub mod experiments;
pub mod feasible;
pub mod fisher;
pub mod geometry;
pub mod minmax;
pub mod num;
pub mod scenario;
pub mod signal;
pub mod solver;
pub mod units;

pub use geometry::{Mat3, Vec3};
pub use num::Real;

pub type Scenario = scenario::Scenario<f64>;
pub type GammaMatrix = fisher::GammaMatrix<f64>;
pub type Fim = fisher::Fim<f64>;
pub type Scenario32 = scenario::Scenario<f32>;
pub type GammaMatrix32 = fisher::GammaMatrix<f32>;
