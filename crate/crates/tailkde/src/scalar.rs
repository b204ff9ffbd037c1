//! Scalar abstraction for the numeric core.
//!
//! The kernel, transform, grid and optimizer layers are generic over any
//! IEEE float; the estimation and simulation layers instantiate them at
//! `f64` (see the aliases at the crate root).

use num_traits as nt;

/// Floating-point scalar usable by the numeric core.
pub trait Real:
    nt::Float
    + nt::FloatConst
    + nt::NumAssign
    + nt::FromPrimitive
    + nt::ToPrimitive
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lossless conversion from `f64` literals in formulas.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }
}

impl<T> Real for T where
    T: nt::Float
        + nt::FloatConst
        + nt::NumAssign
        + nt::FromPrimitive
        + nt::ToPrimitive
        + std::iter::Sum
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}
