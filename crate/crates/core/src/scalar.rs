//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the solver, jets and limit computations are generic over.
///
/// Implemented for `f32` and `f64`. Reference values in tests are pinned
/// for `f64`; `f32` works with correspondingly looser tolerances.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; panics only for non-representable inputs,
    /// which cannot occur for `f32`/`f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest iteration tolerance that is reachable in this precision.
    fn default_tolerance() -> Self {
        let floor = Self::epsilon() * Self::of(64.0);
        Self::of(1e-13).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
