//! Scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar the numeric kernels are generic over.
pub trait Scalar:
    Float + FromPrimitive + NumAssignOps + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for literals in generic code.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
