//! Real-valued scalar used for edge weights and label likelihoods.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::codec::Wire;

/// Floating point type the graph and the label-propagation program are generic over: `f32` or `f64`.
///
/// The wire width is fixed per type (4 or 8 bytes, little endian), so byte
/// counters stay platform-stable for either choice.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + Wire
    + 'static
{
    /// Serialized width in bytes.
    const WIDTH: usize;

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Scalar for f32 {
    const WIDTH: usize = 4;
}

impl Scalar for f64 {
    const WIDTH: usize = 8;
}
