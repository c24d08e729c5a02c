//! Scalar abstraction so the model runs in `f32` for training and `f64` for
//! finite-difference checks.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

pub trait Real: Float + FromPrimitive + Default + Debug + Send + Sync + 'static {
    /// Converts a constant.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
