//! Scalar abstraction shared by the optical and qudit engines.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real floating-point type the simulators are generic over (`f32`, `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Magnitude below which amplitudes are dropped after a transform.
    fn prune_threshold() -> Self;

    /// Tolerance used by internal unitarity self-checks.
    fn check_tolerance() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl Real for f64 {
    fn prune_threshold() -> f64 {
        1e-12
    }
    fn check_tolerance() -> f64 {
        1e-10
    }
}

impl Real for f32 {
    fn prune_threshold() -> f32 {
        1e-6
    }
    fn check_tolerance() -> f32 {
        1e-4
    }
}

/// Complex amplitude over a [`Real`] scalar.
pub type C<T> = Complex<T>;

/// `e^{i phi}`.
pub fn cis<T: Real>(phi: T) -> C<T> {
    Complex::new(phi.cos(), phi.sin())
}

pub(crate) fn zero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

pub(crate) fn one<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

