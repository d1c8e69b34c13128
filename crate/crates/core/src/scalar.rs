//! Scalar abstraction shared by the Gaussian-state algebra.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar the covariance algebra runs on: `f32` or `f64`.
///
/// The tolerance constants scale with the precision of the type; the `f64`
/// values are the reference thresholds.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Symplectic eigenvalues in `[1 - PURITY_TOL, 1)` are clamped to 1.
    const PURITY_TOL: f64;
    /// Symplectic eigenvalues below `1 - UNPHYSICAL_TOL` are rejected.
    const UNPHYSICAL_TOL: f64;
    /// Relative symmetry tolerance for covariance entries.
    const SYMMETRY_TOL: f64;
    /// Window above 1 inside which the entropy function returns exactly 0.
    const ENTROPY_FLOOR: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const PURITY_TOL: f64 = 1e-9;
    const UNPHYSICAL_TOL: f64 = 1e-6;
    const SYMMETRY_TOL: f64 = 1e-12;
    const ENTROPY_FLOOR: f64 = 1e-12;
}

impl Real for f32 {
    const PURITY_TOL: f64 = 1e-4;
    const UNPHYSICAL_TOL: f64 = 1e-3;
    const SYMMETRY_TOL: f64 = 1e-5;
    const ENTROPY_FLOOR: f64 = 1e-6;
}
