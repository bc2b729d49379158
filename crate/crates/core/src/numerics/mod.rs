//! Scalar backends and the parameter record every formula is evaluated at.

mod genericity;
mod params;
mod scalar;

pub use genericity::{check_genericity, GenericityVerdict};
pub use params::{
    build_params, format_ratio, parse_ratio, sample_params, GenVar, ParamSet, ParamSpec, DEFAULT_PRECISION,
    DEFAULT_THETA_TERMS,
};
pub use scalar::{cmp_abs, Exact, Precision, Real, Scalar};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite floating point result")]
    NonFinite,
}

/// Relative tolerance used by every verification: `100 |q|^(N-1)`,
/// floored by the working precision of the float backend.
pub fn tolerance(abs_q: f64, theta_terms: usize, precision_digits: Option<u32>) -> f64 {
    let analytic = 100.0 * abs_q.powi(theta_terms as i32 - 1);
    match precision_digits {
        Some(p) => analytic.max(10f64.powi(30 - p as i32)),
        None => analytic,
    }
}
