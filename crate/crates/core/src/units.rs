//! Unit conversions at the experiment boundary (µl/min and mW).

use crate::Scalar;

/// One microlitre per minute in m³/s.
pub const UL_PER_MIN: f64 = 1e-9 / 60.0;

pub fn ul_per_min<T: Scalar>(q: T) -> T {
    q * T::of(UL_PER_MIN)
}

pub fn to_ul_per_min<T: Scalar>(q_si: T) -> T {
    q_si / T::of(UL_PER_MIN)
}

pub fn milliwatt<T: Scalar>(p: T) -> T {
    p * T::of(1e-3)
}

pub fn micrometre<T: Scalar>(x: T) -> T {
    x * T::of(1e-6)
}
