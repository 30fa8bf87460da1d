//! Exact rational arithmetic used throughout the crate.
//!
//! All masses, transport costs and certificate slacks are exact rationals so
//! that equalities and inequalities can be asserted with zero tolerance.
//! `i128` numerators and denominators are ample at desk scale; overflow
//! checks stay enabled in every build profile (see the workspace manifest).

use num_rational::Ratio;

/// The crate-wide exact rational type.
pub type Q = Ratio<i128>;

/// Integer as a rational.
pub fn q(n: i64) -> Q {
    Q::from_integer(n as i128)
}

/// Rational `n / d`.
pub fn frac(n: i64, d: i64) -> Q {
    Q::new(n as i128, d as i128)
}

/// Positive part `max(x, 0)`.
pub fn pos(x: &Q) -> Q {
    if *x > Q::from_integer(0) {
        *x
    } else {
        Q::from_integer(0)
    }
}

/// Render a rational as `p/q` (or `p` when integral), the format used by
/// certificate reports and trace dumps.
pub fn q_str(x: &Q) -> String {
    if x.is_integer() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
