//! Timeout functions: the view duration `F` and the auxiliary timeouts
//! used by two-phase HotStuff (`F_p`), SBFT's fast path (`F_f`) and
//! Tendermint's lock window (`F_l`).

use serde::{Deserialize, Serialize};

use crate::{Time, View};

/// A timeout family. `F` itself must be monotone, unbounded and have
/// `F(0) = 0`; auxiliary timeouts are unconstrained beyond positivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum TimeoutFn {
    /// `F(v) = c * v`
    Linear { c: Time },
    /// `F(v) = c * 2^(v-1)`, `F(0) = 0`
    Exponential { c: Time },
    /// `F(v) = c` for all `v >= 1` (auxiliary timeouts only)
    Constant { c: Time },
    /// `F(v) = a * (v - 1) + b` for `v >= 1` (auxiliary timeouts only)
    Affine { a: Time, b: Time },
}

impl TimeoutFn {
    pub fn eval(&self, v: View) -> Time {
        if v == 0 {
            return 0.0;
        }
        match *self {
            TimeoutFn::Linear { c } => c * v as Time,
            TimeoutFn::Exponential { c } => c * (1u64 << (v - 1).min(52)) as Time,
            TimeoutFn::Constant { c } => c,
            TimeoutFn::Affine { a, b } => a * (v - 1) as Time + b,
        }
    }

    /// Whether this family is admissible as the main view-duration `F`:
    /// non-decreasing, `F(0) = 0` and unbounded.
    pub fn admissible_as_main(&self) -> bool {
        match *self {
            TimeoutFn::Linear { c } | TimeoutFn::Exponential { c } => c > 0.0,
            _ => false,
        }
    }

    pub fn positive(&self) -> bool {
        match *self {
            TimeoutFn::Linear { c } | TimeoutFn::Exponential { c } | TimeoutFn::Constant { c } => {
                c > 0.0
            }
            TimeoutFn::Affine { a, b } => a >= 0.0 && b > 0.0,
        }
    }
}
