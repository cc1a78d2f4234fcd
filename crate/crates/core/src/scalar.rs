//! Scalar abstraction shared by every density in the crate.
//!
//! Forward models and log-densities are written once against [`Real`] and
//! evaluated either with plain floats or with [`Dual`] numbers, which carry
//! an exact gradient alongside the value.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

pub use crate::dual::Dual;

/// Floating-point scalar usable by the forward models and likelihoods.
pub trait Real: Float + FromPrimitive + Debug + Send + Sync + 'static {
    /// Lift an `f64` constant.
    fn lit(x: f64) -> Self;

    /// Primal value as `f64` (drops any derivative part).
    fn value(self) -> f64;

    /// Natural log of the gamma function for positive arguments.
    fn ln_gamma(self) -> Self;

    /// `self + c` for a constant `c`.
    #[inline]
    fn shift(self, c: f64) -> Self {
        self + Self::lit(c)
    }

    /// `self * c` for a constant `c`.
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * Self::lit(c)
    }

    /// A value whose derivative is `sum_j partials[j] * d inputs[j]`.
    ///
    /// Lets a sub-expression be differentiated in a smaller local space and
    /// then spliced into the caller's derivative space.
    fn from_partials(value: f64, inputs: &[Self], partials: &[f64]) -> Self;

    /// `ln(1 / (1 + exp(-self)))`, computed without overflow.
    fn ln_sigmoid(self) -> Self {
        // ln σ(x) = -softplus(-x)
        if self.value() >= 0.0 {
            -((-self).exp().ln_1p())
        } else {
            self - self.exp().ln_1p()
        }
    }

    /// Logistic function `1 / (1 + exp(-self))`.
    fn sigmoid(self) -> Self {
        if self.value() >= 0.0 {
            Self::one() / (Self::one() + (-self).exp())
        } else {
            let e = self.exp();
            e / (Self::one() + e)
        }
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    fn ln_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self)
    }
    #[inline]
    fn from_partials(value: f64, _inputs: &[Self], _partials: &[f64]) -> Self {
        value
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn value(self) -> f64 {
        self as f64
    }
    fn ln_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self as f64) as f32
    }
    #[inline]
    fn from_partials(value: f64, _inputs: &[Self], _partials: &[f64]) -> Self {
        value as f32
    }
}

impl<const N: usize> Real for Dual<N> {
    #[inline]
    fn lit(x: f64) -> Self {
        Dual::constant(x)
    }
    #[inline]
    fn value(self) -> f64 {
        self.re
    }
    #[inline]
    fn shift(self, c: f64) -> Self {
        Dual { re: self.re + c, eps: self.eps }
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self.chain(self.re * c, c)
    }
    fn ln_gamma(self) -> Self {
        let g = statrs::function::gamma::ln_gamma(self.re);
        let d = statrs::function::gamma::digamma(self.re);
        self.chain(g, d)
    }
    #[inline]
    fn from_partials(value: f64, inputs: &[Self], partials: &[f64]) -> Self {
        let mut eps = [0.0; N];
        for (x, d) in inputs.iter().zip(partials) {
            for (e, xe) in eps.iter_mut().zip(&x.eps) {
                *e += d * xe;
            }
        }
        Dual { re: value, eps }
    }
}
