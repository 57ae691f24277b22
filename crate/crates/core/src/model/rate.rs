//! Rate functions mapping transmit power to delivered data per slot.

/// A rate function `r_g(p)` parameterised by the channel power gain `g`.
///
/// Implementations must be strictly increasing and concave in `p` with
/// `r_g(0) = 0`, and twice continuously differentiable on `p >= 0`. The
/// solver only ever touches the inverse and its first two derivatives.
pub trait RateFunction: Send + Sync {
    fn rate(&self, power: f64, gain: f64) -> f64;

    fn rate_derivative(&self, power: f64, gain: f64) -> f64;

    /// Power needed to deliver `rate` units of data.
    fn inverse(&self, rate: f64, gain: f64) -> f64;

    fn inverse_derivative(&self, rate: f64, gain: f64) -> f64;

    fn inverse_second_derivative(&self, rate: f64, gain: f64) -> f64;
}

/// Gaussian channel capacity `log(1 + g p)` in nats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LogRate;

impl RateFunction for LogRate {
    #[inline]
    fn rate(&self, power: f64, gain: f64) -> f64 {
        (gain * power).ln_1p()
    }

    #[inline]
    fn rate_derivative(&self, power: f64, gain: f64) -> f64 {
        gain / (1.0 + gain * power)
    }

    #[inline]
    fn inverse(&self, rate: f64, gain: f64) -> f64 {
        rate.exp_m1() / gain
    }

    #[inline]
    fn inverse_derivative(&self, rate: f64, gain: f64) -> f64 {
        rate.exp() / gain
    }

    #[inline]
    fn inverse_second_derivative(&self, rate: f64, gain: f64) -> f64 {
        rate.exp() / gain
    }
}
