//! Convexifying change of variables `p_t = phi_t(q_t) = r_{g_t}^{-1}(a_t q_t + b_t)`.
//!
//! With `a_t > 0` the composition `r_{g_t} o phi_t` is affine and `phi_t` is
//! convex, which turns the delay problem into a convex program in `q`. The
//! solver only uses the canonical member `a_t = 1, b_t = 0`, for which `q_t`
//! is simply the data delivered in slot `t`.

use crate::error::{Error, Result};
use crate::model::{PowerPolicy, RateFunction, RatePolicy, ScenarioInstance};

/// Largest rate argument accepted by the forward map before exponentiation.
pub const MAX_RATE_ARGUMENT: f64 = 700.0;

/// Per-slot affine coefficients together with the rate function and gains.
#[derive(Clone)]
pub struct TransformFamily<'r> {
    scale: Vec<f64>,
    offset: Vec<f64>,
    gains: Vec<f64>,
    rate: &'r dyn RateFunction,
}

impl std::fmt::Debug for TransformFamily<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformFamily")
            .field("scale", &self.scale)
            .field("offset", &self.offset)
            .field("gains", &self.gains)
            .finish_non_exhaustive()
    }
}

pub fn build_transform<'r>(
    scale: Vec<f64>,
    offset: Vec<f64>,
    rate: &'r dyn RateFunction,
    gains: Vec<f64>,
) -> Result<TransformFamily<'r>> {
    if scale.len() != gains.len() || offset.len() != gains.len() {
        return Err(Error::Input(format!(
            "coefficient lengths ({}, {}) must match gains ({})",
            scale.len(),
            offset.len(),
            gains.len()
        )));
    }
    for (i, &a) in scale.iter().enumerate() {
        // NaN fails this too.
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Parameter(format!(
                "a[{}] = {a}: the composition must be affine with strictly positive slope",
                i + 1
            )));
        }
    }
    if let Some((i, b)) = offset.iter().enumerate().find(|(_, b)| !b.is_finite()) {
        return Err(Error::Parameter(format!(
            "b[{}] = {b} must be finite",
            i + 1
        )));
    }
    if let Some((i, g)) = gains.iter().enumerate().find(|(_, g)| !(**g > 0.0)) {
        return Err(Error::Input(format!(
            "g[{}] = {g} must be strictly positive",
            i + 1
        )));
    }
    Ok(TransformFamily {
        scale,
        offset,
        gains,
        rate,
    })
}

/// The `a = 1, b = 0` member: `phi_t = r_{g_t}^{-1}`.
pub fn canonical_transform<'r>(
    instance: &ScenarioInstance,
    rate: &'r dyn RateFunction,
) -> TransformFamily<'r> {
    let t = instance.horizon();
    build_transform(vec![1.0; t], vec![0.0; t], rate, instance.gains().to_vec())
        .expect("canonical coefficients satisfy the convexity condition")
}

impl TransformFamily<'_> {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// `phi_t(q)` for 0-based slot index `t`.
    pub fn forward(&self, t: usize, q: f64) -> Result<f64> {
        let arg = self.scale[t] * q + self.offset[t];
        if arg > MAX_RATE_ARGUMENT {
            return Err(Error::Range(format!(
                "rate argument {arg} in slot {} exceeds {MAX_RATE_ARGUMENT}",
                t + 1
            )));
        }
        Ok(self.rate.inverse(arg, self.gains[t]))
    }

    /// Inverse of [`forward`](Self::forward): `(r_{g_t}(p) - b_t) / a_t`.
    pub fn pullback(&self, t: usize, power: f64) -> f64 {
        (self.rate.rate(power, self.gains[t]) - self.offset[t]) / self.scale[t]
    }

    /// `r_{g_t}(phi_t(q))`, affine in `q`.
    pub fn composed_rate(&self, t: usize, q: f64) -> Result<f64> {
        Ok(self.rate.rate(self.forward(t, q)?, self.gains[t]))
    }
}

/// Maps transformed variables back to transmit powers slot by slot.
pub fn map_policy(transform: &TransformFamily<'_>, q: &RatePolicy) -> Result<PowerPolicy> {
    if q.len() != transform.len() {
        return Err(Error::Input(format!(
            "rate policy has {} slots, transform has {}",
            q.len(),
            transform.len()
        )));
    }
    let mut powers = Vec::with_capacity(q.len());
    for (t, &qt) in q.as_slice().iter().enumerate() {
        if !(qt >= 0.0) {
            return Err(Error::Input(format!(
                "q[{}] = {qt} must be nonnegative",
                t + 1
            )));
        }
        // exp_m1 can return -0.0 or a tiny negative for subnormal offsets.
        powers.push(transform.forward(t, qt)?.max(0.0));
    }
    PowerPolicy::new(powers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LogRate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single(a: f64, b: f64, g: f64) -> TransformFamily<'static> {
        build_transform(vec![a], vec![b], &LogRate, vec![g]).unwrap()
    }

    #[test]
    fn canonical_point_values() {
        let f = single(1.0, 0.0, 1.0);
        assert_eq!(f.forward(0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f.forward(0, 2f64.ln()).unwrap(), 1.0, epsilon = 1e-15);
        let f = single(1.0, 0.0, 2.0);
        assert_abs_diff_eq!(f.forward(0, 3f64.ln()).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scaled_member() {
        let f = single(2.0, 0.0, 1.0);
        assert_abs_diff_eq!(
            f.forward(0, 1.0).unwrap(),
            2f64.exp() - 1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(f.forward(0, 1.0).unwrap(), 6.38906, epsilon = 1e-5);
    }

    #[test]
    fn nonpositive_slope_rejected() {
        for a in [0.0, -1.0, f64::NAN] {
            let err = build_transform(vec![a], vec![0.0], &LogRate, vec![1.0]).unwrap_err();
            assert!(matches!(err, Error::Parameter(_)));
        }
    }

    #[test]
    fn forward_map_range_guard() {
        let f = single(1.0, 0.0, 1.0);
        assert!(f.forward(0, 700.0).is_ok());
        assert!(matches!(f.forward(0, 700.5), Err(Error::Range(_))));
    }

    #[test]
    fn map_policy_examples() {
        let s =
            ScenarioInstance::new(0.0, 0.0, vec![0.0; 2], vec![0.0; 2], vec![1.0, 1.0]).unwrap();
        let f = canonical_transform(&s, &LogRate);
        let p = map_policy(&f, &RatePolicy::zeros(2)).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0]);

        let q = RatePolicy::new(vec![(8.0f64 / 3.0).ln(), (4.0f64 / 3.0).ln()]).unwrap();
        let p = map_policy(&f, &q).unwrap();
        assert_abs_diff_eq!(p[0], 5.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 1.0 / 3.0, epsilon = 1e-14);

        let s =
            ScenarioInstance::new(0.0, 0.0, vec![0.0; 2], vec![0.0; 2], vec![2.0, 4.0]).unwrap();
        let f = canonical_transform(&s, &LogRate);
        let q = RatePolicy::new(vec![3f64.ln(), 5f64.ln()]).unwrap();
        let p = map_policy(&f, &q).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn negative_rate_rejected() {
        let f = single(1.0, 0.0, 1.0);
        let q = RatePolicy::new_unchecked(vec![-0.5]);
        assert!(matches!(map_policy(&f, &q), Err(Error::Input(_))));
    }

    #[test]
    fn domain_equivalence_on_samples() {
        let f = single(1.0, 0.0, 1.7);
        for q in [-2.0, -1e-9, 0.0, 1e-12, 0.5, 10.0] {
            let p = f.forward(0, q).unwrap();
            assert_eq!(p >= 0.0, q >= 0.0, "q = {q}, p = {p}");
        }
    }

    #[test]
    fn canonical_inverse_is_convex_on_grid() {
        let h = 1e-3;
        for g in [0.3, 1.0, 5.0] {
            let f = single(1.0, 0.0, g);
            for k in 1..2000 {
                let q = k as f64 * 0.01;
                let second = (f.forward(0, q + h).unwrap() - 2.0 * f.forward(0, q).unwrap()
                    + f.forward(0, q - h).unwrap())
                    / (h * h);
                assert!(second >= -1e-9, "g = {g}, q = {q}, second = {second}");
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_recovers_rate(q in 0.0f64..50.0, g in 0.05f64..20.0) {
            let f = single(1.0, 0.0, g);
            let back = f.pullback(0, f.forward(0, q).unwrap());
            prop_assert!((back - q).abs() <= 1e-12 * q.max(1e-300) + 1e-300);
        }

        #[test]
        fn composition_is_affine(a in 0.01f64..5.0, b in -3.0f64..3.0, q in 0.0f64..10.0, g in 0.05f64..20.0) {
            let f = single(a, b, g);
            let arg = a * q + b;
            prop_assume!(arg > -1.0);
            let got = f.composed_rate(0, q).unwrap();
            prop_assert!((got - arg).abs() <= 1e-12 * (1.0 + arg.abs()), "{got} vs {arg}");
        }
    }
}
