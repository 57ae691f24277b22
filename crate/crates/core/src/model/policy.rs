use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! nonneg_sequence {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Rejects negative or non-finite entries.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                for (i, &v) in values.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::Input(format!(
                            concat!($what, "[{}] = {} must be finite and nonnegative"),
                            i + 1,
                            v
                        )));
                    }
                }
                Ok(Self(values))
            }

            /// Wraps arbitrary values, e.g. perturbed iterates fed to checkers.
            pub fn new_unchecked(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;

            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

nonneg_sequence!(
    /// Per-slot transmit powers `p_1..p_T`.
    PowerPolicy,
    "p"
);

nonneg_sequence!(
    /// Per-slot rate variables `q_1..q_T` of the transformed problem.
    RatePolicy,
    "q"
);
