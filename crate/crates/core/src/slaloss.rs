//! Training losses and SLA metrics.
//!
//! Errors are always `prediction - actual`: a negative error means the
//! provisioned capacity fell short of demand (an SLA violation), a positive
//! error is overprovisioned capacity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("metric needs at least one error sample")]
    EmptyInput,
    #[error("invalid loss parameter: {0}")]
    InvalidParameter(String),
}

/// Which loss a model is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossSpec<T> {
    /// Weighted MAE: underprovisioning costs `w` per unit, overprovisioning 1.
    Wmae { w: T },
    Mae,
    Mse,
    Huber { delta: T },
    LogCosh,
}

impl<T: Scalar> LossSpec<T> {
    pub fn wmae(w: T) -> Result<Self, LossError> {
        if !(w >= T::one()) {
            return Err(LossError::InvalidParameter(format!("wMAE weight must be >= 1, got {w}")));
        }
        Ok(LossSpec::Wmae { w })
    }

    pub fn huber(delta: T) -> Result<Self, LossError> {
        if !(delta > T::zero()) {
            return Err(LossError::InvalidParameter(format!("Huber delta must be > 0, got {delta}")));
        }
        Ok(LossSpec::Huber { delta })
    }

    /// Short lowercase name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Wmae { .. } => "wmae",
            LossSpec::Mae => "mae",
            LossSpec::Mse => "mse",
            LossSpec::Huber { .. } => "huber",
            LossSpec::LogCosh => "logcosh",
        }
    }

    pub fn is_sla_based(&self) -> bool {
        matches!(self, LossSpec::Wmae { .. })
    }

    pub fn value(&self, e: T) -> T {
        loss_value(*self, e)
    }

    pub fn grad(&self, e: T) -> T {
        loss_grad(*self, e)
    }
}

/// Pointwise loss of a single prediction error.
pub fn loss_value<T: Scalar>(spec: LossSpec<T>, e: T) -> T {
    match spec {
        LossSpec::Wmae { w } => {
            if e <= T::zero() {
                w * e.abs()
            } else {
                e
            }
        }
        LossSpec::Mae => e.abs(),
        LossSpec::Mse => e * e,
        LossSpec::Huber { delta } => {
            let a = e.abs();
            if a <= delta {
                T::of(0.5) * e * e
            } else {
                delta * (a - T::of(0.5) * delta)
            }
        }
        LossSpec::LogCosh => {
            // log(cosh(e)) = |e| + log(1 + exp(-2|e|)) - log 2, stable for large |e|
            let a = e.abs();
            a + (-(a + a)).exp().ln_1p() - T::of(std::f64::consts::LN_2)
        }
    }
}

/// Derivative of [`loss_value`] with respect to the prediction.
///
/// The absolute-value kink of MAE/wMAE takes subgradient 0 at `e == 0`.
pub fn loss_grad<T: Scalar>(spec: LossSpec<T>, e: T) -> T {
    match spec {
        LossSpec::Wmae { w } => {
            if e < T::zero() {
                -w
            } else if e > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        LossSpec::Mae => {
            if e < T::zero() {
                -T::one()
            } else if e > T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        LossSpec::Mse => e + e,
        LossSpec::Huber { delta } => {
            if e.abs() <= delta {
                e
            } else {
                delta * e.signum()
            }
        }
        LossSpec::LogCosh => e.tanh(),
    }
}

/// Fraction of samples with strictly negative error.
pub fn sla_violation_rate<T: Scalar>(errors: &[T]) -> Result<T, LossError> {
    if errors.is_empty() {
        return Err(LossError::EmptyInput);
    }
    let violations = errors.iter().filter(|&&e| e < T::zero()).count();
    Ok(T::of(violations as f64) / T::of(errors.len() as f64))
}

/// Mean of the strictly positive errors; zero when there are none.
pub fn overprovisioning_volume<T: Scalar>(errors: &[T]) -> Result<T, LossError> {
    if errors.is_empty() {
        return Err(LossError::EmptyInput);
    }
    let (sum, count) = errors
        .iter()
        .filter(|&&e| e > T::zero())
        .fold((T::zero(), 0usize), |(s, c), &e| (s + e, c + 1));
    if count == 0 {
        Ok(T::zero())
    } else {
        Ok(sum / T::of(count as f64))
    }
}

/// Mean wMAE over the samples.
pub fn sla_based_loss<T: Scalar>(errors: &[T], w: T) -> Result<T, LossError> {
    mean_loss(errors, LossSpec::Wmae { w })
}

pub fn mean_loss<T: Scalar>(errors: &[T], spec: LossSpec<T>) -> Result<T, LossError> {
    if errors.is_empty() {
        return Err(LossError::EmptyInput);
    }
    let total: T = errors.iter().map(|&e| loss_value(spec, e)).sum();
    Ok(total / T::of(errors.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_kinds() -> Vec<LossSpec<f64>> {
        vec![
            LossSpec::Wmae { w: 1.0 },
            LossSpec::Wmae { w: 3.0 },
            LossSpec::Wmae { w: 8.0 },
            LossSpec::Mae,
            LossSpec::Mse,
            LossSpec::Huber { delta: 1.0 },
            LossSpec::Huber { delta: 0.3 },
            LossSpec::LogCosh,
        ]
    }

    #[test]
    fn wmae_branches() {
        let l = LossSpec::Wmae { w: 3.0 };
        assert_eq!(l.value(-2.0), 6.0);
        assert_eq!(LossSpec::Wmae { w: 17.0 }.value(2.0), 2.0);
        assert_eq!(l.value(0.0), 0.0);
        for e in [-3.5, -0.1, 0.0, 0.2, 9.0] {
            assert_eq!(LossSpec::Wmae { w: 1.0 }.value(e), LossSpec::<f64>::Mae.value(e));
        }
    }

    #[test]
    fn gradients_at_named_points() {
        assert_eq!(LossSpec::Wmae { w: 5.0 }.grad(-0.1), -5.0);
        assert_eq!(LossSpec::Wmae { w: 5.0 }.grad(0.1), 1.0);
        assert_eq!(LossSpec::Wmae { w: 5.0 }.grad(0.0), 0.0);
        assert_eq!(LossSpec::<f64>::Mse.grad(3.0), 6.0);
    }

    #[test]
    fn huber_and_logcosh_reference_values() {
        let h = LossSpec::Huber { delta: 1.0 };
        assert_eq!(h.value(0.5), 0.125);
        assert_eq!(h.value(3.0), 2.5);
        let lc = LossSpec::<f64>::LogCosh;
        for e in [-4.0f64, -0.7, 0.0, 0.3, 2.0] {
            assert!((lc.value(e) - e.cosh().ln()).abs() < 1e-12);
        }
        // no overflow where cosh itself would
        assert!((lc.value(1000.0) - (1000.0 - std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn violation_rate_examples() {
        assert_eq!(sla_violation_rate(&[-1.0, 1.0, 1.0, 1.0]).unwrap(), 0.25);
        assert_eq!(sla_violation_rate(&[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sla_violation_rate(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(sla_violation_rate::<f64>(&[]), Err(LossError::EmptyInput));
    }

    #[test]
    fn overprovisioning_examples() {
        assert_eq!(overprovisioning_volume(&[2.0, 4.0, -1.0]).unwrap(), 3.0);
        assert_eq!(overprovisioning_volume(&[-2.0, -4.0]).unwrap(), 0.0);
        assert_eq!(overprovisioning_volume(&[5.0]).unwrap(), 5.0);
        assert_eq!(overprovisioning_volume::<f64>(&[]), Err(LossError::EmptyInput));
    }

    #[test]
    fn sla_loss_examples() {
        assert_eq!(sla_based_loss(&[-1.0, 1.0], 3.0).unwrap(), 2.0);
        assert_eq!(sla_based_loss(&[0.0, 0.0, 0.0], 4.0).unwrap(), 0.0);
        let errs = [-1.5, 0.5, 2.0, -0.25];
        assert_eq!(sla_based_loss(&errs, 1.0).unwrap(), mean_loss(&errs, LossSpec::Mae).unwrap());
        assert_eq!(sla_based_loss::<f64>(&[], 2.0), Err(LossError::EmptyInput));
    }

    #[test]
    fn constructors_validate() {
        assert!(LossSpec::wmae(0.5f64).is_err());
        assert!(LossSpec::wmae(f64::NAN).is_err());
        assert!(LossSpec::wmae(1.0f64).is_ok());
        assert!(LossSpec::huber(0.0f64).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        assert_eq!(LossSpec::Wmae { w: 3.0f32 }.value(-2.0), 6.0f32);
        assert_eq!(sla_violation_rate(&[-1.0f32, 1.0]).unwrap(), 0.5f32);
    }

    proptest! {
        #[test]
        fn wmae_is_scaled_mae(w in 1.0f64..50.0, e in -1e3f64..1e3) {
            let v = LossSpec::Wmae { w }.value(e);
            let mae = LossSpec::<f64>::Mae.value(e);
            if e < 0.0 {
                prop_assert_eq!(v, w * mae);
            } else {
                prop_assert_eq!(v, mae);
            }
        }

        #[test]
        fn grad_matches_central_difference(e in prop_oneof![-20.0f64..-1e-3, 1e-3f64..20.0]) {
            let h = 1e-4;
            for spec in all_kinds() {
                // skip the Huber seam where the second derivative jumps
                if let LossSpec::Huber { delta } = spec {
                    if (e.abs() - delta).abs() < 2.0 * h { continue; }
                }
                let fd = (spec.value(e + h) - spec.value(e - h)) / (2.0 * h);
                let scale = spec.grad(e).abs().max(1.0);
                prop_assert!((fd - spec.grad(e)).abs() <= 1e-8 * scale,
                    "{:?} e={} fd={} grad={}", spec, e, fd, spec.grad(e));
            }
        }

        #[test]
        fn sla_loss_monotone_in_weight(
            errs in proptest::collection::vec(-10.0f64..10.0, 1..40),
            w1 in 1.0f64..20.0, dw in 0.0f64..20.0,
        ) {
            let mut errs = errs;
            errs.push(-0.5);
            prop_assert!(sla_based_loss(&errs, w1 + dw).unwrap() >= sla_based_loss(&errs, w1).unwrap());
        }

        #[test]
        fn metric_ranges(errs in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let r = sla_violation_rate(&errs).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(overprovisioning_volume(&errs).unwrap() >= 0.0);
        }
    }
}
