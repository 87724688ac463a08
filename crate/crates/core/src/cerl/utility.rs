use serde::{Deserialize, Serialize};

use super::{CerlError, OutcomeDist};

/// A strictly increasing utility with an explicit inverse.
///
/// The provided [`Utility::ce`] evaluates `U⁻¹(Σ pᵢ U(vᵢ))` directly.
/// Implementations may override it with a numerically safer route.
pub trait Utility {
    fn value(&self, x: f64) -> Result<f64, CerlError>;
    fn inverse(&self, y: f64) -> Result<f64, CerlError>;

    fn ce(&self, dist: &OutcomeDist) -> Result<f64, CerlError> {
        self.ce_weighted(dist.outcomes())
    }

    /// CE of `(value, prob)` pairs without re-validating the weights.
    fn ce_weighted(&self, pairs: &[(f64, f64)]) -> Result<f64, CerlError> {
        let mut expected = 0.0;
        for &(v, p) in pairs {
            expected += p * self.value(v)?;
        }
        self.inverse(expected)
    }
}

/// Identity, CARA exponential `-exp(-λx)`, or power `x^η` on `x >= 0`.
///
/// Round trips `U⁻¹(U(x)) = x` hold to 1e-9 for `|λx| <= 700` (exponential)
/// and `0 <= x <= 1e4` (power).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
#[derive(Default)]
pub enum UtilityFn {
    #[default]
    Identity,
    Exponential { lambda: f64 },
    Power { eta: f64 },
}

/// Largest `|λx|` for which the exponential utility is evaluated directly.
pub const EXP_SAFE_RANGE: f64 = 700.0;


impl UtilityFn {
    pub fn validate(&self) -> Result<(), CerlError> {
        match *self {
            UtilityFn::Identity => Ok(()),
            UtilityFn::Exponential { lambda } if lambda > 0.0 && lambda.is_finite() => Ok(()),
            UtilityFn::Exponential { .. } => {
                Err(CerlError::InvalidParameter("exponential lambda must be > 0".into()))
            }
            UtilityFn::Power { eta } if eta > 0.0 && eta < 1.0 => Ok(()),
            UtilityFn::Power { .. } => {
                Err(CerlError::InvalidParameter("power eta must lie in (0, 1)".into()))
            }
        }
    }

    /// True when the utility is strictly concave.
    pub fn is_risk_averse(&self) -> bool {
        !matches!(self, UtilityFn::Identity)
    }

    /// CE of equally weighted samples.
    pub fn ce_samples(&self, samples: &[f64]) -> Result<f64, CerlError> {
        if samples.is_empty() {
            return Err(CerlError::InvalidDist("no samples".into()));
        }
        let w = 1.0 / samples.len() as f64;
        let pairs: Vec<(f64, f64)> = samples.iter().map(|&v| (v, w)).collect();
        self.ce_weighted(&pairs)
    }

    fn domain_error(&self, x: f64) -> CerlError {
        CerlError::Domain { value: x, utility: *self }
    }
}

impl Utility for UtilityFn {
    fn value(&self, x: f64) -> Result<f64, CerlError> {
        if x.is_nan() {
            return Err(self.domain_error(x));
        }
        match *self {
            UtilityFn::Identity => Ok(x),
            UtilityFn::Exponential { lambda } => {
                if -lambda * x > EXP_SAFE_RANGE {
                    return Err(self.domain_error(x));
                }
                Ok(-(-lambda * x).exp())
            }
            UtilityFn::Power { eta } => {
                if x < 0.0 {
                    return Err(self.domain_error(x));
                }
                Ok(x.powf(eta))
            }
        }
    }

    fn inverse(&self, y: f64) -> Result<f64, CerlError> {
        match *self {
            UtilityFn::Identity => Ok(y),
            UtilityFn::Exponential { lambda } => {
                if !(y < 0.0) {
                    return Err(self.domain_error(y));
                }
                Ok(-(-y).ln() / lambda)
            }
            UtilityFn::Power { eta } => {
                if !(y >= 0.0) {
                    return Err(self.domain_error(y));
                }
                Ok(y.powf(1.0 / eta))
            }
        }
    }

    fn ce_weighted(&self, pairs: &[(f64, f64)]) -> Result<f64, CerlError> {
        match *self {
            UtilityFn::Identity => Ok(pairs.iter().map(|&(v, p)| v * p).sum()),
            UtilityFn::Exponential { lambda } => {
                // CE = -(1/λ) ln Σ pᵢ exp(-λ vᵢ), with the exponent shifted by its max.
                let shift = pairs
                    .iter()
                    .map(|&(v, _)| -lambda * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                if !shift.is_finite() {
                    return Err(self.domain_error(shift));
                }
                let sum: f64 = pairs.iter().map(|&(v, p)| p * (-lambda * v - shift).exp()).sum();
                Ok(-(shift + sum.ln()) / lambda)
            }
            UtilityFn::Power { .. } => {
                let mut expected = 0.0;
                for &(v, p) in pairs {
                    expected += p * self.value(v)?;
                }
                self.inverse(expected)
            }
        }
    }
}

/// `scale · U + shift` with `scale > 0`: same preferences, same CE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine<U> {
    pub inner: U,
    pub scale: f64,
    pub shift: f64,
}

impl<U: Utility> Utility for Affine<U> {
    fn value(&self, x: f64) -> Result<f64, CerlError> {
        Ok(self.scale * self.inner.value(x)? + self.shift)
    }

    fn inverse(&self, y: f64) -> Result<f64, CerlError> {
        self.inner.inverse((y - self.shift) / self.scale)
    }
}

/// Certainty equivalent `U⁻¹(E[U(X)])`.
pub fn ce(dist: &OutcomeDist, u: &UtilityFn) -> Result<f64, CerlError> {
    u.ce(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(a: f64, b: f64) -> OutcomeDist {
        OutcomeDist::new(vec![(a, 0.5), (b, 0.5)]).unwrap()
    }

    #[test]
    fn identity_is_the_mean() {
        assert_eq!(ce(&two_point(2.0, 0.0), &UtilityFn::Identity).unwrap(), 1.0);
    }

    #[test]
    fn cara_two_point_closed_form() {
        let got = ce(&two_point(1.0, 0.0), &UtilityFn::Exponential { lambda: 1.0 }).unwrap();
        let want = -((1.0 + (-1.0f64).exp()) / 2.0).ln();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.37988).abs() < 1e-5);
    }

    #[test]
    fn cara_survives_huge_outcomes() {
        let u = UtilityFn::Exponential { lambda: 1.0 };
        let got = ce(&two_point(-5000.0, -5000.0), &u).unwrap();
        assert!((got + 5000.0).abs() < 1e-9);
        assert!(u.value(-5000.0).is_err());
    }

    #[test]
    fn power_rejects_negative_outcomes() {
        let u = UtilityFn::Power { eta: 0.5 };
        assert!(matches!(ce(&two_point(-1.0, 4.0), &u), Err(CerlError::Domain { .. })));
        let got = ce(&two_point(0.0, 4.0), &u).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trips_in_documented_ranges() {
        let cases = [
            (UtilityFn::Identity, -1e6, 1e6),
            (UtilityFn::Exponential { lambda: 0.5 }, -1400.0, 1400.0),
            (UtilityFn::Exponential { lambda: 2.0 }, -350.0, 350.0),
            (UtilityFn::Power { eta: 0.3 }, 0.0, 1e4),
        ];
        for (u, lo, hi) in cases {
            for i in 0..=200 {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                let back = u.inverse(u.value(x).unwrap()).unwrap();
                assert!((back - x).abs() < 1e-9, "{u:?} at {x}: {back}");
            }
        }
    }

    #[test]
    fn parameters_are_checked() {
        assert!(UtilityFn::Exponential { lambda: 0.0 }.validate().is_err());
        assert!(UtilityFn::Power { eta: 1.0 }.validate().is_err());
        assert!(UtilityFn::Power { eta: 0.5 }.validate().is_ok());
    }

    #[test]
    fn serde_shape() {
        let u: UtilityFn = serde_json::from_str(r#"{"kind":"exponential","lambda":2.0}"#).unwrap();
        assert_eq!(u, UtilityFn::Exponential { lambda: 2.0 });
        let u: UtilityFn = serde_json::from_str(r#"{"kind":"identity"}"#).unwrap();
        assert_eq!(u, UtilityFn::Identity);
    }
}
