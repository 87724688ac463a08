use rand_distr::{Distribution, Normal};

use super::{CerlError, Utility, UtilityFn};
use crate::rng::CounterRng;

const MC_SAMPLES: usize = 200_000;
const MC_SEED: u64 = 0xDE1A7;

/// CE of a Gaussian reward with mean `mu` whose variance grows linearly with
/// the delay: `N(mu, sigma2_per_step * delay)`.
///
/// Closed form for identity (`mu`) and exponential (`mu - λσ²d/2`); power
/// utilities use a fixed-seed Monte Carlo estimate and fail if a sample falls
/// below zero.
pub fn delayed_reward_ce(mu: f64, sigma2_per_step: f64, delay: u32, u: &UtilityFn) -> Result<f64, CerlError> {
    u.validate()?;
    if !(sigma2_per_step >= 0.0) {
        return Err(CerlError::InvalidArgument("sigma2_per_step must be >= 0".into()));
    }
    let variance = sigma2_per_step * delay as f64;
    if variance == 0.0 {
        u.value(mu)?;
        return Ok(mu);
    }
    match *u {
        UtilityFn::Identity => Ok(mu),
        UtilityFn::Exponential { lambda } => Ok(mu - lambda * variance / 2.0),
        UtilityFn::Power { .. } => {
            let normal = Normal::new(mu, variance.sqrt())
                .map_err(|e| CerlError::InvalidArgument(e.to_string()))?;
            let mut rng = CounterRng::keyed(&[MC_SEED, delay as u64]);
            let samples: Vec<f64> = (0..MC_SAMPLES).map(|_| normal.sample(&mut rng)).collect();
            u.ce_samples(&samples)
        }
    }
}
