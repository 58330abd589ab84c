//! Scalar random-variate primitives.
//!
//! Gamma is parameterized by (shape, rate) throughout the crate, so the mean
//! is shape/rate; `rand_distr` wants (shape, scale) and the conversion lives
//! here and nowhere else.

use rand::Rng;
use rand_distr::Distribution;
use statrs::distribution::{Beta as BetaCdf, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A standard scalar distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Draw one variate from `dist`.
pub fn draw_standard(rng: &mut RngStream, dist: Dist) -> Result<f64> {
    match dist {
        Dist::Normal { mean, sd } => {
            if !(sd >= 0.0 && sd.is_finite() && mean.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Normal(mean={mean}, sd={sd})"
                )));
            }
            Ok(rand_distr::Normal::new(mean, sd)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng))
        }
        Dist::Gamma { shape, rate } => {
            if !(shape > 0.0 && rate > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Gamma(shape={shape}, rate={rate})"
                )));
            }
            Ok(rand_distr::Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng))
        }
        Dist::Beta { a, b } => {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidParameter(format!("Beta(a={a}, b={b})")));
            }
            Ok(rand_distr::Beta::new(a, b)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng))
        }
        Dist::Bernoulli { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("Bernoulli(p={p})")));
            }
            Ok(if rng.random_bool(p) { 1.0 } else { 0.0 })
        }
        Dist::Uniform { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!("Uniform({lo}, {hi})")));
            }
            Ok(lo + (hi - lo) * rng.random::<f64>())
        }
    }
}

/// Draw from Beta(a, b) restricted to `(lower, 1)` by inverting the CDF on
/// the truncated region. Unlike rejection this never stalls when nearly all
/// Beta mass sits below `lower`.
pub fn draw_truncated_beta(rng: &mut RngStream, a: f64, b: f64, lower: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncated Beta(a={a}, b={b})"
        )));
    }
    if !(0.0..1.0).contains(&lower) {
        return Err(Error::InvalidParameter(format!(
            "truncation point {lower} outside [0, 1)"
        )));
    }
    let beta = BetaCdf::new(a, b).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mass_below = if lower == 0.0 { 0.0 } else { beta.cdf(lower) };
    let u: f64 = rng.random();
    let target = mass_below + u * (1.0 - mass_below);
    let x = beta.inverse_cdf(target.clamp(0.0, 1.0));
    // Open-interval guard: the draw feeds log(p) and log(1-p) downstream.
    let eps = 1e-12;
    Ok(x.clamp(lower + eps * (1.0 - lower), 1.0 - eps))
}
