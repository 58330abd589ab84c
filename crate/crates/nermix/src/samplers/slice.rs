//! Univariate slice sampler (Neal 2003), stepping-out plus shrinkage, on the
//! log-density scale. Used for the non-standard variance-ratio conditional.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy)]
pub struct SliceParams {
    /// Initial interval width.
    pub width: f64,
    /// Expansion budget per side; exhausting it is a pathology, not a retry.
    pub max_expansions: u32,
}

impl Default for SliceParams {
    fn default() -> Self {
        SliceParams {
            width: 1.0,
            max_expansions: 50,
        }
    }
}

/// One slice-sampling transition from `x0` under unnormalized `log_density`.
///
/// The target may have bounded support by returning `f64::NEG_INFINITY`
/// outside it; shrinkage contracts the interval at the boundary.
pub fn slice_sample_once<F>(
    log_density: F,
    x0: f64,
    params: SliceParams,
    rng: &mut RngStream,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let f0 = log_density(x0);
    if !f0.is_finite() {
        return Err(Error::SliceFailure(format!(
            "log density not finite at current point {x0}"
        )));
    }
    let level = f0 + rng.random::<f64>().ln();

    // Stepping out.
    let w = params.width;
    let mut lo = x0 - w * rng.random::<f64>();
    let mut hi = lo + w;
    let mut expansions = 0;
    while log_density(lo) > level {
        lo -= w;
        expansions += 1;
        if expansions > params.max_expansions {
            return Err(Error::SliceFailure(format!(
                "left expansion budget exhausted at {lo}"
            )));
        }
    }
    expansions = 0;
    while log_density(hi) > level {
        hi += w;
        expansions += 1;
        if expansions > params.max_expansions {
            return Err(Error::SliceFailure(format!(
                "right expansion budget exhausted at {hi}"
            )));
        }
    }

    // Shrinkage.
    for _ in 0..10_000 {
        let x1 = lo + (hi - lo) * rng.random::<f64>();
        if log_density(x1) > level {
            return Ok(x1);
        }
        if x1 < x0 {
            lo = x1;
        } else {
            hi = x1;
        }
    }
    Err(Error::SliceFailure(
        "shrinkage failed to find an acceptable point".into(),
    ))
}
