//! Per-parameter full-conditional draws for the three model variants, plus
//! the reusable variate primitives they are built from.
//!
//! Every draw is a pure function of `(context, stream)`: contexts are
//! read-only views and streams are never shared between workers, so chains
//! and replicates can run concurrently.

pub mod density;
pub mod dist;
pub mod slice;

use std::cell::Cell;

use nalgebra::DVector;
use rand_distr::Distribution;

use crate::domain::{ChainState, Dataset, Variant};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub use density::{
    area_effect_params, beta_gaussian_params, eta_coefficients, indicator_counts,
    indicator_probabilities, log_joint, sigma1_rate,
};
pub use dist::{draw_standard, draw_truncated_beta, Dist};
pub use slice::{slice_sample_once, SliceParams};

/// Precisions are floored here before inversion; hitting the floor bumps a
/// diagnostic counter instead of silently producing an infinite variance.
pub const PRECISION_FLOOR: f64 = 1e-300;

/// Read-only view of the data and the current state minus the parameter
/// being drawn, plus a counter for numerical-floor events.
pub struct ConditionalContext<'a> {
    pub data: &'a Dataset,
    pub state: &'a ChainState,
    pub clamp_events: &'a Cell<u64>,
}

impl<'a> ConditionalContext<'a> {
    pub fn new(data: &'a Dataset, state: &'a ChainState, clamp_events: &'a Cell<u64>) -> Self {
        ConditionalContext {
            data,
            state,
            clamp_events,
        }
    }

    fn variance_from_precision(&self, tau: f64) -> f64 {
        if !(PRECISION_FLOOR..=1.0 / PRECISION_FLOOR).contains(&tau) {
            self.clamp_events.set(self.clamp_events.get() + 1);
            1.0 / tau.clamp(PRECISION_FLOOR, 1.0 / PRECISION_FLOOR)
        } else {
            1.0 / tau
        }
    }
}

/// Draw the regression coefficients from N_q(mu, S) with
/// S = [sum w x x^T]^-1 and mu = S sum w (y - v) x.
pub fn draw_beta_coeff(ctx: &ConditionalContext, rng: &mut RngStream) -> Result<Vec<f64>> {
    let (precision, mean) = beta_gaussian_params(ctx.data, ctx.state)?;
    let chol = nalgebra::Cholesky::new(precision)
        .ok_or_else(|| Error::SingularPrecision("beta precision".into()))?;
    let q = ctx.data.q();
    let std_normal = rand_distr::StandardNormal;
    let shocks = DVector::from_iterator(q, (0..q).map(|_| std_normal.sample(rng)));
    // With precision P = L L^T, solving L^T s = u gives cov(s) = P^-1.
    let s = chol
        .l()
        .transpose()
        .solve_upper_triangular(&shocks)
        .ok_or_else(|| Error::SingularPrecision("triangular solve failed".into()))?;
    Ok((mean + s).iter().copied().collect())
}

/// Draw all area effects independently from their normal conditionals.
pub fn draw_area_effects(ctx: &ConditionalContext, rng: &mut RngStream) -> Vec<f64> {
    let std_normal = rand_distr::StandardNormal;
    area_effect_params(ctx.data, ctx.state)
        .into_iter()
        .map(|(mean, var)| {
            let u: f64 = std_normal.sample(rng);
            mean + var.sqrt() * u
        })
        .collect()
}

/// Draw the component indicators z_ij ~ Bernoulli(p*_ij).
pub fn draw_indicators(ctx: &ConditionalContext, rng: &mut RngStream) -> Vec<u8> {
    use rand::Rng;
    indicator_probabilities(ctx.data, ctx.state)
        .into_iter()
        .map(|p| u8::from(rng.random_bool(p)))
        .collect()
}

/// Draw the mixing proportion: Beta(sum z + 1, sum (1-z) + 1), truncated to
/// (1/2, 1) for GDM and untruncated for CDM.
pub fn draw_pe(ctx: &ConditionalContext, rng: &mut RngStream, variant: Variant) -> Result<f64> {
    let lower = match variant {
        Variant::Gdm => 0.5,
        Variant::Cdm => 0.0,
        Variant::Dg => {
            return Err(Error::VariantMismatch(
                "DG has no mixing proportion".into(),
            ))
        }
    };
    let (s1, s0) = indicator_counts(&ctx.state.z);
    draw_truncated_beta(rng, s1 + 1.0, s0 + 1.0, lower)
}

/// Draw sigma_v^2 via its precision: 1/sigma_v^2 ~ Gamma(m/2 - 1, sum v^2 / 2).
pub fn draw_sigma_v(ctx: &ConditionalContext, rng: &mut RngStream) -> Result<f64> {
    let m = ctx.data.m();
    let shape = m as f64 / 2.0 - 1.0;
    if shape <= 0.0 {
        return Err(Error::DegenerateState(format!(
            "sigma_v^2 conditional needs m > 2, got m = {m}"
        )));
    }
    let sum_v_sq: f64 = ctx.state.v.iter().map(|v| v * v).sum();
    if sum_v_sq <= 0.0 {
        return Err(Error::DegenerateState(
            "all area effects are exactly zero".into(),
        ));
    }
    let tau = draw_standard(
        rng,
        Dist::Gamma {
            shape,
            rate: sum_v_sq / 2.0,
        },
    )?;
    Ok(ctx.variance_from_precision(tau))
}

/// Draw sigma_1^2 via its precision: 1/sigma_1^2 ~ Gamma(n/2, rate) with
/// rate = sum r^2 (z + (1-z)/eta) / 2. DG is the all-z, eta = 1 case.
pub fn draw_sigma1(ctx: &ConditionalContext, rng: &mut RngStream) -> Result<f64> {
    let rate = sigma1_rate(ctx.data, ctx.state);
    if rate <= 0.0 {
        return Err(Error::DegenerateState(
            "all residuals are exactly zero".into(),
        ));
    }
    let tau = draw_standard(
        rng,
        Dist::Gamma {
            shape: ctx.data.n() as f64 / 2.0,
            rate,
        },
    )?;
    Ok(ctx.variance_from_precision(tau))
}

/// Draw the variance ratio eta by slice sampling on log eta.
///
/// The CDM support eta > 1 is enforced by the target returning negative
/// infinity at and below the boundary; shrinkage then contracts onto (1, inf).
pub fn draw_eta(ctx: &ConditionalContext, rng: &mut RngStream, variant: Variant) -> Result<f64> {
    if variant == Variant::Dg {
        return Err(Error::VariantMismatch("DG has no variance ratio".into()));
    }
    let (a, b) = eta_coefficients(ctx.data, ctx.state);
    let target = move |t: f64| density::log_cond_eta(variant, a, b, t.exp()) + t;
    let t0 = ctx.state.eta.ln();
    let t1 = slice_sample_once(target, t0, SliceParams::default(), rng)?;
    let mut eta = t1.exp();
    if !(PRECISION_FLOOR..=1.0 / PRECISION_FLOOR).contains(&eta) {
        ctx.clamp_events.set(ctx.clamp_events.get() + 1);
        eta = eta.clamp(PRECISION_FLOOR, 1.0 / PRECISION_FLOOR);
    }
    if variant == Variant::Cdm && eta <= 1.0 {
        // t1 > 0 is guaranteed, but exp can round to exactly 1.
        eta = 1.0f64.next_up();
    }
    Ok(eta)
}
