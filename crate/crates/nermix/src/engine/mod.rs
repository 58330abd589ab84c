//! The Gibbs loop: initialization, the systematic-scan update schedule,
//! burn-in/thinning, multi-chain orchestration, and draw collection.
//!
//! One chain is strictly sequential; chains are independent work units with
//! per-chain seed streams, merged in chain order, so a fit is bit-identical
//! for a fixed (seed, n_chains) no matter how chains are scheduled.

pub mod diagnostics;

use std::cell::Cell;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand_distr::Distribution;

use crate::domain::{AreaFrame, ChainDraws, ChainState, Dataset, ModelSpec, Variant};
use crate::error::{Error, Result};
use crate::rng::{tag, RngStream};
use crate::samplers::{self, ConditionalContext};

/// Diagnostic switches for the update schedule. Freezing parameters turns
/// the chain into a conditional sampler used by the exactness tests; normal
/// fits use the default.
#[derive(Debug, Clone, Copy, Default)]
pub struct GibbsOptions {
    /// Keep the indicators at their all-ones initialization.
    pub freeze_z: bool,
    /// Initialize eta at this value and never update it.
    pub freeze_eta_at: Option<f64>,
}

/// Per-parameter convergence diagnostics.
#[derive(Debug, Clone)]
pub struct ParamDiagnostic {
    pub name: String,
    pub ess: f64,
    pub split_rhat: f64,
}

/// A completed fit: merged draws plus diagnostics computed on exactly the
/// retained draws.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub draws: ChainDraws,
    pub diagnostics: Vec<ParamDiagnostic>,
    /// Wall-clock time; reported on stderr only, never in machine outputs.
    pub wall_time: Duration,
}

fn ols(data: &Dataset) -> Result<Vec<f64>> {
    let (n, q) = (data.n(), data.q());
    let mut xtx = DMatrix::zeros(q, q);
    let mut xty = DVector::zeros(q);
    for u in 0..n {
        let x = data.x_row(u);
        for i in 0..q {
            xty[i] += x[i] * data.y(u);
            for j in 0..q {
                xtx[(i, j)] += x[i] * x[j];
            }
        }
    }
    let chol = nalgebra::Cholesky::new(xtx)
        .ok_or_else(|| Error::SingularPrecision("OLS normal equations".into()))?;
    Ok(chol.solve(&xty).iter().copied().collect())
}

/// Build the starting state: OLS coefficients, half-shrunk per-area mean
/// residuals as effects, moment-based variances. Chains beyond the first
/// jitter the coefficients and log-variances with N(0, 0.1^2).
pub fn initialize(
    data: &Dataset,
    spec: &ModelSpec,
    chain_index: usize,
    rng: &mut RngStream,
) -> Result<ChainState> {
    let beta = ols(data)?;
    let n = data.n();
    let m = data.m();
    let residuals: Vec<f64> = (0..n).map(|u| data.y(u) - data.dot_x(u, &beta)).collect();
    let area_means: Vec<f64> = (0..m)
        .map(|a| {
            let units = data.units_of(a);
            if units.is_empty() {
                0.0
            } else {
                units.clone().map(|u| residuals[u]).sum::<f64>() / units.len() as f64
            }
        })
        .collect();
    let v: Vec<f64> = area_means.iter().map(|e| 0.5 * e).collect();
    let dof = n.saturating_sub(data.q()).max(1) as f64;
    let mut sigma1_sq = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    if sigma1_sq <= 0.0 {
        sigma1_sq = 1e-6;
    }
    let mean_of_means = crate::stats::mean(&area_means);
    let between = area_means
        .iter()
        .map(|e| (e - mean_of_means) * (e - mean_of_means))
        .sum::<f64>()
        / m as f64;
    let mut sigma_v_sq = between.max(0.1 * sigma1_sq);

    let (eta, p_e) = match spec.variant {
        Variant::Dg => (1.0, None),
        Variant::Gdm => (4.0, Some(0.75)),
        Variant::Cdm => (4.0, Some(0.9)),
    };

    let mut state = ChainState {
        beta,
        v,
        z: vec![1; n],
        sigma1_sq,
        eta,
        sigma_v_sq,
        p_e,
    };

    if chain_index > 0 {
        let jitter = rand_distr::Normal::new(0.0, 0.1).expect("valid scale");
        for b in state.beta.iter_mut() {
            *b += jitter.sample(rng);
        }
        sigma1_sq = (sigma1_sq.ln() + jitter.sample(rng)).exp();
        sigma_v_sq = (sigma_v_sq.ln() + jitter.sample(rng)).exp();
        state.sigma1_sq = sigma1_sq;
        state.sigma_v_sq = sigma_v_sq;
    }
    Ok(state)
}

/// Map dataset area order onto area-frame rows.
fn frame_rows(data: &Dataset, frame: &AreaFrame) -> Result<Vec<usize>> {
    data.area_ids()
        .iter()
        .map(|id| {
            frame
                .index_of(id)
                .ok_or_else(|| Error::AreaMismatch(format!("area {id} missing from area frame")))
        })
        .collect()
}

/// Run one chain and collect its retained draws.
pub fn run_chain(
    data: &Dataset,
    frame: &AreaFrame,
    spec: &ModelSpec,
    chain_index: usize,
) -> Result<ChainDraws> {
    run_chain_with_options(data, frame, spec, chain_index, GibbsOptions::default())
}

/// [`run_chain`] with diagnostic switches.
pub fn run_chain_with_options(
    data: &Dataset,
    frame: &AreaFrame,
    spec: &ModelSpec,
    chain_index: usize,
    options: GibbsOptions,
) -> Result<ChainDraws> {
    spec.chain.validate()?;
    let cfg = spec.chain;
    let variant = spec.variant;
    let rows = frame_rows(data, frame)?;
    let mut rng = RngStream::derive(cfg.seed, &[tag::CHAIN, chain_index as u64]);
    let mut state = initialize(data, spec, chain_index, &mut rng)?;
    if let Some(eta0) = options.freeze_eta_at {
        state.eta = eta0;
    }

    let (n, m, q) = (data.n(), data.m(), data.q());
    let mixture = variant.is_mixture();
    let clamp = Cell::new(0u64);

    let mut draws = ChainDraws {
        variant,
        config: cfg,
        area_ids: data.area_ids().to_vec(),
        log_scale: data.is_log_scale(),
        beta: vec![Vec::with_capacity(cfg.n_draws); q],
        v: vec![Vec::with_capacity(cfg.n_draws); m],
        sigma1_sq: Vec::with_capacity(cfg.n_draws),
        eta: Vec::with_capacity(cfg.n_draws),
        sigma_v_sq: Vec::with_capacity(cfg.n_draws),
        p_e: if mixture {
            Vec::with_capacity(cfg.n_draws)
        } else {
            Vec::new()
        },
        theta: vec![Vec::with_capacity(cfg.n_draws); m],
        theta_orig: if data.is_log_scale() {
            vec![Vec::with_capacity(cfg.n_draws); m]
        } else {
            Vec::new()
        },
        z_mean: if mixture { vec![0.0; n] } else { Vec::new() },
        pstar_mean: if mixture { vec![0.0; n] } else { Vec::new() },
        n_units: n,
        clamp_events: 0,
    };

    let total = cfg.burn_in + cfg.n_draws * cfg.thin;
    let mut retained = 0usize;
    for iteration in 0..total {
        let mut step = || -> Result<()> {
            // Systematic scan: beta, v, z, p_e, sigma_v^2, sigma_1^2, eta.
            state.beta = {
                let ctx = ConditionalContext::new(data, &state, &clamp);
                samplers::draw_beta_coeff(&ctx, &mut rng)?
            };
            state.v = {
                let ctx = ConditionalContext::new(data, &state, &clamp);
                samplers::draw_area_effects(&ctx, &mut rng)
            };
            if mixture {
                if !options.freeze_z {
                    state.z = {
                        let ctx = ConditionalContext::new(data, &state, &clamp);
                        samplers::draw_indicators(&ctx, &mut rng)
                    };
                }
                state.p_e = Some({
                    let ctx = ConditionalContext::new(data, &state, &clamp);
                    samplers::draw_pe(&ctx, &mut rng, variant)?
                });
            }
            state.sigma_v_sq = {
                let ctx = ConditionalContext::new(data, &state, &clamp);
                samplers::draw_sigma_v(&ctx, &mut rng)?
            };
            state.sigma1_sq = {
                let ctx = ConditionalContext::new(data, &state, &clamp);
                samplers::draw_sigma1(&ctx, &mut rng)?
            };
            if mixture && options.freeze_eta_at.is_none() {
                state.eta = {
                    let ctx = ConditionalContext::new(data, &state, &clamp);
                    samplers::draw_eta(&ctx, &mut rng, variant)?
                };
            }
            state.check(variant)
        };
        step().map_err(|e| Error::ChainFailure {
            chain: chain_index,
            iteration,
            source: Box::new(e),
        })?;

        if iteration >= cfg.burn_in && (iteration - cfg.burn_in).is_multiple_of(cfg.thin) {
            retained += 1;
            for (j, col) in draws.beta.iter_mut().enumerate() {
                col.push(state.beta[j]);
            }
            for (a, col) in draws.v.iter_mut().enumerate() {
                col.push(state.v[a]);
            }
            draws.sigma1_sq.push(state.sigma1_sq);
            draws.eta.push(state.eta);
            draws.sigma_v_sq.push(state.sigma_v_sq);
            if mixture {
                draws.p_e.push(state.p_e.expect("mixture state"));
            }
            #[allow(clippy::needless_range_loop)]
            for a in 0..m {
                let xb: f64 = frame
                    .xbar(rows[a])
                    .iter()
                    .zip(&state.beta)
                    .map(|(x, b)| x * b)
                    .sum();
                let theta = xb + state.v[a];
                draws.theta[a].push(theta);
                if data.is_log_scale() {
                    draws.theta_orig[a].push(theta.exp());
                }
            }
            if mixture {
                let pstar = samplers::indicator_probabilities(data, &state);
                #[allow(clippy::needless_range_loop)]
                for u in 0..n {
                    draws.z_mean[u] += f64::from(state.z[u]);
                    draws.pstar_mean[u] += pstar[u];
                }
            }
        }
    }
    debug_assert_eq!(retained, cfg.n_draws);
    if mixture {
        for acc in draws.z_mean.iter_mut().chain(draws.pstar_mean.iter_mut()) {
            *acc /= cfg.n_draws as f64;
        }
    }
    draws.clamp_events = clamp.get();
    Ok(draws)
}

/// Fit the model: run all chains (concurrently when the `parallel` feature
/// is on), compute diagnostics on the per-chain draws, and merge.
pub fn fit(data: &Dataset, frame: &AreaFrame, spec: &ModelSpec) -> Result<FitResult> {
    fit_with_options(data, frame, spec, GibbsOptions::default())
}

/// [`fit`] with diagnostic switches.
pub fn fit_with_options(
    data: &Dataset,
    frame: &AreaFrame,
    spec: &ModelSpec,
    options: GibbsOptions,
) -> Result<FitResult> {
    spec.chain.validate()?;
    let started = Instant::now();
    let per_chain = crate::parallel::map_indexed(spec.chain.n_chains, |c| {
        run_chain_with_options(data, frame, spec, c, options)
    });
    let mut chains = Vec::with_capacity(per_chain.len());
    for result in per_chain {
        chains.push(result?);
    }
    let diagnostics = compute_diagnostics(&chains, data);
    let draws = ChainDraws::merge(chains);
    Ok(FitResult {
        draws,
        diagnostics,
        wall_time: started.elapsed(),
    })
}

/// Diagnostics over model parameters (theta and the DG pseudo-parameters are
/// excluded): q coefficients, m effects, then sigma1_sq, eta, sigma_v_sq,
/// p_e as the variant provides them.
fn compute_diagnostics(chains: &[ChainDraws], data: &Dataset) -> Vec<ParamDiagnostic> {
    let mixture = chains[0].variant.is_mixture();
    let mut params: Vec<(String, Vec<&[f64]>)> = Vec::new();
    for j in 0..data.q() {
        params.push((
            format!("beta_{j}"),
            chains.iter().map(|c| c.beta[j].as_slice()).collect(),
        ));
    }
    for (a, id) in data.area_ids().iter().enumerate() {
        params.push((
            format!("v_{id}"),
            chains.iter().map(|c| c.v[a].as_slice()).collect(),
        ));
    }
    params.push((
        "sigma1_sq".into(),
        chains.iter().map(|c| c.sigma1_sq.as_slice()).collect(),
    ));
    if mixture {
        params.push((
            "eta".into(),
            chains.iter().map(|c| c.eta.as_slice()).collect(),
        ));
    }
    params.push((
        "sigma_v_sq".into(),
        chains.iter().map(|c| c.sigma_v_sq.as_slice()).collect(),
    ));
    if mixture {
        params.push((
            "p_e".into(),
            chains.iter().map(|c| c.p_e.as_slice()).collect(),
        ));
    }
    params
        .into_iter()
        .map(|(name, cols)| ParamDiagnostic {
            ess: diagnostics::effective_sample_size(&cols),
            split_rhat: diagnostics::split_rhat(&cols),
            name,
        })
        .collect()
}
