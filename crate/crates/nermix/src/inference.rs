//! Posterior summaries: small-area predictors with credible intervals,
//! parameter tables, subpopulation-membership probabilities, standardized
//! residuals, and the serialized report.
//!
//! All functions are read-only over the retained draws. One quantile rule
//! (type 7) is used for every interval, median, and IQR, so ratio tables
//! between fits stay self-consistent.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{ChainConfig, ChainDraws, Dataset, Variant};
use crate::engine::{FitResult, ParamDiagnostic};
use crate::error::{Error, Result};
use crate::serialize::{fmt_f64, write_csv};
use crate::stats;

/// Equal-tail credible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CredibleInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Posterior summary of one area's small-area mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaSummary {
    pub area_id: String,
    pub n_i: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub intervals: Vec<CredibleInterval>,
}

impl AreaSummary {
    pub fn interval(&self, level: f64) -> Option<&CredibleInterval> {
        self.intervals
            .iter()
            .find(|ci| (ci.level - level).abs() < 1e-12)
    }
}

/// Posterior summary of one model parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub iqr: f64,
}

/// Per-unit membership probability and standardized residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitSummary {
    pub area_id: String,
    /// Zero-based row of the unit in the input record list.
    pub source_row: usize,
    /// Response on the model scale.
    pub y: f64,
    /// Rao-Blackwellized P(z = 0 | y); absent for DG.
    pub p_subpop2: Option<f64>,
    /// Plain average of sampled 1 - z; absent for DG.
    pub p_subpop2_raw: Option<f64>,
    pub std_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub variant: Variant,
    pub chain: ChainConfig,
    pub log_scale: bool,
    pub n_areas: usize,
    pub n_units: usize,
    /// "mean" for fits on the data scale, "median" for log-scale fits.
    pub point_estimate: String,
    pub clamp_events: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub name: String,
    pub ess: f64,
    pub split_rhat: f64,
}

/// Every table produced by one fit, plus provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub provenance: Provenance,
    pub areas: Vec<AreaSummary>,
    pub params: Vec<ParamSummary>,
    pub units: Vec<UnitSummary>,
    pub diagnostics: Vec<DiagnosticRow>,
}

/// Per-area mean, SD, median, and equal-tail credible intervals of the
/// small-area means. For log-scale fits the summaries are of the exp(theta)
/// draws. Levels are deduplicated and sorted.
pub fn summarize_theta(
    draws: &ChainDraws,
    dataset: &Dataset,
    levels: &[f64],
) -> Result<Vec<AreaSummary>> {
    if draws.n_draws() == 0 {
        return Err(Error::EmptyData);
    }
    let mut levels: Vec<f64> = levels.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(Error::InvalidParameter("levels must lie in (0, 1)".into()));
    }
    let cols = draws.theta_report();
    let mut out = Vec::with_capacity(draws.m());
    for (a, id) in draws.area_ids.iter().enumerate() {
        let col = &cols[a];
        let mut sorted = col.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let intervals = levels
            .iter()
            .map(|&level| {
                let (lower, upper) = stats::equal_tail_interval(&sorted, level);
                CredibleInterval {
                    level,
                    lower,
                    upper,
                }
            })
            .collect();
        out.push(AreaSummary {
            area_id: id.clone(),
            n_i: dataset.area_index(id).map_or(0, |i| dataset.n_i(i)),
            mean: stats::mean(col),
            sd: stats::sd(col),
            median: stats::quantile_sorted(&sorted, 0.5),
            intervals,
        });
    }
    Ok(out)
}

fn param_summary(name: &str, col: &[f64]) -> ParamSummary {
    let mut sorted = col.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ParamSummary {
        name: name.into(),
        mean: stats::mean(col),
        sd: stats::sd(col),
        median: stats::quantile_sorted(&sorted, 0.5),
        iqr: stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25),
    }
}

/// Mean, SD, median, IQR for the model parameters. sigma_2^2 is computed
/// per draw as eta * sigma_1^2 for the mixture variants.
pub fn summarize_params(draws: &ChainDraws) -> Vec<ParamSummary> {
    let mut out = Vec::new();
    for (j, col) in draws.beta.iter().enumerate() {
        out.push(param_summary(&format!("beta_{j}"), col));
    }
    if draws.variant.is_mixture() {
        out.push(param_summary("p_e", &draws.p_e));
    }
    out.push(param_summary("sigma_v_sq", &draws.sigma_v_sq));
    out.push(param_summary("sigma1_sq", &draws.sigma1_sq));
    if draws.variant.is_mixture() {
        let sigma2: Vec<f64> = draws
            .sigma1_sq
            .iter()
            .zip(&draws.eta)
            .map(|(s, e)| s * e)
            .collect();
        out.push(param_summary("sigma2_sq", &sigma2));
        out.push(param_summary("eta", &draws.eta));
    }
    out
}

/// Rao-Blackwellized per-unit probability of belonging to subpopulation 2:
/// the average over retained draws of 1 - p*_ij at each draw's parameters.
pub fn membership_probabilities(draws: &ChainDraws) -> Result<Vec<f64>> {
    if !draws.variant.is_mixture() {
        return Err(Error::VariantMismatch(
            "DG has no membership probabilities".into(),
        ));
    }
    Ok(draws.pstar_mean.iter().map(|p| 1.0 - p).collect())
}

/// Raw estimate of the same probability: the average of sampled 1 - z_ij.
/// Higher Monte Carlo variance than the Rao-Blackwellized default.
pub fn membership_probabilities_raw(draws: &ChainDraws) -> Result<Vec<f64>> {
    if !draws.variant.is_mixture() {
        return Err(Error::VariantMismatch(
            "DG has no membership probabilities".into(),
        ));
    }
    Ok(draws.z_mean.iter().map(|z| 1.0 - z).collect())
}

/// Standardized residual per unit,
/// `E(y_ij - theta_i | y) / sqrt(var(y_ij - theta_i | y))`, from the
/// empirical mean and (population) variance of the per-draw differences.
/// Computed on the model scale.
pub fn standardized_residuals(draws: &ChainDraws, dataset: &Dataset) -> Result<Vec<f64>> {
    let k = draws.n_draws();
    if k == 0 {
        return Err(Error::EmptyData);
    }
    let mut out = Vec::with_capacity(dataset.n());
    for u in 0..dataset.n() {
        let theta = &draws.theta[dataset.area_of(u)];
        let y = dataset.y(u);
        let mean_d = y - stats::mean(theta);
        let var_d = theta
            .iter()
            .map(|t| {
                let d = (y - t) - mean_d;
                d * d
            })
            .sum::<f64>()
            / k as f64;
        if var_d <= 0.0 {
            return Err(Error::ZeroPosteriorVariance(format!(
                "unit at input row {}",
                dataset.source_row(u)
            )));
        }
        out.push(mean_d / var_d.sqrt());
    }
    Ok(out)
}

/// Per-area ratio of credible-interval lengths at `level`:
/// `length(a_i) / length(b_i)`, matched by area id.
pub fn credible_interval_ratios(
    a: &[AreaSummary],
    b: &[AreaSummary],
    level: f64,
) -> Result<Vec<(String, f64)>> {
    if a.len() != b.len() {
        return Err(Error::AreaMismatch(format!(
            "reports cover {} vs {} areas",
            a.len(),
            b.len()
        )));
    }
    let mut out = Vec::with_capacity(a.len());
    for sa in a {
        let sb = b
            .iter()
            .find(|s| s.area_id == sa.area_id)
            .ok_or_else(|| Error::AreaMismatch(format!("area {} missing", sa.area_id)))?;
        let la = sa
            .interval(level)
            .ok_or_else(|| Error::InvalidParameter(format!("level {level} not in report")))?
            .length();
        let lb = sb
            .interval(level)
            .ok_or_else(|| Error::InvalidParameter(format!("level {level} not in report")))?
            .length();
        let ratio = if la == 0.0 && lb == 0.0 {
            1.0
        } else if lb == 0.0 {
            return Err(Error::DegenerateState(format!(
                "zero-length interval for area {} in denominator",
                sa.area_id
            )));
        } else {
            la / lb
        };
        out.push((sa.area_id.clone(), ratio));
    }
    Ok(out)
}

/// Assemble the full report for one fit.
pub fn build_report(
    fit: &FitResult,
    dataset: &Dataset,
    levels: &[f64],
) -> Result<PosteriorReport> {
    let draws = &fit.draws;
    let areas = summarize_theta(draws, dataset, levels)?;
    let params = summarize_params(draws);
    let residuals = standardized_residuals(draws, dataset)?;
    let (member, member_raw) = if draws.variant.is_mixture() {
        (
            Some(membership_probabilities(draws)?),
            Some(membership_probabilities_raw(draws)?),
        )
    } else {
        (None, None)
    };
    let mut units: Vec<UnitSummary> = (0..dataset.n())
        .map(|u| UnitSummary {
            area_id: dataset.area_ids()[dataset.area_of(u)].clone(),
            source_row: dataset.source_row(u),
            y: dataset.y(u),
            p_subpop2: member.as_ref().map(|m| m[u]),
            p_subpop2_raw: member_raw.as_ref().map(|m| m[u]),
            std_residual: residuals[u],
        })
        .collect();
    units.sort_by_key(|u| u.source_row);

    let point_estimate = if draws.log_scale { "median" } else { "mean" };
    Ok(PosteriorReport {
        provenance: Provenance {
            variant: draws.variant,
            chain: draws.config,
            log_scale: draws.log_scale,
            n_areas: draws.m(),
            n_units: dataset.n(),
            point_estimate: point_estimate.into(),
            clamp_events: draws.clamp_events,
        },
        areas,
        params,
        units,
        diagnostics: fit
            .diagnostics
            .iter()
            .map(|d: &ParamDiagnostic| DiagnosticRow {
                name: d.name.clone(),
                ess: d.ess,
                split_rhat: d.split_rhat,
            })
            .collect(),
    })
}

impl PosteriorReport {
    /// Point estimate per the provenance rule (posterior mean on the data
    /// scale, posterior median for log-scale fits).
    pub fn point_estimates(&self) -> Vec<(String, f64)> {
        self.areas
            .iter()
            .map(|a| {
                let v = if self.provenance.point_estimate == "median" {
                    a.median
                } else {
                    a.mean
                };
                (a.area_id.clone(), v)
            })
            .collect()
    }

    /// areas.csv: one row per area.
    pub fn write_areas_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut header: Vec<String> = vec![
            "area_id".into(),
            "n_i".into(),
            "mean".into(),
            "sd".into(),
            "median".into(),
        ];
        if let Some(first) = self.areas.first() {
            for ci in &first.intervals {
                header.push(format!("lower_{}", level_tag(ci.level)));
                header.push(format!("upper_{}", level_tag(ci.level)));
            }
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(
            sink,
            &header_refs,
            self.areas.iter().map(|a| {
                let mut row = vec![
                    a.area_id.clone(),
                    a.n_i.to_string(),
                    fmt_f64(a.mean),
                    fmt_f64(a.sd),
                    fmt_f64(a.median),
                ];
                for ci in &a.intervals {
                    row.push(fmt_f64(ci.lower));
                    row.push(fmt_f64(ci.upper));
                }
                row
            }),
        )
    }

    /// params.csv: one row per parameter.
    pub fn write_params_csv<W: Write>(&self, sink: W) -> Result<()> {
        write_csv(
            sink,
            &["param", "mean", "sd", "median", "iqr"],
            self.params.iter().map(|p| {
                vec![
                    p.name.clone(),
                    fmt_f64(p.mean),
                    fmt_f64(p.sd),
                    fmt_f64(p.median),
                    fmt_f64(p.iqr),
                ]
            }),
        )
    }

    /// units.csv: membership probabilities and standardized residuals.
    pub fn write_units_csv<W: Write>(&self, sink: W) -> Result<()> {
        write_csv(
            sink,
            &[
                "row",
                "area_id",
                "y_model_scale",
                "p_subpop2",
                "p_subpop2_raw",
                "std_residual",
            ],
            self.units.iter().map(|u| {
                vec![
                    u.source_row.to_string(),
                    u.area_id.clone(),
                    fmt_f64(u.y),
                    u.p_subpop2.map(fmt_f64).unwrap_or_default(),
                    u.p_subpop2_raw.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(u.std_residual),
                ]
            }),
        )
    }

    /// The single JSON document with all tables plus provenance.
    pub fn write_json<W: Write>(&self, mut sink: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut sink, self)?;
        sink.write_all(b"\n")?;
        Ok(())
    }
}

fn level_tag(level: f64) -> String {
    format!("{:.0}", level * 100.0)
}

/// draws.csv: one row per retained draw, parameters then theta per area.
/// DG omits the pseudo-parameters eta and p_e.
pub fn write_draws_csv<W: Write>(draws: &ChainDraws, sink: W) -> Result<()> {
    let mixture = draws.variant.is_mixture();
    let mut header: Vec<String> = (0..draws.q()).map(|j| format!("beta_{j}")).collect();
    for id in &draws.area_ids {
        header.push(format!("v_{id}"));
    }
    header.push("sigma1_sq".into());
    if mixture {
        header.push("eta".into());
    }
    header.push("sigma_v_sq".into());
    if mixture {
        header.push("p_e".into());
    }
    for id in &draws.area_ids {
        header.push(format!("theta_{id}"));
    }
    if draws.log_scale {
        for id in &draws.area_ids {
            header.push(format!("theta_orig_{id}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        sink,
        &header_refs,
        (0..draws.n_draws()).map(|k| {
            let mut row: Vec<String> = Vec::with_capacity(header_refs.len());
            for col in &draws.beta {
                row.push(fmt_f64(col[k]));
            }
            for col in &draws.v {
                row.push(fmt_f64(col[k]));
            }
            row.push(fmt_f64(draws.sigma1_sq[k]));
            if mixture {
                row.push(fmt_f64(draws.eta[k]));
            }
            row.push(fmt_f64(draws.sigma_v_sq[k]));
            if mixture {
                row.push(fmt_f64(draws.p_e[k]));
            }
            for col in &draws.theta {
                row.push(fmt_f64(col[k]));
            }
            if draws.log_scale {
                for col in &draws.theta_orig {
                    row.push(fmt_f64(col[k]));
                }
            }
            row
        }),
    )
}
