//! Core data types shared by the samplers, the Gibbs engine, and reporting:
//! unit-level records, validated datasets, per-area population metadata, and
//! model/chain configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which hierarchical-Bayes variant to fit.
///
/// * `Dg` — normal unit errors, improper prior 1/sigma_e^2.
/// * `Cdm` — contamination mixture, prior ordering sigma_1^2 < sigma_2^2,
///   unconstrained mixing proportion.
/// * `Gdm` — symmetric two-component mixture, prior (sigma_1^2+sigma_2^2)^-2,
///   identifiability via p_e > 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dg,
    Cdm,
    Gdm,
}

impl Variant {
    /// True for the two-component mixture variants (CDM, GDM).
    pub fn is_mixture(self) -> bool {
        !matches!(self, Variant::Dg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dg => "dg",
            Variant::Cdm => "cdm",
            Variant::Gdm => "gdm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dg" => Ok(Variant::Dg),
            "cdm" => Ok(Variant::Cdm),
            "gdm" => Ok(Variant::Gdm),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

/// One sampled unit: response plus covariate vector (including the explicit
/// intercept entry when the model has one).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub area_id: String,
    pub y: f64,
    pub x: Vec<f64>,
}

impl UnitRecord {
    pub fn new(area_id: impl Into<String>, y: f64, x: Vec<f64>) -> Self {
        UnitRecord {
            area_id: area_id.into(),
            y,
            x,
        }
    }
}

/// Options for [`validate_dataset`].
#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Accept areas that appear in the [`AreaFrame`] with no sampled units;
    /// they are carried with `n_i = 0` and predicted from the random-effect
    /// prior. Off by default.
    pub allow_unsampled_areas: bool,
}

/// A validated, immutably indexed dataset.
///
/// Units are grouped contiguously by area; areas are numbered `0..m` in order
/// of first appearance in the input (unsampled areas, when allowed, follow in
/// area-frame order). `source_rows` maps each unit back to its input row.
#[derive(Debug, Clone)]
pub struct Dataset {
    area_ids: Vec<String>,
    y: Vec<f64>,
    x: Vec<f64>, // n * q, row major
    area_starts: Vec<usize>,
    unit_area: Vec<usize>,
    source_rows: Vec<usize>,
    q: usize,
    has_intercept: bool,
    log_scale: bool,
}

impl Dataset {
    /// Number of areas (including any flagged unsampled areas).
    pub fn m(&self) -> usize {
        self.area_ids.len()
    }

    /// Total number of sampled units.
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Covariate dimension, intercept included.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_i(&self, area: usize) -> usize {
        self.area_starts[area + 1] - self.area_starts[area]
    }

    pub fn area_ids(&self) -> &[String] {
        &self.area_ids
    }

    pub fn area_index(&self, area_id: &str) -> Option<usize> {
        self.area_ids.iter().position(|a| a == area_id)
    }

    /// Unit indices belonging to `area`.
    pub fn units_of(&self, area: usize) -> std::ops::Range<usize> {
        self.area_starts[area]..self.area_starts[area + 1]
    }

    pub fn area_of(&self, unit: usize) -> usize {
        self.unit_area[unit]
    }

    pub fn y(&self, unit: usize) -> f64 {
        self.y[unit]
    }

    pub fn x_row(&self, unit: usize) -> &[f64] {
        &self.x[unit * self.q..(unit + 1) * self.q]
    }

    /// Original input row of a unit (pre-grouping).
    pub fn source_row(&self, unit: usize) -> usize {
        self.source_rows[unit]
    }

    /// Whether column 0 is an all-ones intercept.
    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    /// True when the responses (and non-intercept covariates) hold logs of
    /// the original data; inference then back-transforms per draw.
    pub fn is_log_scale(&self) -> bool {
        self.log_scale
    }

    pub fn dot_x(&self, unit: usize, beta: &[f64]) -> f64 {
        self.x_row(unit)
            .iter()
            .zip(beta)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Per-area population metadata: size and model-scale covariate means.
///
/// The covariate means must be on the same scale as the fitted model. For a
/// log-transformed fit that means per-area means of the log covariates (the
/// mean of logs is not recoverable from the mean levels, so
/// [`log_transform_dataset`] passes the frame through untouched).
#[derive(Debug, Clone)]
pub struct AreaFrame {
    area_ids: Vec<String>,
    n_pop: Vec<u64>,
    xbar: Vec<f64>, // len = areas * q, row major, intercept entry included
    q: usize,
}

impl AreaFrame {
    /// Build from `(area_id, N, xbar)` rows; every `xbar` must have the same
    /// length (the model's q, intercept entry included).
    pub fn new(rows: Vec<(String, u64, Vec<f64>)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        let q = rows[0].2.len();
        let mut area_ids = Vec::with_capacity(rows.len());
        let mut n_pop = Vec::with_capacity(rows.len());
        let mut xbar = Vec::with_capacity(rows.len() * q);
        for (row, (id, n, means)) in rows.into_iter().enumerate() {
            if means.len() != q {
                return Err(Error::RaggedCovariates {
                    row,
                    expected: q,
                    found: means.len(),
                });
            }
            if means.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(format!(
                    "population covariate mean for area {id}"
                )));
            }
            if area_ids.contains(&id) {
                return Err(Error::AreaMismatch(format!(
                    "area {id} listed twice in area frame"
                )));
            }
            area_ids.push(id);
            n_pop.push(n);
            xbar.extend_from_slice(&means);
        }
        Ok(AreaFrame {
            area_ids,
            n_pop,
            xbar,
            q,
        })
    }

    pub fn len(&self) -> usize {
        self.area_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area_ids.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn area_ids(&self) -> &[String] {
        &self.area_ids
    }

    pub fn index_of(&self, area_id: &str) -> Option<usize> {
        self.area_ids.iter().position(|a| a == area_id)
    }

    pub fn n_pop(&self, idx: usize) -> u64 {
        self.n_pop[idx]
    }

    pub fn xbar(&self, idx: usize) -> &[f64] {
        &self.xbar[idx * self.q..(idx + 1) * self.q]
    }
}

/// Chain settings for one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Retained draws per chain.
    pub n_draws: usize,
    /// Discarded initial iterations.
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in draw.
    pub thin: usize,
    /// Number of independent chains.
    pub n_chains: usize,
    /// Base seed; chain k uses a stream derived from (seed, k).
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_draws: 10_000,
            burn_in: 5_000,
            thin: 1,
            n_chains: 2,
            seed: 42,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_draws < 1 {
            return Err(Error::InvalidConfig("n_draws must be >= 1".into()));
        }
        if self.thin < 1 {
            return Err(Error::InvalidConfig("thin must be >= 1".into()));
        }
        if self.n_chains < 1 {
            return Err(Error::InvalidConfig("n_chains must be >= 1".into()));
        }
        Ok(())
    }
}

/// Model variant plus chain settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub chain: ChainConfig,
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        ModelSpec {
            variant,
            chain: ChainConfig::default(),
        }
    }
}

/// One Gibbs state. For DG the indicator vector is all ones, `eta` is 1, and
/// `p_e` is absent, so downstream code paths stay uniform.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<u8>,
    pub sigma1_sq: f64,
    /// Variance ratio sigma_2^2 / sigma_1^2.
    pub eta: f64,
    pub sigma_v_sq: f64,
    pub p_e: Option<f64>,
}

impl ChainState {
    /// Check the state invariants for `variant`; called after every scan.
    pub fn check(&self, variant: Variant) -> Result<()> {
        let finite = self.beta.iter().chain(self.v.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::DegenerateState("non-finite beta or v".into()));
        }
        if !(self.sigma1_sq.is_finite() && self.sigma1_sq > 0.0) {
            return Err(Error::DegenerateState(format!(
                "sigma1_sq = {}",
                self.sigma1_sq
            )));
        }
        if !(self.sigma_v_sq.is_finite() && self.sigma_v_sq > 0.0) {
            return Err(Error::DegenerateState(format!(
                "sigma_v_sq = {}",
                self.sigma_v_sq
            )));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::DegenerateState(format!("eta = {}", self.eta)));
        }
        match variant {
            Variant::Dg => {}
            Variant::Cdm => {
                let p = self
                    .p_e
                    .ok_or_else(|| Error::DegenerateState("CDM state missing p_e".into()))?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::DegenerateState(format!("CDM p_e = {p}")));
                }
                if self.eta <= 1.0 {
                    return Err(Error::DegenerateState(format!(
                        "CDM eta = {} violates eta > 1",
                        self.eta
                    )));
                }
            }
            Variant::Gdm => {
                let p = self
                    .p_e
                    .ok_or_else(|| Error::DegenerateState("GDM state missing p_e".into()))?;
                if !(p > 0.5 && p < 1.0) {
                    return Err(Error::DegenerateState(format!(
                        "GDM p_e = {p} violates p_e > 1/2"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mixture precision weight for one unit:
    /// `z/sigma1_sq + (1-z)/(eta*sigma1_sq)`.
    pub fn weight(&self, unit: usize) -> f64 {
        if self.z[unit] == 1 {
            1.0 / self.sigma1_sq
        } else {
            1.0 / (self.eta * self.sigma1_sq)
        }
    }
}

/// Retained draws of one or more merged chains, column-wise by parameter.
#[derive(Debug, Clone)]
pub struct ChainDraws {
    pub variant: Variant,
    pub config: ChainConfig,
    pub area_ids: Vec<String>,
    pub log_scale: bool,
    /// q columns of length `n_draws`.
    pub beta: Vec<Vec<f64>>,
    /// m columns.
    pub v: Vec<Vec<f64>>,
    pub sigma1_sq: Vec<f64>,
    /// All ones for DG.
    pub eta: Vec<f64>,
    pub sigma_v_sq: Vec<f64>,
    /// Empty for DG.
    pub p_e: Vec<f64>,
    /// Per-area theta draws on the model scale.
    pub theta: Vec<Vec<f64>>,
    /// exp(theta) per draw for log-scale fits; empty otherwise.
    pub theta_orig: Vec<Vec<f64>>,
    /// Per-unit mean of sampled indicators z (mixture variants; empty for DG).
    pub z_mean: Vec<f64>,
    /// Per-unit mean of the conditional probability p* (mixture variants).
    pub pstar_mean: Vec<f64>,
    pub n_units: usize,
    /// Times a precision was clamped at the numerical floor.
    pub clamp_events: u64,
}

impl ChainDraws {
    pub fn n_draws(&self) -> usize {
        self.sigma1_sq.len()
    }

    pub fn q(&self) -> usize {
        self.beta.len()
    }

    pub fn m(&self) -> usize {
        self.area_ids.len()
    }

    /// Theta columns on the reporting scale: `exp(theta)` draws for
    /// log-transformed fits, raw theta otherwise.
    pub fn theta_report(&self) -> &[Vec<f64>] {
        if self.log_scale {
            &self.theta_orig
        } else {
            &self.theta
        }
    }

    /// Merge per-chain draws in chain order. Columns concatenate by
    /// (chain index, draw index); per-unit means average with equal weight
    /// because every chain retains the same number of draws.
    pub fn merge(mut chains: Vec<ChainDraws>) -> ChainDraws {
        assert!(!chains.is_empty());
        let mut merged = chains.remove(0);
        let per_chain_draws = merged.n_draws();
        let n_chains_total = chains.len() + 1;
        for other in chains {
            assert_eq!(other.n_draws(), per_chain_draws);
            for (col, o) in merged.beta.iter_mut().zip(&other.beta) {
                col.extend_from_slice(o);
            }
            for (col, o) in merged.v.iter_mut().zip(&other.v) {
                col.extend_from_slice(o);
            }
            merged.sigma1_sq.extend_from_slice(&other.sigma1_sq);
            merged.eta.extend_from_slice(&other.eta);
            merged.sigma_v_sq.extend_from_slice(&other.sigma_v_sq);
            merged.p_e.extend_from_slice(&other.p_e);
            for (col, o) in merged.theta.iter_mut().zip(&other.theta) {
                col.extend_from_slice(o);
            }
            for (col, o) in merged.theta_orig.iter_mut().zip(&other.theta_orig) {
                col.extend_from_slice(o);
            }
            for (acc, o) in merged.z_mean.iter_mut().zip(&other.z_mean) {
                *acc += o;
            }
            for (acc, o) in merged.pstar_mean.iter_mut().zip(&other.pstar_mean) {
                *acc += o;
            }
            merged.clamp_events += other.clamp_events;
        }
        let scale = 1.0 / n_chains_total as f64;
        for v in merged.z_mean.iter_mut().chain(merged.pstar_mean.iter_mut()) {
            *v *= scale;
        }
        merged
    }
}

/// Validate raw records against an area frame and produce an indexed
/// [`Dataset`]. Rejects rank-deficient designs, fewer than 3 areas, and
/// n < q + 3; those bounds keep every Gibbs full conditional proper.
pub fn validate_dataset(
    records: &[UnitRecord],
    frame: &AreaFrame,
    options: &ValidateOptions,
) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    let q = records[0].x.len();
    if q == 0 {
        return Err(Error::InvalidParameter("records carry no covariates".into()));
    }
    if frame.q() != q {
        return Err(Error::AreaMismatch(format!(
            "area frame has {} covariate means per area, dataset has q = {q}",
            frame.q()
        )));
    }
    for (row, r) in records.iter().enumerate() {
        if r.x.len() != q {
            return Err(Error::RaggedCovariates {
                row,
                expected: q,
                found: r.x.len(),
            });
        }
        if !r.y.is_finite() {
            return Err(Error::NonFiniteValue(format!("y at input row {row}")));
        }
        if r.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("x at input row {row}")));
        }
    }

    // Areas numbered by first appearance; units grouped per area in input order.
    let mut area_ids: Vec<String> = Vec::new();
    for r in records {
        if !area_ids.contains(&r.area_id) {
            area_ids.push(r.area_id.clone());
        }
    }
    for id in &area_ids {
        if frame.index_of(id).is_none() {
            return Err(Error::AreaMismatch(format!(
                "area {id} is sampled but missing from the area frame"
            )));
        }
    }
    for id in frame.area_ids() {
        if !area_ids.contains(id) {
            if options.allow_unsampled_areas {
                area_ids.push(id.clone());
            } else {
                return Err(Error::AreaMismatch(format!(
                    "area frame lists area {id} with no sampled units"
                )));
            }
        }
    }

    let m = area_ids.len();
    let n = records.len();
    let mut per_area: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (row, r) in records.iter().enumerate() {
        let a = area_ids.iter().position(|id| id == &r.area_id).unwrap();
        per_area[a].push(row);
    }

    for (a, rows) in per_area.iter().enumerate() {
        let fi = frame.index_of(&area_ids[a]).unwrap();
        if (frame.n_pop(fi) as usize) < rows.len() {
            return Err(Error::PopulationTooSmall {
                area_id: area_ids[a].clone(),
                n_pop: frame.n_pop(fi),
                n_sampled: rows.len(),
            });
        }
    }

    if m < 3 {
        return Err(Error::TooFewAreas {
            found: m,
            required: 3,
        });
    }
    if n < q + 3 {
        return Err(Error::TooFewUnits {
            found: n,
            required: q + 3,
        });
    }

    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * q);
    let mut unit_area = Vec::with_capacity(n);
    let mut source_rows = Vec::with_capacity(n);
    let mut area_starts = Vec::with_capacity(m + 1);
    area_starts.push(0);
    for (a, rows) in per_area.iter().enumerate() {
        for &row in rows {
            y.push(records[row].y);
            x.extend_from_slice(&records[row].x);
            unit_area.push(a);
            source_rows.push(row);
        }
        area_starts.push(y.len());
    }

    // Full column rank, checked on singular values of the design matrix.
    let design = nalgebra::DMatrix::from_row_slice(n, q, &x);
    let svd = design.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * (n.max(q) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < q {
        return Err(Error::RankDeficientDesign(q));
    }

    let has_intercept = (0..n).all(|u| x[u * q] == 1.0);

    Ok(Dataset {
        area_ids,
        y,
        x,
        area_starts,
        unit_area,
        source_rows,
        q,
        has_intercept,
        log_scale: false,
    })
}

impl Dataset {
    /// Group records without the propriety guards. Lets sampler unit tests
    /// exercise instances smaller than `validate_dataset` admits.
    #[doc(hidden)]
    pub fn unchecked_from_records(records: &[UnitRecord]) -> Dataset {
        let q = records[0].x.len();
        let mut area_ids: Vec<String> = Vec::new();
        for r in records {
            if !area_ids.contains(&r.area_id) {
                area_ids.push(r.area_id.clone());
            }
        }
        let m = area_ids.len();
        let mut per_area: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (row, r) in records.iter().enumerate() {
            let a = area_ids.iter().position(|id| id == &r.area_id).unwrap();
            per_area[a].push(row);
        }
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut unit_area = Vec::new();
        let mut source_rows = Vec::new();
        let mut area_starts = vec![0];
        for (a, rows) in per_area.iter().enumerate() {
            for &row in rows {
                y.push(records[row].y);
                x.extend_from_slice(&records[row].x);
                unit_area.push(a);
                source_rows.push(row);
            }
            area_starts.push(y.len());
        }
        let n = y.len();
        let has_intercept = (0..n).all(|u| x[u * q] == 1.0);
        Dataset {
            area_ids,
            y,
            x,
            area_starts,
            unit_area,
            source_rows,
            q,
            has_intercept,
            log_scale: false,
        }
    }
}

/// Natural-log transform of a dataset: `y* = ln y` and `x* = ln x` for
/// non-intercept columns. The area frame passes through unchanged — its
/// covariate means must already be on the model (log) scale. The returned
/// dataset carries a flag so inference back-transforms theta per draw.
pub fn log_transform_dataset(
    dataset: &Dataset,
    frame: &AreaFrame,
) -> Result<(Dataset, AreaFrame)> {
    if dataset.log_scale {
        return Err(Error::InvalidParameter(
            "dataset is already log-transformed".into(),
        ));
    }
    let q = dataset.q;
    let skip_col = if dataset.has_intercept { Some(0) } else { None };
    let mut out = dataset.clone();
    for (unit, y) in out.y.iter_mut().enumerate() {
        if *y <= 0.0 {
            return Err(Error::NonPositiveValue(format!(
                "y = {y} at input row {}",
                dataset.source_rows[unit]
            )));
        }
        *y = y.ln();
    }
    for unit in 0..dataset.n() {
        for col in 0..q {
            if Some(col) == skip_col {
                continue;
            }
            let v = &mut out.x[unit * q + col];
            if *v <= 0.0 {
                return Err(Error::NonPositiveValue(format!(
                    "x{col} = {v} at input row {}",
                    dataset.source_rows[unit]
                )));
            }
            *v = v.ln();
        }
    }
    out.log_scale = true;
    Ok((out, frame.clone()))
}
