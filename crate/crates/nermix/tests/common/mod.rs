//! Shared oracles for the integration suites: Kolmogorov-Smirnov helpers, a
//! quadrature CDF for the variance-ratio conditional, random valid states
//! for the density-ratio checks, and a brute-force grid posterior for the
//! small-instance exactness test. Everything here is independent of the
//! sampling paths it is used to check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Distribution;

use nermix::domain::{ChainState, Dataset, UnitRecord, Variant};
use nermix::rng::RngStream;
use nermix::samplers::density;

/// Path of a bundled data file.
pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// Load a `area_id,y,x1,..,xq` CSV, prepending the intercept column.
pub fn load_units(name: &str) -> Vec<UnitRecord> {
    let mut reader = csv::Reader::from_path(fixture(name)).expect("fixture present");
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.unwrap();
        let mut x = vec![1.0];
        for field in row.iter().skip(2) {
            x.push(field.trim().parse().unwrap());
        }
        out.push(UnitRecord::new(
            row[0].to_string(),
            row[1].trim().parse().unwrap(),
            x,
        ));
    }
    out
}

/// Load a `area_id,N,xbar1,..,xbarq` CSV, prepending the intercept mean.
pub fn load_areas(name: &str) -> nermix::AreaFrame {
    let mut reader = csv::Reader::from_path(fixture(name)).expect("fixture present");
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.unwrap();
        let mut xbar = vec![1.0];
        for field in row.iter().skip(2) {
            xbar.push(field.trim().parse().unwrap());
        }
        rows.push((
            row[0].to_string(),
            row[1].trim().parse().unwrap(),
            xbar,
        ));
    }
    nermix::AreaFrame::new(rows).unwrap()
}

/// KS statistic of sorted draws against a reference CDF.
pub fn ks_against_cdf(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len();
    let mut ks: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        ks = ks
            .max(((i + 1) as f64 / n as f64 - f).abs())
            .max((i as f64 / n as f64 - f).abs());
    }
    ks
}

/// Two-sample KS statistic of two sorted samples.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut ks: f64 = 0.0;
    while i < na && j < nb {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        ks = ks.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    ks
}

/// Numeric CDF of the eta conditional, built by trapezoid integration of the
/// log-scale density over a wide grid. Serves as the independent oracle for
/// the slice sampler.
pub struct EtaOracle {
    grid_t: Vec<f64>,
    cdf: Vec<f64>,
}

impl EtaOracle {
    pub fn build(variant: Variant, a: f64, b: f64) -> Self {
        let steps = 240_000;
        let (t_lo, t_hi) = (-60.0, 60.0);
        let h = (t_hi - t_lo) / steps as f64;
        let log_h = |t: f64| density::log_cond_eta(variant, a, b, t.exp()) + t;
        let grid_t: Vec<f64> = (0..=steps).map(|i| t_lo + i as f64 * h).collect();
        let logs: Vec<f64> = grid_t.iter().map(|&t| log_h(t)).collect();
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let vals: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
        let mut cdf = Vec::with_capacity(grid_t.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..grid_t.len() {
            acc += 0.5 * (vals[i - 1] + vals[i]) * h;
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        for c in cdf.iter_mut() {
            *c /= total;
        }
        EtaOracle { grid_t, cdf }
    }

    pub fn cdf_eta(&self, eta: f64) -> f64 {
        let t = eta.ln();
        if t <= self.grid_t[0] {
            return 0.0;
        }
        if t >= *self.grid_t.last().unwrap() {
            return 1.0;
        }
        let h = self.grid_t[1] - self.grid_t[0];
        let pos = (t - self.grid_t[0]) / h;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.cdf[i] + frac * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// A small random dataset that satisfies the validation guards.
pub fn random_dataset(rng: &mut RngStream, m: usize, max_per_area: usize, q: usize) -> Dataset {
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let mut records = Vec::new();
    for area in 0..m {
        let n_i = 1 + (rng.random::<u32>() as usize) % max_per_area;
        for _ in 0..n_i {
            let mut x = vec![1.0];
            for _ in 1..q {
                x.push(normal.sample(rng));
            }
            let y = 2.0 * normal.sample(rng);
            records.push(UnitRecord::new(format!("area{area}"), y, x));
        }
    }
    Dataset::unchecked_from_records(&records)
}

/// A random state satisfying the variant's constraints.
pub fn random_state(variant: Variant, data: &Dataset, rng: &mut RngStream) -> ChainState {
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let beta: Vec<f64> = (0..data.q()).map(|_| normal.sample(rng)).collect();
    let v: Vec<f64> = (0..data.m()).map(|_| 0.7 * normal.sample(rng)).collect();
    let lognorm = |rng: &mut RngStream| (0.8 * rng.random::<f64>() - 0.4 + 0.3f64).exp();
    let (z, eta, p_e) = match variant {
        Variant::Dg => (vec![1; data.n()], 1.0, None),
        Variant::Gdm => (
            (0..data.n()).map(|_| u8::from(rng.random_bool(0.7))).collect(),
            (1.5 * normal.sample(rng)).exp(),
            Some(0.55 + 0.4 * rng.random::<f64>()),
        ),
        Variant::Cdm => (
            (0..data.n()).map(|_| u8::from(rng.random_bool(0.7))).collect(),
            1.0 + (normal.sample(rng)).exp(),
            Some(0.1 + 0.8 * rng.random::<f64>()),
        ),
    };
    ChainState {
        beta,
        v,
        z,
        sigma1_sq: lognorm(rng),
        eta,
        sigma_v_sq: lognorm(rng),
        p_e,
    }
}

/// Largest absolute mismatch between conditional log-density differences and
/// joint log-density differences over every parameter block of `variant`.
pub fn density_ratio_max_error(
    variant: Variant,
    data: &Dataset,
    state: &ChainState,
    rng: &mut RngStream,
) -> f64 {
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let joint = |s: &ChainState| density::log_joint(variant, data, s);
    let mut worst: f64 = 0.0;
    let mut record = |cond_diff: f64, joint_diff: f64| {
        worst = worst.max((cond_diff - joint_diff).abs());
    };

    // beta block.
    {
        let mut sa = state.clone();
        let mut sb = state.clone();
        for j in 0..data.q() {
            sa.beta[j] += normal.sample(rng);
            sb.beta[j] += normal.sample(rng);
        }
        let cond = density::log_cond_beta(data, state, &sa.beta).unwrap()
            - density::log_cond_beta(data, state, &sb.beta).unwrap();
        record(cond, joint(&sa) - joint(&sb));
    }

    // area-effects block.
    {
        let mut sa = state.clone();
        let mut sb = state.clone();
        for a in 0..data.m() {
            sa.v[a] += normal.sample(rng);
            sb.v[a] += normal.sample(rng);
        }
        let cond = density::log_cond_area_effects(data, state, &sa.v)
            - density::log_cond_area_effects(data, state, &sb.v);
        record(cond, joint(&sa) - joint(&sb));
    }

    if variant.is_mixture() {
        // indicator block.
        {
            let mut sa = state.clone();
            let mut sb = state.clone();
            sa.z = (0..data.n()).map(|_| u8::from(rng.random_bool(0.5))).collect();
            sb.z = (0..data.n()).map(|_| u8::from(rng.random_bool(0.5))).collect();
            let cond = density::log_cond_indicators(data, state, &sa.z)
                - density::log_cond_indicators(data, state, &sb.z);
            record(cond, joint(&sa) - joint(&sb));
        }

        // mixing proportion block.
        {
            let lower = if variant == Variant::Gdm { 0.5 } else { 0.0 };
            let mut sa = state.clone();
            let mut sb = state.clone();
            sa.p_e = Some(lower + (1.0 - lower) * (0.05 + 0.9 * rng.random::<f64>()));
            sb.p_e = Some(lower + (1.0 - lower) * (0.05 + 0.9 * rng.random::<f64>()));
            let (s1, s0) = density::indicator_counts(&state.z);
            let cond = density::log_cond_pe(variant, s1, s0, sa.p_e.unwrap())
                - density::log_cond_pe(variant, s1, s0, sb.p_e.unwrap());
            record(cond, joint(&sa) - joint(&sb));
        }

        // variance-ratio block.
        {
            let mut sa = state.clone();
            let mut sb = state.clone();
            let fresh = |rng: &mut RngStream| -> f64 {
                let e = (1.2 * normal.sample(rng)).exp();
                if variant == Variant::Cdm {
                    1.0 + e
                } else {
                    e
                }
            };
            sa.eta = fresh(rng);
            sb.eta = fresh(rng);
            let (a_coef, b_coef) = density::eta_coefficients(data, state);
            let cond = density::log_cond_eta(variant, a_coef, b_coef, sa.eta)
                - density::log_cond_eta(variant, a_coef, b_coef, sb.eta);
            record(cond, joint(&sa) - joint(&sb));
        }
    }

    // sigma_v^2 block.
    {
        let mut sa = state.clone();
        let mut sb = state.clone();
        sa.sigma_v_sq = (1.5 * normal.sample(rng)).exp();
        sb.sigma_v_sq = (1.5 * normal.sample(rng)).exp();
        let sum_v_sq: f64 = state.v.iter().map(|v| v * v).sum();
        let cond = density::log_cond_sigma_v(data.m(), sum_v_sq, sa.sigma_v_sq)
            - density::log_cond_sigma_v(data.m(), sum_v_sq, sb.sigma_v_sq);
        record(cond, joint(&sa) - joint(&sb));
    }

    // sigma_1^2 block.
    {
        let mut sa = state.clone();
        let mut sb = state.clone();
        sa.sigma1_sq = (1.5 * normal.sample(rng)).exp();
        sb.sigma1_sq = (1.5 * normal.sample(rng)).exp();
        // The rate depends on the parameter being held fixed elsewhere only
        // through residuals and z, which the two candidate states share.
        let rate_a = density::sigma1_rate(data, &sa);
        let rate_b = density::sigma1_rate(data, &sb);
        assert!((rate_a - rate_b).abs() < 1e-12 * rate_a.max(1.0));
        let cond = density::log_cond_sigma1(data.n(), rate_a, sa.sigma1_sq)
            - density::log_cond_sigma1(data.n(), rate_b, sb.sigma1_sq);
        record(cond, joint(&sa) - joint(&sb));
    }

    worst
}

/// Brute-force posterior of (sigma_v^2, sigma_1^2) given z = 1, with beta
/// and v integrated out analytically, evaluated on a log-spaced grid.
/// Returns bin probabilities of sigma_v^2 aggregated to `coarse` bins, plus
/// the bin edges.
pub struct GridOracle {
    pub edges: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn grid_posterior_sigma_v(data: &Dataset, coarse: usize) -> GridOracle {
    let (n, m, q) = (data.n(), data.m(), data.q());
    let dim = q + m;

    // Sufficient statistics.
    let mut xtx = DMatrix::<f64>::zeros(q, q);
    let mut xty = DVector::<f64>::zeros(q);
    let mut yty = 0.0;
    for u in 0..n {
        let x = data.x_row(u);
        let y = data.y(u);
        yty += y * y;
        for i in 0..q {
            xty[i] += x[i] * y;
            for j in 0..q {
                xtx[(i, j)] += x[i] * x[j];
            }
        }
    }
    let area_sums_y: Vec<f64> = (0..m)
        .map(|a| data.units_of(a).map(|u| data.y(u)).sum())
        .collect();
    // Cross terms sum_j x_uj over units of each area.
    let mut area_sums_x = vec![vec![0.0; q]; m];
    for u in 0..n {
        let a = data.area_of(u);
        for (j, acc) in area_sums_x[a].iter_mut().enumerate() {
            *acc += data.x_row(u)[j];
        }
    }

    let fine_v = 600;
    let fine_s = 400;
    let (lv_lo, lv_hi) = (-9.0f64, 14.0f64); // log sigma_v^2
    let (ls_lo, ls_hi) = (-7.0f64, 10.0f64); // log sigma_1^2
    let hv = (lv_hi - lv_lo) / fine_v as f64;
    let hs = (ls_hi - ls_lo) / fine_s as f64;

    let log_kernel = |sv: f64, s1: f64| -> f64 {
        // Precision matrix of (beta, v) and linear term.
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        for i in 0..q {
            b[i] = xty[i] / s1;
            for j in 0..q {
                a[(i, j)] = xtx[(i, j)] / s1;
            }
        }
        for area in 0..m {
            let d = q + area;
            a[(d, d)] = data.n_i(area) as f64 / s1 + 1.0 / sv;
            b[d] = area_sums_y[area] / s1;
            for j in 0..q {
                a[(j, d)] = area_sums_x[area][j] / s1;
                a[(d, j)] = area_sums_x[area][j] / s1;
            }
        }
        let chol = match nalgebra::Cholesky::new(a.clone()) {
            Some(c) => c,
            None => return f64::NEG_INFINITY,
        };
        let log_det: f64 = (0..dim).map(|i| chol.l()[(i, i)].ln()).sum::<f64>() * 2.0;
        let quad = chol.solve(&b).dot(&b);
        -(n as f64 / 2.0 + 1.0) * s1.ln() - (m as f64 / 2.0) * sv.ln() - 0.5 * log_det
            + 0.5 * quad
            - 0.5 * yty / s1
    };

    // Joint over the fine grid in log space (integrand includes the
    // Jacobians sv * s1).
    let mut grid = vec![vec![0.0f64; fine_s + 1]; fine_v + 1];
    let mut peak = f64::NEG_INFINITY;
    let mut logs = vec![vec![0.0f64; fine_s + 1]; fine_v + 1];
    for (iv, row) in logs.iter_mut().enumerate() {
        let lv = lv_lo + iv as f64 * hv;
        for (is, cell) in row.iter_mut().enumerate() {
            let ls = ls_lo + is as f64 * hs;
            let l = log_kernel(lv.exp(), ls.exp()) + lv + ls;
            *cell = l;
            peak = peak.max(l);
        }
    }
    for iv in 0..=fine_v {
        for is in 0..=fine_s {
            grid[iv][is] = (logs[iv][is] - peak).exp();
        }
    }

    // Marginal of log sigma_v^2 by trapezoid over log sigma_1^2.
    let mut marginal = vec![0.0f64; fine_v + 1];
    for iv in 0..=fine_v {
        let mut acc = 0.0;
        for is in 1..=fine_s {
            acc += 0.5 * (grid[iv][is - 1] + grid[iv][is]) * hs;
        }
        marginal[iv] = acc;
    }

    // Aggregate fine cells into coarse bins (trapezoid within each bin).
    let per = fine_v / coarse;
    assert_eq!(per * coarse, fine_v);
    let mut probs = vec![0.0f64; coarse];
    for (k, p) in probs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for iv in (k * per + 1)..=((k + 1) * per) {
            acc += 0.5 * (marginal[iv - 1] + marginal[iv]) * hv;
        }
        *p = acc;
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    let edges: Vec<f64> = (0..=coarse)
        .map(|k| (lv_lo + (k * per) as f64 * hv).exp())
        .collect();
    GridOracle { edges, probs }
}

/// Total-variation distance between draws (histogrammed on the oracle's bin
/// edges) and the oracle probabilities. Draw mass outside the grid counts in
/// full.
pub fn tv_against_oracle(draws: &[f64], oracle: &GridOracle) -> f64 {
    let k = oracle.probs.len();
    let mut counts = vec![0.0f64; k];
    let mut outside = 0.0;
    for &x in draws {
        if x < oracle.edges[0] || x >= oracle.edges[k] {
            outside += 1.0;
            continue;
        }
        // Bin edges are geometric; locate by log position.
        let l0 = oracle.edges[0].ln();
        let lk = oracle.edges[k].ln();
        let idx = (((x.ln() - l0) / (lk - l0)) * k as f64).floor() as usize;
        counts[idx.min(k - 1)] += 1.0;
    }
    let n = draws.len() as f64;
    let mut tv = outside / n;
    for (count, prob) in counts.iter().zip(&oracle.probs) {
        tv += (count / n - prob).abs();
    }
    0.5 * tv
}
