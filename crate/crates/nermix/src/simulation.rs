//! Monte Carlo study harness: generate finite populations under five error
//! regimes, sample each area, fit the requested variants, and aggregate
//! empirical bias/MSE, posterior-variance bias, non-coverage, and
//! credible-interval lengths.
//!
//! The replicate-by-method grid is embarrassingly parallel; every replicate
//! derives its own streams from (scenario seed, replicate index), so the
//! table is bit-identical regardless of worker count.

use std::io::Write;

use rand_distr::Distribution;
use serde::Serialize;

use crate::domain::{
    validate_dataset, AreaFrame, ChainConfig, Dataset, ModelSpec, UnitRecord, ValidateOptions,
    Variant,
};
use crate::engine;
use crate::error::{Error, Result};
use crate::rng::{mix_seed, tag, RngStream};
use crate::serialize::{fmt_f64, write_csv};
use crate::stats;

/// Unit-error generator for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ErrorRegime {
    /// e ~ N(0, 1).
    Normal,
    /// e ~ N(0, 1) with probability `p_primary`, else N(mean2, sd2^2).
    Mixture {
        p_primary: f64,
        mean2: f64,
        sd2: f64,
    },
    /// e ~ t with `df` degrees of freedom (generation only; never fitted).
    StudentT { df: f64 },
}

/// One simulation setup. The named scenarios match the five study regimes;
/// size parameters scale between desk and full runs.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub regime: ErrorRegime,
    /// Number of small areas.
    pub m: usize,
    /// Population units per area.
    pub n_pop: usize,
    /// Sampled units per area.
    pub n_sample: usize,
    /// (intercept, slope) of the generating regression.
    pub beta: (f64, f64),
    /// Replicate count S.
    pub replicates: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Desk-scale named scenario: S = 50, m = 20, N_i = 100, n_i = 4.
    pub fn named(name: &str, seed: u64) -> Result<Self> {
        let regime = match name {
            "i" => ErrorRegime::Normal,
            "ii" => ErrorRegime::Mixture {
                p_primary: 0.90,
                mean2: 0.0,
                sd2: 5.0,
            },
            "iii" => ErrorRegime::Mixture {
                p_primary: 0.60,
                mean2: 0.0,
                sd2: 5.0,
            },
            "iv" => ErrorRegime::StudentT { df: 4.0 },
            "v" => ErrorRegime::Mixture {
                p_primary: 0.97,
                mean2: 5.0,
                sd2: 5.0,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown scenario '{other}' (expected i..v)"
                )))
            }
        };
        Ok(ScenarioSpec {
            name: name.to_string(),
            regime,
            m: 20,
            n_pop: 100,
            n_sample: 4,
            beta: (1.0, 1.0),
            replicates: 50,
            seed,
        })
    }

    /// Scale up to the full study size: m = 40, N_i = 200, S = 100.
    pub fn full_scale(mut self) -> Self {
        self.m = 40;
        self.n_pop = 200;
        self.replicates = 100;
        self
    }

    fn area_id(&self, area: usize) -> String {
        format!("area{area:03}")
    }
}

/// One generated finite population.
#[derive(Debug, Clone)]
pub struct Population {
    pub m: usize,
    pub n_pop: usize,
    /// Covariates, `m * n_pop`, fixed across replicates of a scenario.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// True area effects of this replicate.
    pub v_true: Vec<f64>,
    /// True targets: beta0 + beta1 * xbar_i + v_i.
    pub theta_true: Vec<f64>,
    /// Population covariate mean per area.
    pub xbar: Vec<f64>,
    /// Which units drew their error from the secondary component.
    pub contaminated: Vec<bool>,
}

/// Generate the population for one replicate. Covariates come from a stream
/// keyed only by the scenario seed, so they are identical across replicates;
/// effects and errors are fresh per replicate.
pub fn generate_population(scenario: &ScenarioSpec, replicate: usize) -> Population {
    let (m, n_pop) = (scenario.m, scenario.n_pop);
    let total = m * n_pop;
    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");

    let mut x_rng = RngStream::derive(scenario.seed, &[tag::COVARIATES]);
    let x: Vec<f64> = (0..total).map(|_| 1.0 + normal.sample(&mut x_rng)).collect();

    let mut rng = RngStream::derive(scenario.seed, &[tag::POPULATION, replicate as u64]);
    let v_true: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();

    let mut y = Vec::with_capacity(total);
    let mut contaminated = vec![false; total];
    let (b0, b1) = scenario.beta;
    #[allow(clippy::needless_range_loop)]
    for area in 0..m {
        for j in 0..n_pop {
            let idx = area * n_pop + j;
            let e = match scenario.regime {
                ErrorRegime::Normal => normal.sample(&mut rng),
                ErrorRegime::Mixture {
                    p_primary,
                    mean2,
                    sd2,
                } => {
                    use rand::Rng;
                    if rng.random_bool(p_primary) {
                        normal.sample(&mut rng)
                    } else {
                        contaminated[idx] = true;
                        mean2 + sd2 * normal.sample(&mut rng)
                    }
                }
                ErrorRegime::StudentT { df } => rand_distr::StudentT::new(df)
                    .expect("valid df")
                    .sample(&mut rng),
            };
            y.push(b0 + b1 * x[idx] + v_true[area] + e);
        }
    }

    let xbar: Vec<f64> = (0..m)
        .map(|area| stats::mean(&x[area * n_pop..(area + 1) * n_pop]))
        .collect();
    let theta_true: Vec<f64> = (0..m)
        .map(|area| b0 + b1 * xbar[area] + v_true[area])
        .collect();

    Population {
        m,
        n_pop,
        x,
        y,
        v_true,
        theta_true,
        xbar,
        contaminated,
    }
}

/// Simple random sample without replacement of `n_sample` units per area,
/// with the area frame carrying population sizes and covariate means.
pub fn draw_sample(
    pop: &Population,
    scenario: &ScenarioSpec,
    rng: &mut RngStream,
) -> Result<(Dataset, AreaFrame)> {
    let n_sample = scenario.n_sample;
    if n_sample > pop.n_pop {
        return Err(Error::SampleTooLarge {
            requested: n_sample,
            available: pop.n_pop,
        });
    }
    let mut records = Vec::with_capacity(pop.m * n_sample);
    let mut frame_rows = Vec::with_capacity(pop.m);
    for area in 0..pop.m {
        let mut chosen: Vec<usize> =
            rand::seq::index::sample(rng, pop.n_pop, n_sample).into_vec();
        chosen.sort_unstable();
        for j in chosen {
            let idx = area * pop.n_pop + j;
            records.push(UnitRecord::new(
                scenario.area_id(area),
                pop.y[idx],
                vec![1.0, pop.x[idx]],
            ));
        }
        frame_rows.push((
            scenario.area_id(area),
            pop.n_pop as u64,
            vec![1.0, pop.xbar[area]],
        ));
    }
    let frame = AreaFrame::new(frame_rows)?;
    let dataset = validate_dataset(&records, &frame, &ValidateOptions::default())?;
    Ok((dataset, frame))
}

/// Fit settings used for every replicate fit in a study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StudyConfig {
    pub burn_in: usize,
    pub n_draws: usize,
    pub thin: usize,
    pub n_chains: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            burn_in: 2_000,
            n_draws: 4_000,
            thin: 1,
            n_chains: 1,
        }
    }
}

/// Per-replicate, per-method, per-area fit record.
#[derive(Debug, Clone)]
struct FitRecord {
    theta_hat: f64,
    post_var: f64,
    ci90: (f64, f64),
    ci95: (f64, f64),
}

/// Aggregated metrics for one (method, area) cell.
#[derive(Debug, Clone, Serialize)]
pub struct AreaMetrics {
    pub method: Variant,
    pub area: usize,
    /// Empirical bias of the posterior-mean predictor.
    pub e_bias: f64,
    /// Empirical MSE.
    pub e_mse: f64,
    /// Mean posterior variance across replicates.
    pub mean_post_var: f64,
    /// Relative bias of the posterior variance against the empirical MSE.
    pub re_v: f64,
    pub noncoverage90: f64,
    pub noncoverage95: f64,
    pub mean_len90: f64,
    pub mean_len95: f64,
}

/// Across-area means of every metric for one method.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Variant,
    pub e_bias: f64,
    pub e_mse: f64,
    pub mean_post_var: f64,
    pub re_v: f64,
    pub noncoverage90: f64,
    pub noncoverage95: f64,
    pub mean_len90: f64,
    pub mean_len95: f64,
}

type AreaMetricCol = (&'static str, fn(&AreaMetrics) -> f64);
type SummaryMetricCol = (&'static str, fn(&MethodSummary) -> f64);

/// Full study output.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsTable {
    pub scenario: ScenarioSpec,
    pub fit_config: StudyConfig,
    pub methods: Vec<Variant>,
    pub per_area: Vec<AreaMetrics>,
    pub per_method: Vec<MethodSummary>,
}

fn fit_one(
    dataset: &Dataset,
    frame: &AreaFrame,
    variant: Variant,
    scenario: &ScenarioSpec,
    cfg: &StudyConfig,
    replicate: usize,
) -> Result<Vec<FitRecord>> {
    let spec = ModelSpec {
        variant,
        chain: ChainConfig {
            n_draws: cfg.n_draws,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            n_chains: cfg.n_chains,
            seed: mix_seed(scenario.seed, &[tag::FIT, replicate as u64, variant as u64]),
        },
    };
    let fit = engine::fit(dataset, frame, &spec)?;
    let draws = fit.draws;
    let mut out = Vec::with_capacity(draws.m());
    for col in &draws.theta {
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(FitRecord {
            theta_hat: stats::mean(col),
            post_var: stats::variance(col),
            ci90: stats::equal_tail_interval(&sorted, 0.90),
            ci95: stats::equal_tail_interval(&sorted, 0.95),
        });
    }
    Ok(out)
}

fn replicate_records(
    scenario: &ScenarioSpec,
    methods: &[Variant],
    cfg: &StudyConfig,
    replicate: usize,
) -> Result<(Vec<f64>, Vec<Vec<FitRecord>>)> {
    let pop = generate_population(scenario, replicate);
    let mut sample_rng = RngStream::derive(scenario.seed, &[tag::SAMPLE, replicate as u64]);
    let (dataset, frame) = draw_sample(&pop, scenario, &mut sample_rng)?;
    let mut per_method = Vec::with_capacity(methods.len());
    for &method in methods {
        let records =
            fit_one(&dataset, &frame, method, scenario, cfg, replicate).map_err(|e| {
                Error::ReplicateFailure {
                    replicate,
                    method: method.name().into(),
                    source: Box::new(e),
                }
            })?;
        per_method.push(records);
    }
    Ok((pop.theta_true, per_method))
}

/// Run the full study: S replicates of (generate, sample, fit each method),
/// then a deterministic reduction keyed by (method, area). A replicate
/// failure aborts the study; nothing is silently dropped.
pub fn run_study(
    scenario: &ScenarioSpec,
    methods: &[Variant],
    cfg: &StudyConfig,
) -> Result<MetricsTable> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let results = crate::parallel::map_indexed(scenario.replicates, |r| {
        replicate_records(scenario, methods, cfg, r)
    });
    let mut replicates = Vec::with_capacity(results.len());
    for r in results {
        replicates.push(r?);
    }
    Ok(aggregate(scenario, methods, cfg, &replicates))
}

fn aggregate(
    scenario: &ScenarioSpec,
    methods: &[Variant],
    cfg: &StudyConfig,
    replicates: &[(Vec<f64>, Vec<Vec<FitRecord>>)],
) -> MetricsTable {
    let s = replicates.len() as f64;
    let m = scenario.m;
    let mut per_area = Vec::with_capacity(methods.len() * m);
    for (mi, &method) in methods.iter().enumerate() {
        for area in 0..m {
            let mut bias = 0.0;
            let mut mse = 0.0;
            let mut post_var = 0.0;
            let mut miss90 = 0.0;
            let mut miss95 = 0.0;
            let mut len90 = 0.0;
            let mut len95 = 0.0;
            for (theta_true, fits) in replicates {
                let truth = theta_true[area];
                let rec = &fits[mi][area];
                let d = rec.theta_hat - truth;
                bias += d;
                mse += d * d;
                post_var += rec.post_var;
                if truth < rec.ci90.0 || truth > rec.ci90.1 {
                    miss90 += 1.0;
                }
                if truth < rec.ci95.0 || truth > rec.ci95.1 {
                    miss95 += 1.0;
                }
                len90 += rec.ci90.1 - rec.ci90.0;
                len95 += rec.ci95.1 - rec.ci95.0;
            }
            let e_mse = mse / s;
            let mean_post_var = post_var / s;
            per_area.push(AreaMetrics {
                method,
                area,
                e_bias: bias / s,
                e_mse,
                mean_post_var,
                re_v: (mean_post_var - e_mse) / e_mse,
                noncoverage90: miss90 / s,
                noncoverage95: miss95 / s,
                mean_len90: len90 / s,
                mean_len95: len95 / s,
            });
        }
    }
    let per_method = methods
        .iter()
        .map(|&method| {
            let rows: Vec<&AreaMetrics> =
                per_area.iter().filter(|r| r.method == method).collect();
            let avg = |f: fn(&AreaMetrics) -> f64| {
                rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64
            };
            MethodSummary {
                method,
                e_bias: avg(|r| r.e_bias),
                e_mse: avg(|r| r.e_mse),
                mean_post_var: avg(|r| r.mean_post_var),
                re_v: avg(|r| r.re_v),
                noncoverage90: avg(|r| r.noncoverage90),
                noncoverage95: avg(|r| r.noncoverage95),
                mean_len90: avg(|r| r.mean_len90),
                mean_len95: avg(|r| r.mean_len95),
            }
        })
        .collect();
    MetricsTable {
        scenario: scenario.clone(),
        fit_config: *cfg,
        methods: methods.to_vec(),
        per_area,
        per_method,
    }
}

impl MetricsTable {
    pub fn method_summary(&self, method: Variant) -> Option<&MethodSummary> {
        self.per_method.iter().find(|s| s.method == method)
    }

    /// metrics.csv in long format: scenario, method, area, metric, value.
    /// Across-area means appear with area = "all".
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let metric_cols: [AreaMetricCol; 8] = [
            ("e_bias", |r| r.e_bias),
            ("e_mse", |r| r.e_mse),
            ("mean_post_var", |r| r.mean_post_var),
            ("re_v", |r| r.re_v),
            ("noncoverage90", |r| r.noncoverage90),
            ("noncoverage95", |r| r.noncoverage95),
            ("mean_len90", |r| r.mean_len90),
            ("mean_len95", |r| r.mean_len95),
        ];
        for r in &self.per_area {
            for (name, get) in metric_cols {
                rows.push(vec![
                    self.scenario.name.clone(),
                    r.method.name().into(),
                    r.area.to_string(),
                    name.into(),
                    fmt_f64(get(r)),
                ]);
            }
        }
        let summary_cols: [SummaryMetricCol; 8] = [
            ("e_bias", |r| r.e_bias),
            ("e_mse", |r| r.e_mse),
            ("mean_post_var", |r| r.mean_post_var),
            ("re_v", |r| r.re_v),
            ("noncoverage90", |r| r.noncoverage90),
            ("noncoverage95", |r| r.noncoverage95),
            ("mean_len90", |r| r.mean_len90),
            ("mean_len95", |r| r.mean_len95),
        ];
        for sm in &self.per_method {
            for (name, get) in summary_cols {
                rows.push(vec![
                    self.scenario.name.clone(),
                    sm.method.name().into(),
                    "all".into(),
                    name.into(),
                    fmt_f64(get(sm)),
                ]);
            }
        }
        write_csv(
            sink,
            &["scenario", "method", "area", "metric", "value"],
            rows,
        )
    }

    /// The full table as one JSON document.
    pub fn write_json<W: Write>(&self, mut sink: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut sink, self)?;
        sink.write_all(b"\n")?;
        Ok(())
    }

    /// One wide CSV per figure panel (area rows, one column per method).
    /// Returns `(file_name, contents)` pairs.
    pub fn panel_files(&self) -> Vec<(String, Vec<u8>)> {
        let panels: [AreaMetricCol; 8] = [
            ("fig3_bias", |r| r.e_bias),
            ("fig3_mse", |r| r.e_mse),
            ("fig4_post_var", |r| r.mean_post_var),
            ("fig4_re_v", |r| r.re_v),
            ("fig5_len90", |r| r.mean_len90),
            ("fig5_len95", |r| r.mean_len95),
            ("fig5_noncov90", |r| r.noncoverage90),
            ("fig5_noncov95", |r| r.noncoverage95),
        ];
        let mut out = Vec::new();
        for (panel, get) in panels {
            let mut buf = Vec::new();
            let mut header = vec!["area".to_string()];
            header.extend(self.methods.iter().map(|m| m.name().to_string()));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = (0..self.scenario.m).map(|area| {
                let mut row = vec![area.to_string()];
                for &method in &self.methods {
                    let rec = self
                        .per_area
                        .iter()
                        .find(|r| r.method == method && r.area == area)
                        .expect("aggregation covers the grid");
                    row.push(fmt_f64(get(rec)));
                }
                row
            });
            write_csv(&mut buf, &header_refs, rows).expect("in-memory write");
            out.push((
                format!("{}_scenario_{}.csv", panel, self.scenario.name),
                buf,
            ));
        }
        out
    }
}
