//! Against-ground-truth deviation measures for real-data studies:
//! per-area geometric-mean targets and the four deviation summaries
//! (AAD, ASD, AARD, ASRD).

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::serialize::{fmt_f64, write_csv};

/// Per-area target values an estimator is scored against.
#[derive(Debug, Clone, Serialize)]
pub struct TruthFrame {
    pub area_ids: Vec<String>,
    pub values: Vec<f64>,
    /// Where the targets came from (file name, "geometric means", ...).
    pub source: String,
}

impl TruthFrame {
    pub fn new(rows: Vec<(String, f64)>, source: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut area_ids = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        for (id, v) in rows {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(format!("target for area {id}")));
            }
            if area_ids.contains(&id) {
                return Err(Error::AreaMismatch(format!("area {id} listed twice")));
            }
            area_ids.push(id);
            values.push(v);
        }
        Ok(TruthFrame {
            area_ids,
            values,
            source: source.into(),
        })
    }

    pub fn value_of(&self, area_id: &str) -> Option<f64> {
        self.area_ids
            .iter()
            .position(|a| a == area_id)
            .map(|i| self.values[i])
    }
}

/// Per-area geometric means of positive responses, computed as the
/// exponential of the mean log so large populations cannot overflow.
/// Areas keep their order of first appearance.
pub fn geometric_means(rows: &[(String, f64)]) -> Result<TruthFrame> {
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut area_ids: Vec<String> = Vec::new();
    let mut log_sums: Vec<f64> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for (row, (id, y)) in rows.iter().enumerate() {
        if y.is_nan() || *y <= 0.0 {
            return Err(Error::NonPositiveValue(format!(
                "response {y} at row {row} (area {id})"
            )));
        }
        match area_ids.iter().position(|a| a == id) {
            Some(i) => {
                log_sums[i] += y.ln();
                counts[i] += 1;
            }
            None => {
                area_ids.push(id.clone());
                log_sums.push(y.ln());
                counts.push(1);
            }
        }
    }
    let values = log_sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (s / c as f64).exp())
        .collect();
    Ok(TruthFrame {
        area_ids,
        values,
        source: "geometric means".into(),
    })
}

/// The four deviation measures of an estimator against the truth, averaged
/// over areas: absolute, squared, absolute relative, squared relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationMeasures {
    pub aad: f64,
    pub asd: f64,
    pub aard: f64,
    pub asrd: f64,
}

/// Compute AAD/ASD/AARD/ASRD for per-area estimates matched to the truth by
/// area id. The area sets must agree exactly; relative measures require
/// strictly positive truth values.
pub fn deviation_measures(
    estimates: &[(String, f64)],
    truth: &TruthFrame,
) -> Result<DeviationMeasures> {
    if estimates.len() != truth.area_ids.len() {
        return Err(Error::AreaMismatch(format!(
            "{} estimates vs {} truth areas",
            estimates.len(),
            truth.area_ids.len()
        )));
    }
    let m = estimates.len() as f64;
    let mut aad = 0.0;
    let mut asd = 0.0;
    let mut aard = 0.0;
    let mut asrd = 0.0;
    for (id, est) in estimates {
        let t = truth
            .value_of(id)
            .ok_or_else(|| Error::AreaMismatch(format!("area {id} missing from truth")))?;
        if t.is_nan() || t <= 0.0 {
            return Err(Error::NonPositiveTruth(format!("area {id} target {t}")));
        }
        let d = est - t;
        aad += d.abs();
        asd += d * d;
        aard += d.abs() / t;
        asrd += d * d / (t * t);
    }
    Ok(DeviationMeasures {
        aad: aad / m,
        asd: asd / m,
        aard: aard / m,
        asrd: asrd / m,
    })
}

/// performance.csv: one row of the four measures per method.
pub fn write_performance_csv<W: Write>(
    rows: &[(String, DeviationMeasures)],
    sink: W,
) -> Result<()> {
    write_csv(
        sink,
        &["method", "aad", "asd", "aard", "asrd"],
        rows.iter().map(|(method, d)| {
            vec![
                method.clone(),
                fmt_f64(d.aad),
                fmt_f64(d.asd),
                fmt_f64(d.aard),
                fmt_f64(d.asrd),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|(a, v)| (a.to_string(), *v)).collect()
    }

    #[test]
    fn geometric_mean_of_4_and_9_is_6() {
        let t = geometric_means(&rows(&[("a", 4.0), ("a", 9.0)])).unwrap();
        assert!((t.values[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_mean_of_constant_area_is_the_constant() {
        let t = geometric_means(&rows(&[("a", 7.5), ("a", 7.5), ("a", 7.5)])).unwrap();
        assert!((t.values[0] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn geometric_mean_is_permutation_invariant_within_area() {
        let a = geometric_means(&rows(&[("a", 2.0), ("a", 8.0), ("a", 5.0)])).unwrap();
        let b = geometric_means(&rows(&[("a", 5.0), ("a", 2.0), ("a", 8.0)])).unwrap();
        assert!((a.values[0] - b.values[0]).abs() < 1e-12);
    }

    #[test]
    fn geometric_mean_survives_huge_values() {
        let t = geometric_means(&rows(&[("a", 1e300), ("a", 1e280)])).unwrap();
        assert!((t.values[0].log10() - 290.0).abs() < 1e-9);
    }

    #[test]
    fn geometric_mean_rejects_nonpositive() {
        assert_eq!(
            geometric_means(&rows(&[("a", 1.0), ("a", 0.0)]))
                .unwrap_err()
                .kind(),
            "NonPositiveValue"
        );
    }

    #[test]
    fn exact_estimates_have_zero_deviation() {
        let truth = TruthFrame::new(rows(&[("a", 2.0), ("b", 5.0)]), "test").unwrap();
        let d = deviation_measures(&rows(&[("a", 2.0), ("b", 5.0)]), &truth).unwrap();
        assert_eq!(
            d,
            DeviationMeasures {
                aad: 0.0,
                asd: 0.0,
                aard: 0.0,
                asrd: 0.0
            }
        );
    }

    #[test]
    fn single_area_formula_plugin() {
        // estimate 3, truth 2: AAD 1, ASD 1, AARD 0.5, ASRD 0.25.
        let truth = TruthFrame::new(rows(&[("a", 2.0)]), "test").unwrap();
        let d = deviation_measures(&rows(&[("a", 3.0)]), &truth).unwrap();
        assert_eq!(d.aad, 1.0);
        assert_eq!(d.asd, 1.0);
        assert_eq!(d.aard, 0.5);
        assert_eq!(d.asrd, 0.25);
    }

    #[test]
    fn scale_equivariance() {
        let truth = TruthFrame::new(rows(&[("a", 2.0), ("b", 4.0), ("c", 9.0)]), "t").unwrap();
        let est = rows(&[("a", 2.5), ("b", 3.0), ("c", 11.0)]);
        let base = deviation_measures(&est, &truth).unwrap();
        let c = 37.5;
        let truth_c = TruthFrame::new(
            truth
                .area_ids
                .iter()
                .zip(&truth.values)
                .map(|(a, v)| (a.clone(), v * c))
                .collect(),
            "t",
        )
        .unwrap();
        let est_c: Vec<(String, f64)> = est.iter().map(|(a, v)| (a.clone(), v * c)).collect();
        let scaled = deviation_measures(&est_c, &truth_c).unwrap();
        assert!((scaled.aad - c * base.aad).abs() < 1e-9);
        assert!((scaled.asd - c * c * base.asd).abs() < 1e-6 * scaled.asd.max(1.0));
        assert!((scaled.aard - base.aard).abs() < 1e-12);
        assert!((scaled.asrd - base.asrd).abs() < 1e-12);
    }

    #[test]
    fn mismatched_and_nonpositive_truth_rejected() {
        let truth = TruthFrame::new(rows(&[("a", 2.0), ("b", 5.0)]), "t").unwrap();
        assert_eq!(
            deviation_measures(&rows(&[("a", 1.0)]), &truth)
                .unwrap_err()
                .kind(),
            "AreaMismatch"
        );
        assert_eq!(
            deviation_measures(&rows(&[("a", 1.0), ("x", 1.0)]), &truth)
                .unwrap_err()
                .kind(),
            "AreaMismatch"
        );
        let bad = TruthFrame::new(rows(&[("a", -2.0)]), "t").unwrap();
        assert_eq!(
            deviation_measures(&rows(&[("a", 1.0)]), &bad)
                .unwrap_err()
                .kind(),
            "NonPositiveTruth"
        );
    }
}
