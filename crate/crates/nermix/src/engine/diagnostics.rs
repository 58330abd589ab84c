//! Convergence diagnostics on retained draws: split-chain scale reduction
//! and autocorrelation-adjusted effective sample size.

/// Split-chain potential scale reduction (split R-hat).
///
/// Each chain is halved, so a single chain still yields a between/within
/// comparison. Returns 1.0 for degenerate (constant) draws.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let half = c.len() / 2;
        if half < 2 {
            return f64::NAN;
        }
        halves.push(&c[..half]);
        halves.push(&c[c.len() - half..]);
    }
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| crate::stats::mean(h)).collect();
    let vars: Vec<f64> = halves.iter().map(|h| crate::stats::variance(h)).collect();
    let w = crate::stats::mean(&vars);
    let b = n * crate::stats::variance(&means);
    if w <= 0.0 {
        return 1.0;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

fn autocovariance(xs: &[f64], mean: f64, lag: usize) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n - lag {
        acc += (xs[i] - mean) * (xs[i + lag] - mean);
    }
    acc / n as f64
}

/// Effective sample size across chains using chain-averaged autocorrelations
/// and Geyer's initial positive-pair truncation.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let c = chains.len() as f64;
    let n = chains[0].len();
    let total = c * n as f64;
    if n < 4 {
        return total;
    }
    let means: Vec<f64> = chains.iter().map(|ch| crate::stats::mean(ch)).collect();
    let vars: Vec<f64> = chains.iter().map(|ch| crate::stats::variance(ch)).collect();
    let w = crate::stats::mean(&vars);
    if w <= 0.0 {
        return total;
    }
    let b_over_n = if chains.len() > 1 {
        crate::stats::variance(&means)
    } else {
        0.0
    };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;

    let mut tau = 1.0;
    let mut lag = 1;
    let max_lag = n - 2;
    let mut prev_pair = f64::INFINITY;
    while lag < max_lag {
        let rho = |l: usize| -> f64 {
            let acov: f64 = chains
                .iter()
                .zip(&means)
                .map(|(ch, &m)| autocovariance(ch, m, l))
                .sum::<f64>()
                / c;
            1.0 - (w - acov) / var_plus
        };
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        // Enforce monotone decrease of the pair sums.
        let pair = pair.min(prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
        lag += 2;
    }
    (total / tau).min(total)
}
