//! Deterministic aggregation of trial outcomes.
//!
//! Quantiles use the nearest-rank definition on the sorted sample: the
//! p-quantile of n values is the element at 1-based rank `ceil(p * n)`.
//! Means are folded in trial order, so repeated runs aggregate to the same
//! bits regardless of how trials were scheduled.

use serde::Serialize;

use crate::chain::Counters;
use crate::policy::TrialOutcome;

/// Summary of one empirical distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistStats {
    pub count: u64,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Smallest sample at or above `q1 - 1.5 IQR` (Tukey whisker).
    pub whisker_lo: f64,
    /// Largest sample at or below `q3 + 1.5 IQR`.
    pub whisker_hi: f64,
    pub min: f64,
    pub max: f64,
}

/// Summary of pooled purification-gain samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainStats {
    pub count: u64,
    /// Fraction of attempts with strictly positive gain.
    pub fraction_positive: f64,
    pub mean: f64,
    pub p05: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub p95: f64,
}

/// Aggregated statistics over one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub trials: u64,
    pub delivered: u64,
    pub censored: u64,
    /// Delivery rate: `delivered / trials`, exactly.
    pub eta: f64,
    /// Delivery-time distribution over delivered trials.
    pub time: Option<DistStats>,
    /// Delivered-fidelity distribution over delivered trials.
    pub fidelity: Option<DistStats>,
    /// Pooled purification-gain distribution, when any attempts happened.
    pub gain: Option<GainStats>,
    /// Operation counters summed over all trials.
    pub counters: Counters,
}

/// Aggregation rejected an empty input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot aggregate an empty outcome stream")]
pub struct EmptyStream;

/// Nearest-rank quantile of a sorted, non-empty sample.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&p), "quantile level outside [0, 1]");
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Distribution summary of samples given in trial order. `None` when empty.
pub fn dist_stats(samples: &[f64]) -> Option<DistStats> {
    if samples.is_empty() {
        return None;
    }
    let count = samples.len() as u64;
    // mean folded in the order given
    let mean = samples.iter().sum::<f64>() / count as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = nearest_rank(&sorted, 0.25);
    let median = nearest_rank(&sorted, 0.50);
    let q3 = nearest_rank(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = *sorted
        .iter()
        .find(|&&v| v >= lo_fence)
        .expect("q1 itself is inside the fence");
    let whisker_hi = *sorted
        .iter()
        .rev()
        .find(|&&v| v <= hi_fence)
        .expect("q3 itself is inside the fence");
    Some(DistStats {
        count,
        mean,
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
    })
}

/// Gain summary of samples given in attempt order. `None` when empty.
pub fn gain_stats(samples: &[f64]) -> Option<GainStats> {
    if samples.is_empty() {
        return None;
    }
    let count = samples.len() as u64;
    let positive = samples.iter().filter(|&&g| g > 0.0).count() as u64;
    let mean = samples.iter().sum::<f64>() / count as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(GainStats {
        count,
        fraction_positive: positive as f64 / count as f64,
        mean,
        p05: nearest_rank(&sorted, 0.05),
        q1: nearest_rank(&sorted, 0.25),
        median: nearest_rank(&sorted, 0.50),
        q3: nearest_rank(&sorted, 0.75),
        p95: nearest_rank(&sorted, 0.95),
    })
}

/// Reduce an ordered trial stream to its summary. The reduction order is
/// fixed by the slice order (trial index), so repeated runs are bitwise
/// identical.
pub fn aggregate_metrics(outcomes: &[TrialOutcome]) -> Result<MetricsSummary, EmptyStream> {
    if outcomes.is_empty() {
        return Err(EmptyStream);
    }
    let trials = outcomes.len() as u64;
    let mut times = Vec::new();
    let mut fidelities = Vec::new();
    let mut gains = Vec::new();
    let mut counters = Counters::default();
    let mut delivered = 0u64;
    for outcome in outcomes {
        if outcome.delivered {
            delivered += 1;
            times.push(outcome.t_deliver.expect("delivered trial has a time") as f64);
            fidelities.push(outcome.f_deliver.expect("delivered trial has a fidelity"));
        }
        gains.extend_from_slice(&outcome.gain_samples);
        counters.generations += outcome.counters.generations;
        counters.swaps += outcome.counters.swaps;
        counters.purifications += outcome.counters.purifications;
        counters.delta_aborts += outcome.counters.delta_aborts;
        counters.feasibility_aborts += outcome.counters.feasibility_aborts;
    }
    Ok(MetricsSummary {
        trials,
        delivered,
        censored: trials - delivered,
        eta: delivered as f64 / trials as f64,
        time: dist_stats(&times),
        fidelity: dist_stats(&fidelities),
        gain: gain_stats(&gains),
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(delivered: bool, t: u64, f: f64) -> TrialOutcome {
        TrialOutcome {
            delivered,
            t_deliver: delivered.then_some(t),
            f_deliver: delivered.then_some(f),
            gain_samples: Vec::new(),
            counters: Counters::default(),
        }
    }

    #[test]
    fn single_delivered_trial() {
        let s = aggregate_metrics(&[outcome(true, 7, 0.9)]).unwrap();
        assert_eq!(s.eta, 1.0);
        assert_eq!(s.delivered, 1);
        assert_eq!(s.time.unwrap().median, 7.0);
        assert_eq!(s.fidelity.unwrap().median, 0.9);
        assert!(s.gain.is_none());
    }

    #[test]
    fn censored_trials_lower_eta() {
        let s = aggregate_metrics(&[outcome(true, 4, 0.8), outcome(false, 0, 0.0)]).unwrap();
        assert_eq!(s.eta, 0.5);
        assert_eq!(s.censored, 1);
        assert_eq!(s.delivered + s.censored, s.trials);
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert_eq!(aggregate_metrics(&[]), Err(EmptyStream));
    }

    #[test]
    fn nearest_rank_against_brute_force() {
        // independent oracle: scan for the smallest element covering p*n
        fn oracle(sorted: &[f64], p: f64) -> f64 {
            let need = (p * sorted.len() as f64).ceil().max(1.0) as usize;
            sorted[need - 1]
        }
        let mut samples: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        for p in [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0] {
            assert_eq!(nearest_rank(&sorted, p), oracle(&sorted, p), "p = {p}");
        }
        samples.truncate(1);
        assert_eq!(nearest_rank(&[42.0], 0.5), 42.0);
    }

    #[test]
    fn quantiles_match_sorted_oracle_on_synthetic_outcomes() {
        // golden check on a known layout: times 1..=100 delivered in order
        let outcomes: Vec<TrialOutcome> = (1..=100)
            .map(|t| outcome(true, t, t as f64 / 100.0))
            .collect();
        let s = aggregate_metrics(&outcomes).unwrap();
        let t = s.time.unwrap();
        assert_eq!(t.q1, 25.0);
        assert_eq!(t.median, 50.0);
        assert_eq!(t.q3, 75.0);
        assert_eq!(t.min, 1.0);
        assert_eq!(t.max, 100.0);
        assert_eq!(t.mean, 50.5);
        // whiskers stay on real samples
        assert_eq!(t.whisker_lo, 1.0);
        assert_eq!(t.whisker_hi, 100.0);
    }

    #[test]
    fn whiskers_exclude_outliers() {
        let mut samples: Vec<f64> = (1..=20).map(f64::from).collect();
        samples.push(1_000.0);
        let d = dist_stats(&samples).unwrap();
        assert_eq!(d.max, 1_000.0);
        assert!(d.whisker_hi <= 20.0);
    }

    #[test]
    fn gain_stats_fraction() {
        let g = gain_stats(&[0.1, -0.2, 0.3, -0.4, 0.0]).unwrap();
        assert_eq!(g.count, 5);
        assert_eq!(g.fraction_positive, 0.4);
        assert!((g.mean - (0.1 - 0.2 + 0.3 - 0.4) / 5.0).abs() < 1e-15);
    }

    #[test]
    fn aggregation_is_order_fixed() {
        let outcomes: Vec<TrialOutcome> = (0..50)
            .map(|i| outcome(i % 3 != 0, 10 + i, 0.5 + (i as f64) * 0.003))
            .collect();
        let a = aggregate_metrics(&outcomes).unwrap();
        let b = aggregate_metrics(&outcomes).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_synthetic_stream_matches_sort_oracle() {
        // 100k outcomes with scrambled delivery times; quantiles must equal
        // a from-scratch sort of the delivered subset
        let n = 100_000u64;
        let outcomes: Vec<TrialOutcome> = (0..n)
            .map(|i| {
                let t = (i * 48_271) % 1_000_003;
                outcome(i % 10 != 0, t, (t % 997) as f64 / 997.0)
            })
            .collect();
        let s = aggregate_metrics(&outcomes).unwrap();
        let mut times: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.delivered)
            .map(|o| o.t_deliver.unwrap() as f64)
            .collect();
        times.sort_by(f64::total_cmp);
        let oracle = |p: f64| times[((p * times.len() as f64).ceil() as usize).max(1) - 1];
        let t = s.time.unwrap();
        assert_eq!(t.q1, oracle(0.25));
        assert_eq!(t.median, oracle(0.50));
        assert_eq!(t.q3, oracle(0.75));
        assert_eq!(t.min, times[0]);
        assert_eq!(t.max, times[times.len() - 1]);
        assert_eq!(s.eta, 0.9);
        assert_eq!(s.delivered + s.censored, s.trials);
    }
}
