//! Statistical agreement between simulated purification attempts and the
//! closed-form success probability: empirical frequencies over logged
//! (f1, f2) inputs must match the map within binomial three-sigma, binned
//! by predicted probability over the observed range.

use qpurify::policy::sp_gain_sample;
use qpurify::{
    purification_success_prob, ChainParams, Event, EventLog, Fidelity, MemoryModel, PolicyKind,
    RngStream, StopCondition,
};

fn collect_attempts(log: &EventLog, sink: &mut Vec<(f64, bool)>) {
    for event in log.events() {
        if let Event::PurifyAttempt {
            f1, f2, success, ..
        } = *event
        {
            let p =
                purification_success_prob(Fidelity::new(f1).unwrap(), Fidelity::new(f2).unwrap());
            sink.push((p, success));
        }
    }
}

fn check_binned(attempts: &[(f64, bool)], context: &str) {
    assert!(
        attempts.len() >= 100_000,
        "{context}: {} attempts",
        attempts.len()
    );
    let lo = attempts.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let hi = attempts
        .iter()
        .map(|a| a.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let bins = 8usize;
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut count = vec![0u64; bins];
    let mut hits = vec![0u64; bins];
    let mut predicted_sum = vec![0.0f64; bins];
    for &(p, success) in attempts {
        let idx = (((p - lo) / width) as usize).min(bins - 1);
        count[idx] += 1;
        predicted_sum[idx] += p;
        if success {
            hits[idx] += 1;
        }
    }
    let mut checked = 0;
    for i in 0..bins {
        if count[i] < 500 {
            continue;
        }
        checked += 1;
        let predicted = predicted_sum[i] / count[i] as f64;
        let observed = hits[i] as f64 / count[i] as f64;
        let sigma = (predicted * (1.0 - predicted) / count[i] as f64).sqrt();
        assert!(
            (observed - predicted).abs() <= 3.0 * sigma,
            "{context} bin {i}: observed {observed:.4} predicted {predicted:.4} \
             (n = {}, 3 sigma = {:.4})",
            count[i],
            3.0 * sigma
        );
    }
    assert!(
        checked >= 3,
        "{context}: too few populated bins ({checked})"
    );
}

#[test]
fn sp_attempt_success_frequency_matches_the_map() {
    // asynchronous heralding under decay spreads the inputs over a wide
    // range of predicted probabilities
    let params = ChainParams::uniform(2, 0.99, 0.3, 0.9, MemoryModel::Emm { t_coh: 53.0 });
    let mut attempts = Vec::new();
    let mut trial = 0u64;
    while attempts.len() < 100_000 {
        let mut rng = RngStream::derive(0xa77e, &[trial]);
        let mut log = EventLog::enabled();
        let _ = sp_gain_sample(&params, &mut rng, &mut log);
        collect_attempts(&log, &mut attempts);
        trial += 1;
    }
    check_binned(&attempts, "sp");
}

#[test]
fn ps_attempt_success_frequency_matches_the_map() {
    let params = ChainParams::uniform(2, 0.95, 0.25, 0.9, MemoryModel::Emm { t_coh: 80.0 });
    let mut attempts = Vec::new();
    let mut trial = 0u64;
    while attempts.len() < 100_000 {
        let mut rng = RngStream::derive(0xb1ae, &[trial]);
        let mut log = EventLog::enabled();
        let _ = qpurify::run_policy(
            PolicyKind::PurifySwap,
            &params,
            StopCondition::FidelityConstrained { f_th: 0.9 },
            &mut rng,
            &mut log,
        );
        collect_attempts(&log, &mut attempts);
        trial += 1;
    }
    check_binned(&attempts, "ps");
}
