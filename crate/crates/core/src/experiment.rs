//! Monte Carlo experiment harness.
//!
//! Cells are (policy, hops, threshold, budget) combinations; each runs a
//! fixed number of independent trials. Every trial draws from its own
//! stream derived from the master seed, the policy id, the cell
//! coordinates, and the trial index, so any single trial can be replayed in
//! isolation and whole experiments are reproducible bit for bit regardless
//! of thread scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::ChainParams;
use crate::event::EventLog;
use crate::memory::{MemoryModel, Timestep};
use crate::metrics::{aggregate_metrics, gain_stats, GainStats, MetricsSummary};
use crate::policy::{run_policy, sp_gain_sample, PolicyKind, StopCondition, TrialOutcome};
use crate::rng::RngStream;

/// Full description of an experiment sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub policies: Vec<PolicyKind>,
    /// Template chain configuration; hop counts from `hop_values` override
    /// its `hops`/`link_f0` per cell.
    pub base: ChainParams,
    pub f_th_values: Vec<f64>,
    pub budget_values: Vec<Timestep>,
    pub hop_values: Vec<usize>,
    pub trials: u64,
    pub master_seed: u64,
}

/// Coordinates identifying one experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellKey {
    pub policy: PolicyKind,
    pub hops: usize,
    pub f_th: Option<f64>,
    pub budget: Option<Timestep>,
}

impl CellKey {
    /// Stable labels for per-trial stream derivation.
    fn seed_labels(&self) -> [u64; 4] {
        [
            self.policy.id(),
            self.hops as u64,
            self.f_th.map_or(0, f64::to_bits),
            self.budget.unwrap_or(0),
        ]
    }

    fn stop(&self) -> StopCondition {
        match (self.f_th, self.budget) {
            (Some(f_th), None) => StopCondition::FidelityConstrained { f_th },
            (None, Some(budget)) => StopCondition::TimeConstrained { budget },
            (Some(f_th), Some(budget)) => StopCondition::Joint { f_th, budget },
            (None, None) => panic!("cell needs a threshold or a budget"),
        }
    }
}

/// One cell's outcomes (in trial order) and their summary.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub key: CellKey,
    pub summary: MetricsSummary,
    #[serde(skip)]
    pub outcomes: Vec<TrialOutcome>,
}

/// Derive the stream for one trial of one cell.
pub fn trial_stream(master_seed: u64, key: &CellKey, trial: u64) -> RngStream {
    let labels = key.seed_labels();
    RngStream::derive(
        master_seed,
        &[labels[0], labels[1], labels[2], labels[3], trial],
    )
}

fn chain_for_hops(base: &ChainParams, hops: usize) -> ChainParams {
    let mut params = base.clone();
    if hops != base.hops {
        params.hops = hops;
        let f0 = base.link_f0.first().copied().unwrap_or(0.99);
        params.link_f0 = vec![f0; hops];
    }
    params
}

fn run_trials<F>(trials: u64, run_one: F) -> Vec<TrialOutcome>
where
    F: Fn(u64) -> TrialOutcome + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..trials).into_par_iter().map(run_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(run_one).collect()
    }
}

/// Run every trial of one cell and aggregate.
pub fn run_cell(base: &ChainParams, key: CellKey, trials: u64, master_seed: u64) -> CellResult {
    let params = chain_for_hops(base, key.hops);
    let stop = key.stop();
    let outcomes = run_trials(trials, |trial| {
        let mut rng = trial_stream(master_seed, &key, trial);
        let mut log = EventLog::disabled();
        run_policy(key.policy, &params, stop, &mut rng, &mut log)
    });
    let summary = aggregate_metrics(&outcomes).expect("trials >= 1");
    CellResult {
        key,
        summary,
        outcomes,
    }
}

/// As [`run_cell`] but dropping per-trial outcomes, for dense sweeps.
pub fn run_cell_summary(
    base: &ChainParams,
    key: CellKey,
    trials: u64,
    master_seed: u64,
) -> CellResult {
    let mut cell = run_cell(base, key, trials, master_seed);
    cell.outcomes = Vec::new();
    cell
}

/// Gain distribution of single Swap-Purify cycles under one memory model.
#[derive(Debug, Clone, Serialize)]
pub struct GainCell {
    pub memory: MemoryModel,
    pub stats: Option<GainStats>,
    /// Trials censored before the attempt completed.
    pub censored: u64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Collect per-attempt gain samples for one memory model: each trial runs a
/// single Swap-Purify cycle (two end-to-end pairs, one attempt).
pub fn gain_samples_for_model(
    base: &ChainParams,
    memory: MemoryModel,
    trials: u64,
    master_seed: u64,
) -> GainCell {
    let mut params = base.clone();
    params.memory = memory;
    let model_label = match memory {
        MemoryModel::Cmm { .. } => 1u64,
        MemoryModel::Lmm { .. } => 2,
        MemoryModel::Emm { .. } => 3,
    };
    let raw: Vec<Option<f64>> = {
        let run_one = |trial: u64| -> Option<f64> {
            let mut rng = RngStream::derive(master_seed, &[10, model_label, trial]);
            let mut log = EventLog::disabled();
            sp_gain_sample(&params, &mut rng, &mut log)
        };
        #[cfg(feature = "parallel")]
        {
            (0..trials).into_par_iter().map(run_one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..trials).map(run_one).collect()
        }
    };
    let censored = raw.iter().filter(|s| s.is_none()).count() as u64;
    let samples: Vec<f64> = raw.into_iter().flatten().collect();
    GainCell {
        memory,
        stats: gain_stats(&samples),
        censored,
        samples,
    }
}

/// Per-attempt gain distributions under constant, linear, and exponential
/// memory at a shared coherence time.
pub fn gain_distribution_experiment(
    base: &ChainParams,
    t_coh: f64,
    trials: u64,
    master_seed: u64,
) -> Vec<GainCell> {
    [
        MemoryModel::Cmm { cutoff: None },
        MemoryModel::Lmm { t_coh },
        MemoryModel::Emm { t_coh },
    ]
    .into_iter()
    .map(|memory| gain_samples_for_model(base, memory, trials, master_seed))
    .collect()
}

/// Fidelity-constrained delivery: time-to-serve per (policy, threshold).
pub fn objective1_run(spec: &ExperimentSpec) -> Vec<CellResult> {
    let mut cells = Vec::new();
    for &policy in &spec.policies {
        for &f_th in &spec.f_th_values {
            let key = CellKey {
                policy,
                hops: spec.base.hops,
                f_th: Some(f_th),
                budget: None,
            };
            cells.push(run_cell(&spec.base, key, spec.trials, spec.master_seed));
        }
    }
    cells
}

/// Time-constrained delivery: delivered fidelity and rate per
/// (policy, budget). Delta-purify is skipped here; it needs a threshold.
pub fn objective2_run(spec: &ExperimentSpec) -> Vec<CellResult> {
    let mut cells = Vec::new();
    for &policy in &spec.policies {
        if policy == PolicyKind::DeltaPurify {
            continue;
        }
        for &budget in &spec.budget_values {
            let key = CellKey {
                policy,
                hops: spec.base.hops,
                f_th: None,
                budget: Some(budget),
            };
            cells.push(run_cell(&spec.base, key, spec.trials, spec.master_seed));
        }
    }
    cells
}

/// Joint-constrained delivery: the eta surface over (threshold, budget) per
/// policy. Summaries only.
pub fn objective3_sweep(spec: &ExperimentSpec) -> Vec<CellResult> {
    let mut cells = Vec::new();
    for &policy in &spec.policies {
        for &f_th in &spec.f_th_values {
            for &budget in &spec.budget_values {
                let key = CellKey {
                    policy,
                    hops: spec.base.hops,
                    f_th: Some(f_th),
                    budget: Some(budget),
                };
                cells.push(run_cell_summary(
                    &spec.base,
                    key,
                    spec.trials,
                    spec.master_seed,
                ));
            }
        }
    }
    cells
}

/// Objective 1 and 2 metrics across the hop axis.
#[derive(Debug, Clone, Serialize)]
pub struct ScalabilityResults {
    /// Fidelity-constrained cells: (policy, hops, f_th).
    pub time_cells: Vec<CellResult>,
    /// Time-constrained cells: (policy, hops, budget).
    pub fidelity_cells: Vec<CellResult>,
}

/// Sweep hop counts, rerunning objective 1 over `f_th_values` and
/// objective 2 over `budget_values` at each size.
pub fn scalability_sweep(spec: &ExperimentSpec) -> ScalabilityResults {
    let mut time_cells = Vec::new();
    let mut fidelity_cells = Vec::new();
    for &hops in &spec.hop_values {
        for &policy in &spec.policies {
            for &f_th in &spec.f_th_values {
                let key = CellKey {
                    policy,
                    hops,
                    f_th: Some(f_th),
                    budget: None,
                };
                time_cells.push(run_cell_summary(
                    &spec.base,
                    key,
                    spec.trials,
                    spec.master_seed,
                ));
            }
            if policy == PolicyKind::DeltaPurify {
                continue;
            }
            for &budget in &spec.budget_values {
                let key = CellKey {
                    policy,
                    hops,
                    f_th: None,
                    budget: Some(budget),
                };
                fidelity_cells.push(run_cell_summary(
                    &spec.base,
                    key,
                    spec.trials,
                    spec.master_seed,
                ));
            }
        }
    }
    ScalabilityResults {
        time_cells,
        fidelity_cells,
    }
}

/// Time-to-serve comparison of no-purification, swap-purify, and
/// delta-purify across thresholds and hop counts.
pub fn delta_purify_eval(spec: &ExperimentSpec) -> Vec<CellResult> {
    let policies = [
        PolicyKind::NoPur,
        PolicyKind::SwapPurify,
        PolicyKind::DeltaPurify,
    ];
    let mut cells = Vec::new();
    for &hops in &spec.hop_values {
        for policy in policies {
            for &f_th in &spec.f_th_values {
                let key = CellKey {
                    policy,
                    hops,
                    f_th: Some(f_th),
                    budget: None,
                };
                cells.push(run_cell(&spec.base, key, spec.trials, spec.master_seed));
            }
        }
    }
    cells
}

/// One probe of the coherence-time calibration sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationPoint {
    pub t_coh: f64,
    pub emm_fraction_positive: f64,
    pub emm_mean_gain: f64,
    pub lmm_fraction_positive: f64,
    pub lmm_mean_gain: f64,
}

/// Result of calibrating the coherence time against a target fraction of
/// beneficial purification attempts under exponential memory.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub target: f64,
    pub tolerance: f64,
    pub points: Vec<CalibrationPoint>,
    /// Coherence time whose EMM fraction lies within the tolerance band,
    /// when the sweep range brackets the target.
    pub calibrated_t_coh: Option<f64>,
    pub calibrated: Option<CalibrationPoint>,
}

fn probe_t_coh(base: &ChainParams, t_coh: f64, trials: u64, master_seed: u64) -> CalibrationPoint {
    let emm = gain_samples_for_model(base, MemoryModel::Emm { t_coh }, trials, master_seed);
    let lmm = gain_samples_for_model(base, MemoryModel::Lmm { t_coh }, trials, master_seed);
    let frac = |c: &GainCell| c.stats.map_or(0.0, |s| s.fraction_positive);
    let mean = |c: &GainCell| c.stats.map_or(0.0, |s| s.mean);
    CalibrationPoint {
        t_coh,
        emm_fraction_positive: frac(&emm),
        emm_mean_gain: mean(&emm),
        lmm_fraction_positive: frac(&lmm),
        lmm_mean_gain: mean(&lmm),
    }
}

/// Find a coherence time at which the EMM beneficial fraction matches
/// `target` within `tolerance`.
///
/// The fraction rises monotonically with the coherence time (slower decay
/// means less asymmetry at the attempt), so a coarse log-spaced sweep over
/// `[t_min, t_max]` brackets the target and bisection refines it.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_t_coh(
    base: &ChainParams,
    target: f64,
    tolerance: f64,
    t_min: f64,
    t_max: f64,
    grid: usize,
    trials: u64,
    master_seed: u64,
) -> CalibrationResult {
    assert!(grid >= 2 && t_min > 0.0 && t_max > t_min);
    let mut points = Vec::with_capacity(grid);
    let log_step = (t_max / t_min).ln() / (grid - 1) as f64;
    for i in 0..grid {
        let t_coh = (t_min.ln() + log_step * i as f64).exp();
        points.push(probe_t_coh(base, t_coh, trials, master_seed));
    }

    // bracket the target between adjacent grid points
    let bracket = points
        .windows(2)
        .find(|w| w[0].emm_fraction_positive <= target && target <= w[1].emm_fraction_positive)
        .map(|w| (w[0], w[1]));

    let mut calibrated = points
        .iter()
        .copied()
        .filter(|p| (p.emm_fraction_positive - target).abs() <= tolerance)
        .min_by(|a, b| {
            (a.emm_fraction_positive - target)
                .abs()
                .total_cmp(&(b.emm_fraction_positive - target).abs())
        });

    if let Some((mut lo, mut hi)) = bracket {
        for _ in 0..24 {
            let best_err = calibrated
                .map(|p| (p.emm_fraction_positive - target).abs())
                .unwrap_or(f64::INFINITY);
            if best_err <= tolerance * 0.25 {
                break;
            }
            let mid = (lo.t_coh * hi.t_coh).sqrt();
            let probe = probe_t_coh(base, mid, trials, master_seed);
            points.push(probe);
            let err = (probe.emm_fraction_positive - target).abs();
            if err <= tolerance && err < best_err {
                calibrated = Some(probe);
            }
            if probe.emm_fraction_positive < target {
                lo = probe;
            } else {
                hi = probe;
            }
            if hi.t_coh / lo.t_coh < 1.001 {
                break;
            }
        }
    }

    CalibrationResult {
        target,
        tolerance,
        points,
        calibrated_t_coh: calibrated.map(|p| p.t_coh),
        calibrated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryModel;

    fn base() -> ChainParams {
        ChainParams::uniform(2, 0.99, 0.3, 0.9, MemoryModel::IDEAL)
    }

    fn key(policy: PolicyKind, f_th: Option<f64>, budget: Option<Timestep>) -> CellKey {
        CellKey {
            policy,
            hops: 2,
            f_th,
            budget,
        }
    }

    #[test]
    fn cell_runs_are_reproducible() {
        let k = key(PolicyKind::NoPur, Some(0.9), None);
        let a = run_cell(&base(), k, 200, 42);
        let b = run_cell(&base(), k, 200, 42);
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn distinct_cells_use_distinct_streams() {
        let a = run_cell(&base(), key(PolicyKind::NoPur, Some(0.9), None), 100, 42);
        let b = run_cell(&base(), key(PolicyKind::NoPur, Some(0.8), None), 100, 42);
        // same physics (both thresholds sit below the ceiling) but different
        // streams: delivery times should not be identical across the board
        let ta: Vec<_> = a.outcomes.iter().map(|o| o.t_deliver).collect();
        let tb: Vec<_> = b.outcomes.iter().map(|o| o.t_deliver).collect();
        assert_ne!(ta, tb);
    }

    #[test]
    fn conservation_and_eta_bounds() {
        let mut p = base();
        p.cutoff = 30;
        let cell = run_cell(&p, key(PolicyKind::SwapPurify, Some(0.985), None), 300, 7);
        let s = &cell.summary;
        assert_eq!(s.delivered + s.censored, s.trials);
        assert!((0.0..=1.0).contains(&s.eta));
    }

    #[test]
    fn eta_monotone_in_budget() {
        let spec = ExperimentSpec {
            policies: vec![PolicyKind::NoPur],
            base: base(),
            f_th_values: vec![0.9],
            budget_values: vec![5, 10, 20, 40],
            hop_values: vec![2],
            trials: 400,
            master_seed: 11,
        };
        let cells = objective3_sweep(&spec);
        let etas: Vec<f64> = cells.iter().map(|c| c.summary.eta).collect();
        for w in etas.windows(2) {
            assert!(
                w[1] >= w[0],
                "eta must not fall with a larger budget: {etas:?}"
            );
        }
    }

    #[test]
    fn gain_distribution_constant_memory_all_positive() {
        let cells = gain_distribution_experiment(&base(), 100.0, 400, 3);
        assert_eq!(cells.len(), 3);
        let cmm = &cells[0];
        assert!(matches!(cmm.memory, MemoryModel::Cmm { .. }));
        let stats = cmm.stats.expect("constant memory always completes");
        assert_eq!(stats.fraction_positive, 1.0);
        assert!(cmm.samples.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn gain_distribution_heavy_decay_mostly_negative() {
        let mut p = base();
        p.p_e = 0.1;
        let cells = gain_distribution_experiment(&p, 8.0, 400, 3);
        let emm = &cells[2];
        assert!(matches!(emm.memory, MemoryModel::Emm { .. }));
        let stats = emm.stats.expect("some attempts complete");
        assert!(stats.fraction_positive < 0.5);
        assert!(stats.mean < 0.0);
    }

    #[test]
    fn objective1_produces_a_cell_per_policy_threshold() {
        let spec = ExperimentSpec {
            policies: vec![PolicyKind::NoPur, PolicyKind::SwapPurify],
            base: base(),
            f_th_values: vec![0.8, 0.9],
            budget_values: vec![],
            hop_values: vec![2],
            trials: 50,
            master_seed: 5,
        };
        let cells = objective1_run(&spec);
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.summary.trials == 50));
    }

    #[test]
    fn objective2_eta_ordering_and_small_budget_fidelity() {
        // under temporal decay, no-pur delivers far more often within a
        // budget, while swap-purify's rare fast successes carry higher
        // fidelity at small budgets
        let mut p = base();
        p.p_e = 0.1;
        p.memory = MemoryModel::Emm { t_coh: 53.0 };
        let spec = ExperimentSpec {
            policies: vec![
                PolicyKind::NoPur,
                PolicyKind::SwapPurify,
                PolicyKind::PurifySwap,
            ],
            base: p,
            f_th_values: vec![],
            budget_values: vec![15, 40],
            hop_values: vec![2],
            trials: 8_000,
            master_seed: 21,
        };
        let cells = objective2_run(&spec);
        assert_eq!(cells.len(), 6);
        let eta = |policy, budget| {
            cells
                .iter()
                .find(|c| c.key.policy == policy && c.key.budget == Some(budget))
                .unwrap()
                .summary
                .clone()
        };
        for budget in [15u64, 40] {
            let no_pur = eta(PolicyKind::NoPur, budget);
            let sp = eta(PolicyKind::SwapPurify, budget);
            let ps = eta(PolicyKind::PurifySwap, budget);
            assert!(
                no_pur.eta > sp.eta && no_pur.eta > ps.eta,
                "budget {budget}: no-pur eta {} must dominate sp {} and ps {}",
                no_pur.eta,
                sp.eta,
                ps.eta
            );
        }
        let no_pur_15 = eta(PolicyKind::NoPur, 15).fidelity.unwrap().mean;
        let sp_15 = eta(PolicyKind::SwapPurify, 15).fidelity.unwrap().mean;
        assert!(
            sp_15 > no_pur_15,
            "sp fidelity {sp_15} not above no-pur {no_pur_15} at the small budget"
        );
    }

    #[test]
    fn scalability_sweep_covers_the_hop_axis() {
        let spec = ExperimentSpec {
            policies: vec![PolicyKind::NoPur, PolicyKind::DeltaPurify],
            base: base(),
            f_th_values: vec![0.9],
            budget_values: vec![25],
            hop_values: vec![2, 3],
            trials: 60,
            master_seed: 4,
        };
        let results = scalability_sweep(&spec);
        // two policies x two hop counts on the fidelity-constrained side
        assert_eq!(results.time_cells.len(), 4);
        let hops: Vec<usize> = results.time_cells.iter().map(|c| c.key.hops).collect();
        assert!(hops.contains(&2) && hops.contains(&3));
        // delta-purify is skipped on the budget side
        assert_eq!(results.fidelity_cells.len(), 2);
        assert!(results
            .fidelity_cells
            .iter()
            .all(|c| c.key.policy == PolicyKind::NoPur));
        // rebuilt chains keep the uniform link fidelity
        assert!(results.time_cells.iter().all(|c| c.summary.trials == 60));
    }

    #[test]
    fn delta_purify_eval_reports_abort_counters() {
        let mut p = base();
        p.p_e = 0.15;
        p.memory = MemoryModel::Emm { t_coh: 300.0 };
        p.cutoff = 4_000;
        let spec = ExperimentSpec {
            policies: vec![],
            base: p,
            f_th_values: vec![0.9, 0.985],
            budget_values: vec![],
            hop_values: vec![2],
            trials: 300,
            master_seed: 31,
        };
        let cells = delta_purify_eval(&spec);
        // three fixed policies x two thresholds
        assert_eq!(cells.len(), 6);
        // every delivered fidelity-constrained outcome meets its threshold
        for cell in &cells {
            let f_th = cell.key.f_th.unwrap();
            for outcome in &cell.outcomes {
                if let Some(f) = outcome.f_deliver {
                    assert!(f >= f_th, "{:?} delivered {f} below {f_th}", cell.key);
                }
            }
        }
        // above the ceiling the delta policy screens: some aborts are logged
        let delta_hi = cells
            .iter()
            .find(|c| c.key.policy == PolicyKind::DeltaPurify && c.key.f_th == Some(0.985))
            .unwrap();
        let counters = &delta_hi.summary.counters;
        assert!(
            counters.delta_aborts + counters.feasibility_aborts > 0,
            "expected screening activity above the ceiling"
        );
        assert!(delta_hi.summary.eta > 0.0);
    }

    #[test]
    fn calibration_brackets_a_monotone_fraction() {
        // cheap smoke calibration at low trial count; the acceptance suite
        // runs the full-scale version
        let mut p = base();
        p.p_e = 0.1;
        p.p_s = 0.9;
        let result = calibrate_t_coh(&p, 0.143, 0.03, 5.0, 2_000.0, 7, 1_500, 99);
        let t = result.calibrated_t_coh.expect("target bracketed");
        let point = result.calibrated.unwrap();
        assert!((point.emm_fraction_positive - 0.143).abs() <= 0.03);
        assert!(t > 5.0 && t < 2_000.0);
    }
}
