//! Subcommand implementations.

use qpurify::experiment::{run_cell_summary, trial_stream};
use qpurify::{
    calibrate_t_coh, delta_tolerance, f1_max, f2_min, find_delta_max, gain_grid, run_cell, CellKey,
    CellResult, DeltaRole, EventLog, Fidelity, PolicyKind, StopCondition, TrialOutcome,
};

use crate::config::RunConfig;
use crate::output::{
    compare_csv, compare_diffs_csv, events_log, gains_csv, heatmap_csv, trials_csv, write_manifest,
    OutDir, RunSummary, EVENTS_HEADER,
};
use crate::CliError;

/// Analytical tables: the asymmetry-tolerance profile, the gain grid, and
/// the universal maximum.
pub fn analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = OutDir::create(&cfg.out_dir)?;
    let res = cfg.grid_res;

    // delta-table.csv: interior grid over (0.5, 1)
    let mut table = String::from("f,delta_superior,delta_inferior,f2_min,f1_max\n");
    for i in 1..res - 1 {
        let f = 0.5 + 0.5 * i as f64 / (res - 1) as f64;
        let fid = Fidelity::new(f).expect("grid stays in range");
        let sup = delta_tolerance(fid, DeltaRole::AsSuperior).expect("interior point");
        let inf = delta_tolerance(fid, DeltaRole::AsInferior).expect("interior point");
        let partner_min = f2_min(fid).expect("interior point").get();
        let superior_max = f1_max(fid).expect("interior point").get();
        table.push_str(&format!("{f},{sup},{inf},{partner_min},{superior_max}\n"));
    }
    dir.write("delta-table.csv", &table)?;

    // gain-grid.csv over [0.5, 1]^2
    let grid = gain_grid(res).map_err(|e| CliError::Config(e.to_string()))?;
    let mut grid_csv = String::from("f1,f2,gain\n");
    for i in 0..res {
        for j in 0..res {
            grid_csv.push_str(&format!(
                "{},{},{}\n",
                grid.axis_value(i),
                grid.axis_value(j),
                grid.value(i, j)
            ));
        }
    }
    dir.write("gain-grid.csv", &grid_csv)?;

    dir.write_json("delta-max.json", &find_delta_max())?;
    write_manifest(&dir, "analyze", cfg)
}

/// Resolve the stop condition for single-cell runs.
fn single_stop(cfg: &RunConfig) -> Result<(Option<f64>, Option<u64>), CliError> {
    let f_th = match cfg.f_th.as_slice() {
        [] => None,
        [v] => Some(*v),
        _ => {
            return Err(CliError::Config(
                "simulate takes a single f_th; use `sweep` for lists".into(),
            ))
        }
    };
    let budget = match cfg.budget.as_slice() {
        [] => None,
        [v] => Some(*v),
        _ => {
            return Err(CliError::Config(
                "simulate takes a single budget; use `sweep` for lists".into(),
            ))
        }
    };
    if f_th.is_none() && budget.is_none() {
        return Err(CliError::Config(
            "simulate needs --f-th, --budget, or both".into(),
        ));
    }
    Ok((f_th, budget))
}

/// Run one policy at one operating point; emit per-trial and summary files.
pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let policy = match cfg.policies.as_slice() {
        [p] => *p,
        _ => {
            return Err(CliError::Config(
                "simulate takes exactly one --policy; use `compare` for several".into(),
            ))
        }
    };
    let (f_th, budget) = single_stop(cfg)?;
    if policy == PolicyKind::DeltaPurify && f_th.is_none() {
        return Err(CliError::Config("delta-purify requires --f-th".into()));
    }
    let key = CellKey {
        policy,
        hops: cfg.chain.hops,
        f_th,
        budget,
    };

    let dir = OutDir::create(&cfg.out_dir)?;
    let cell = if cfg.debug_events {
        simulate_with_events(cfg, key, &dir)?
    } else {
        run_cell(&cfg.chain, key, cfg.trials, cfg.chain.seed)
    };

    dir.write("trials.csv", &trials_csv(&cell.outcomes))?;
    if cell.outcomes.iter().any(|o| !o.gain_samples.is_empty()) {
        dir.write("gains.csv", &gains_csv(&cell.outcomes))?;
    }
    dir.write_json(
        "summary.json",
        &RunSummary {
            policy: policy.to_string(),
            hops: cfg.chain.hops,
            f_th,
            budget,
            f_lim: cfg.chain.f_lim().get(),
            metrics: &cell.summary,
        },
    )?;
    write_manifest(&dir, "simulate", cfg)
}

/// Sequential rerun with event logging; outcomes are identical to the
/// parallel path because each trial owns its derived stream.
fn simulate_with_events(
    cfg: &RunConfig,
    key: CellKey,
    dir: &OutDir,
) -> Result<CellResult, CliError> {
    let stop = match (key.f_th, key.budget) {
        (Some(f_th), None) => StopCondition::FidelityConstrained { f_th },
        (None, Some(budget)) => StopCondition::TimeConstrained { budget },
        (Some(f_th), Some(budget)) => StopCondition::Joint { f_th, budget },
        (None, None) => unreachable!("validated by single_stop"),
    };
    let mut outcomes: Vec<TrialOutcome> = Vec::with_capacity(cfg.trials as usize);
    let mut sink = String::from(EVENTS_HEADER);
    for trial in 0..cfg.trials {
        let mut rng = trial_stream(cfg.chain.seed, &key, trial);
        let mut log = EventLog::enabled();
        let outcome = qpurify::run_policy(key.policy, &cfg.chain, stop, &mut rng, &mut log);
        events_log(trial as usize, &log, &mut sink);
        outcomes.push(outcome);
    }
    dir.write("events.log", &sink)?;
    let summary = qpurify::aggregate_metrics(&outcomes).expect("trials >= 1");
    Ok(CellResult {
        key,
        summary,
        outcomes,
    })
}

/// Dense eta surface over (policy, f_th, budget, hops).
pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.f_th.is_empty() || cfg.budget.is_empty() {
        return Err(CliError::Config(
            "sweep needs non-empty --f-th and --budget axes".into(),
        ));
    }
    let hops_axis = if cfg.hops_axis.is_empty() {
        vec![cfg.chain.hops]
    } else {
        cfg.hops_axis.clone()
    };
    let mut cells = Vec::new();
    for &policy in &cfg.policies {
        for &hops in &hops_axis {
            for &f_th in &cfg.f_th {
                for &budget in &cfg.budget {
                    let key = CellKey {
                        policy,
                        hops,
                        f_th: Some(f_th),
                        budget: Some(budget),
                    };
                    cells.push(run_cell_summary(
                        &cfg.chain,
                        key,
                        cfg.trials,
                        cfg.chain.seed,
                    ));
                }
            }
        }
    }
    let dir = OutDir::create(&cfg.out_dir)?;
    dir.write("heatmap.csv", &heatmap_csv(&cells))?;
    write_manifest(&dir, "sweep", cfg)
}

/// Aligned multi-policy comparison on fidelity-constrained delivery.
pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.policies.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two --policy values".into(),
        ));
    }
    if cfg.f_th.is_empty() {
        return Err(CliError::Config("compare needs an --f-th axis".into()));
    }
    let hops_axis = if cfg.hops_axis.is_empty() {
        vec![cfg.chain.hops]
    } else {
        cfg.hops_axis.clone()
    };
    let mut cells = Vec::new();
    for &hops in &hops_axis {
        for &f_th in &cfg.f_th {
            for &policy in &cfg.policies {
                let key = CellKey {
                    policy,
                    hops,
                    f_th: Some(f_th),
                    budget: None,
                };
                cells.push(run_cell_summary(
                    &cfg.chain,
                    key,
                    cfg.trials,
                    cfg.chain.seed,
                ));
            }
        }
    }
    let dir = OutDir::create(&cfg.out_dir)?;
    dir.write("compare.csv", &compare_csv(&cells))?;
    dir.write("compare-diffs.csv", &compare_diffs_csv(&cells))?;
    write_manifest(&dir, "compare", cfg)
}

/// Coherence-time calibration against the target beneficial fraction.
pub fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let result = calibrate_t_coh(
        &cfg.chain,
        cfg.target,
        cfg.tolerance,
        cfg.t_coh_min,
        cfg.t_coh_max,
        cfg.t_coh_steps,
        cfg.trials,
        cfg.chain.seed,
    );
    let dir = OutDir::create(&cfg.out_dir)?;
    let mut csv = String::from(
        "t_coh,emm_fraction_positive,emm_mean_gain,lmm_fraction_positive,lmm_mean_gain\n",
    );
    for p in &result.points {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            p.t_coh,
            p.emm_fraction_positive,
            p.emm_mean_gain,
            p.lmm_fraction_positive,
            p.lmm_mean_gain
        ));
    }
    dir.write("calibration.csv", &csv)?;
    dir.write_json("calibration.json", &result)?;
    write_manifest(&dir, "calibrate", cfg)
}
