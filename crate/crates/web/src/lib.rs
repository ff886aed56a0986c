//! Browser bindings for the repeater-chain toolkit.
//!
//! Three interactive surfaces, each a thin wrapper over the core crate:
//! the purification gain grid, the asymmetry-tolerance profile, and an
//! in-browser Monte Carlo policy run. Structured results cross the JS
//! boundary as JSON strings; the grid crosses as a flat `Float64Array`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qpurify::{
    delta_tolerance, f1_max, f2_min, find_delta_max, gain_grid, run_cell, CellKey, ChainParams,
    DeltaRole, Fidelity, MemoryModel, PolicyKind,
};

/// Row-major purification-gain values over `[0.5, 1]^2`.
///
/// Row `i` fixes the first input fidelity at `0.5 + 0.5 * i / (res - 1)`,
/// column `j` the second.
#[wasm_bindgen]
pub fn gain_grid_values(resolution: usize) -> Result<Vec<f64>, String> {
    let grid = gain_grid(resolution).map_err(|e| e.to_string())?;
    Ok(grid.values().to_vec())
}

#[derive(Serialize)]
struct DeltaProfile {
    f: Vec<f64>,
    delta_superior: Vec<f64>,
    delta_inferior: Vec<f64>,
    f2_min: Vec<f64>,
    f1_max: Vec<f64>,
    f1_star: f64,
    f2_star: f64,
    delta_max: f64,
}

/// Asymmetry-tolerance curves on an interior grid over `(0.5, 1)`, plus the
/// universal maximum.
#[wasm_bindgen]
pub fn delta_profile_json(points: usize) -> Result<String, String> {
    if points < 2 {
        return Err("need at least 2 points".to_string());
    }
    let mut profile = DeltaProfile {
        f: Vec::with_capacity(points),
        delta_superior: Vec::with_capacity(points),
        delta_inferior: Vec::with_capacity(points),
        f2_min: Vec::with_capacity(points),
        f1_max: Vec::with_capacity(points),
        f1_star: 0.0,
        f2_star: 0.0,
        delta_max: 0.0,
    };
    for i in 1..=points {
        let f = 0.5 + 0.5 * i as f64 / (points + 1) as f64;
        let fid = Fidelity::new(f).expect("interior grid");
        profile.f.push(f);
        profile
            .delta_superior
            .push(delta_tolerance(fid, DeltaRole::AsSuperior).expect("interior"));
        profile
            .delta_inferior
            .push(delta_tolerance(fid, DeltaRole::AsInferior).expect("interior"));
        profile.f2_min.push(f2_min(fid).expect("interior").get());
        profile.f1_max.push(f1_max(fid).expect("interior").get());
    }
    let dm = find_delta_max();
    profile.f1_star = dm.f1_star.get();
    profile.f2_star = dm.f2_star.get();
    profile.delta_max = dm.delta_max;
    serde_json::to_string(&profile).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct TrialsReport {
    policy: String,
    hops: usize,
    f_lim: f64,
    trials: u64,
    delivered: u64,
    eta: f64,
    mean_time: Option<f64>,
    median_time: Option<f64>,
    mean_fidelity: Option<f64>,
    gain_fraction_positive: Option<f64>,
    gain_mean: Option<f64>,
    times: Vec<f64>,
    fidelities: Vec<f64>,
    gains: Vec<f64>,
}

fn parse_memory(kind: &str, t_coh: f64) -> Result<MemoryModel, String> {
    match kind {
        "cmm" => Ok(MemoryModel::Cmm { cutoff: None }),
        "lmm" => Ok(MemoryModel::Lmm { t_coh }),
        "emm" => Ok(MemoryModel::Emm { t_coh }),
        _ => Err("memory kind must be cmm, lmm, or emm".to_string()),
    }
}

/// Run a seeded batch of trials of one policy and report delivery
/// statistics plus raw samples for histogramming.
///
/// `budget = 0` means unconstrained time; `f_th = 0` means no fidelity
/// requirement (not allowed for delta-purify).
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn run_trials_json(
    policy: &str,
    hops: usize,
    f0: f64,
    p_e: f64,
    p_s: f64,
    memory_kind: &str,
    t_coh: f64,
    f_th: f64,
    budget: u32,
    cutoff: u32,
    trials: u32,
    seed: u32,
) -> Result<String, String> {
    let policy = PolicyKind::parse(policy)
        .ok_or_else(|| "policy must be no-pur, sp, ps, or delta-purify".to_string())?;
    let memory = parse_memory(memory_kind, t_coh)?;
    let mut params = ChainParams::uniform(hops, f0, p_e, p_s, memory);
    if cutoff > 0 {
        params.cutoff = cutoff as u64;
    }
    params.seed = seed as u64;
    params.validate().map_err(|e| e.to_string())?;

    let f_th_opt = if f_th > 0.0 { Some(f_th) } else { None };
    let budget_opt = if budget > 0 {
        Some(budget as u64)
    } else {
        None
    };
    if f_th_opt.is_none() && budget_opt.is_none() {
        return Err("need a fidelity threshold, a budget, or both".to_string());
    }
    if policy == PolicyKind::DeltaPurify && f_th_opt.is_none() {
        return Err("delta-purify needs a fidelity threshold".to_string());
    }
    if let Some(f_th) = f_th_opt {
        if !(f_th > 0.5 && f_th <= 1.0) {
            return Err("fidelity threshold must lie in (0.5, 1]".to_string());
        }
    }

    let key = CellKey {
        policy,
        hops,
        f_th: f_th_opt,
        budget: budget_opt,
    };
    let cell = run_cell(&params, key, trials as u64, params.seed);
    let summary = &cell.summary;

    let mut times = Vec::new();
    let mut fidelities = Vec::new();
    let mut gains = Vec::new();
    for outcome in &cell.outcomes {
        if let (Some(t), Some(f)) = (outcome.t_deliver, outcome.f_deliver) {
            times.push(t as f64);
            fidelities.push(f);
        }
        gains.extend_from_slice(&outcome.gain_samples);
    }

    let report = TrialsReport {
        policy: policy.to_string(),
        hops,
        f_lim: params.f_lim().get(),
        trials: summary.trials,
        delivered: summary.delivered,
        eta: summary.eta,
        mean_time: summary.time.map(|t| t.mean),
        median_time: summary.time.map(|t| t.median),
        mean_fidelity: summary.fidelity.map(|f| f.mean),
        gain_fraction_positive: summary.gain.map(|g| g.fraction_positive),
        gain_mean: summary.gain.map(|g| g.mean),
        times,
        fidelities,
        gains,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_grid_is_square() {
        let values = gain_grid_values(21).unwrap();
        assert_eq!(values.len(), 21 * 21);
        // diagonal midpoint (0.75, 0.75) is positive
        assert!(values[10 * 21 + 10] > 0.0);
    }

    #[test]
    fn delta_profile_parses_and_peaks_near_the_known_maximum() {
        let json = delta_profile_json(101).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!((v["delta_max"].as_f64().unwrap() - 0.076).abs() < 5e-4);
        assert_eq!(v["f"].as_array().unwrap().len(), 101);
    }

    #[test]
    fn trials_report_round_trips() {
        let json =
            run_trials_json("no-pur", 2, 0.99, 0.3, 0.9, "emm", 100.0, 0.9, 0, 0, 200, 7).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["trials"].as_u64().unwrap(), 200);
        assert!(v["eta"].as_f64().unwrap() > 0.0);
        assert!((v["f_lim"].as_f64().unwrap() - 0.9801333333333334).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(run_trials_json("bogus", 2, 0.99, 0.1, 0.9, "cmm", 0.0, 0.9, 0, 0, 10, 1).is_err());
        assert!(
            run_trials_json("no-pur", 2, 0.99, 0.1, 0.9, "xyz", 0.0, 0.9, 0, 0, 10, 1).is_err()
        );
        assert!(
            run_trials_json("no-pur", 2, 0.99, 0.1, 0.9, "cmm", 0.0, 0.0, 0, 0, 10, 1).is_err()
        );
        assert!(run_trials_json(
            "delta-purify",
            2,
            0.99,
            0.1,
            0.9,
            "cmm",
            0.0,
            0.0,
            50,
            0,
            10,
            1
        )
        .is_err());
    }
}
