//! Minimal library walkthrough: the analytical tolerance, then a seeded
//! three-way policy comparison on a two-hop chain under exponential memory
//! decay.
//!
//! Run with `cargo run -p qpurify --example policy_comparison`.

use qpurify::experiment::{run_cell, CellKey};
use qpurify::{
    delta_tolerance, find_delta_max, purification_gain, ChainParams, DeltaRole, Fidelity,
    MemoryModel, PolicyKind,
};

fn main() {
    // closed-form side: how much asymmetry can purification absorb?
    let dm = find_delta_max();
    println!(
        "universal tolerance: delta_max = {:.4} at F1* = {:.3} (partner {:.3})",
        dm.delta_max,
        dm.f1_star.get(),
        dm.f2_star.get()
    );
    let f = Fidelity::new(0.9).unwrap();
    println!(
        "at F = 0.9: downward tolerance {:.4}, upward {:.4}, gain of (0.9, 0.8) = {:+.4}",
        delta_tolerance(f, DeltaRole::AsSuperior).unwrap(),
        delta_tolerance(f, DeltaRole::AsInferior).unwrap(),
        purification_gain(f, Fidelity::new(0.8).unwrap()),
    );

    // simulation side: time-to-serve at threshold 0.9
    let params = ChainParams::uniform(2, 0.99, 0.1, 0.9, MemoryModel::Emm { t_coh: 53.0 });
    println!(
        "\nchain: {} hops, F0 = 0.99, p_e = 0.1, p_s = 0.9, F_lim = {:.5}",
        params.hops,
        params.f_lim().get()
    );
    for policy in [
        PolicyKind::NoPur,
        PolicyKind::SwapPurify,
        PolicyKind::PurifySwap,
        PolicyKind::DeltaPurify,
    ] {
        let key = CellKey {
            policy,
            hops: params.hops,
            f_th: Some(0.9),
            budget: None,
        };
        let cell = run_cell(&params, key, 5_000, 7);
        let time = cell.summary.time.expect("threshold below the ceiling");
        println!(
            "{:>12}: eta {:.3}, median time {:>5}, mean {:>8.2}",
            policy.name(),
            cell.summary.eta,
            time.median,
            time.mean
        );
    }
}
