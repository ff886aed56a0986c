//! Entanglement distribution over n-hop quantum repeater chains: closed-form
//! fidelity calculus, memory decoherence models, a seeded discrete-time
//! Monte Carlo engine, four delivery policies, and a reproducible experiment
//! harness.
//!
//! # Layout
//!
//! * [`calculus`] — swap and BBPSSW purification maps, the asymmetry
//!   tolerance `delta(F)` and its universal maximum, the chain fidelity
//!   ceiling, and the purification feasibility estimate. Pure functions.
//! * [`memory`] — constant, linear, and exponential decoherence models
//!   mapping (herald fidelity, storage time) to current fidelity.
//! * [`chain`] — the per-timestep engine: Bernoulli link generation, lazy
//!   decay, greedy swap-ASAP merging.
//! * [`policy`] — the delivery policies (`no-pur`, `sp`, `ps`,
//!   `delta-purify`) built on the engine.
//! * [`experiment`] — seeded experiment cells, the named studies, and
//!   coherence-time calibration.
//! * [`metrics`] — deterministic aggregation with nearest-rank quantiles.
//!
//! Every trial is a pure function of its parameters and derived random
//! stream: rerunning any experiment with the same master seed reproduces
//! identical output, bit for bit.

pub mod calculus;
pub mod chain;
pub mod event;
pub mod experiment;
pub mod memory;
pub mod metrics;
pub mod policy;
pub mod rng;

pub use calculus::{
    chain_fidelity_limit, delta_tolerance, f1_max, f2_min, fidelity_from_werner, find_delta_max,
    gain_grid, generation_probability, purification_feasibility, purification_gain,
    purification_success_prob, purified_fidelity, should_purify, swap_fidelity,
    swap_partner_lower_bound, werner_from_fidelity, DeltaMax, DeltaRole, DomainError, Feasibility,
    Fidelity, GainGrid, HardwareParams, WernerParam,
};
pub use chain::{
    current_fidelity, run_swap_asap, ChainParams, Counters, EntangledPair, EpisodeOutcome,
    GenerationMode, ParamError, SimClock, DEFAULT_CUTOFF,
};
pub use event::{Event, EventLog};
pub use experiment::{
    calibrate_t_coh, delta_purify_eval, gain_distribution_experiment, objective1_run,
    objective2_run, objective3_sweep, run_cell, scalability_sweep, CalibrationResult, CellKey,
    CellResult, ExperimentSpec, GainCell,
};
pub use memory::{MemoryModel, Timestep};
pub use metrics::{aggregate_metrics, DistStats, GainStats, MetricsSummary};
pub use policy::{
    run_delta_purify, run_no_pur, run_policy, run_ps, run_sp, PolicyKind, StopCondition,
    TrialOutcome,
};
pub use rng::RngStream;
