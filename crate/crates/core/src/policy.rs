//! Entanglement delivery policies over the chain engine.
//!
//! Four terminating procedures produce one [`TrialOutcome`] per trial:
//!
//! * `NoPur` retries plain swap-ASAP episodes until the stop condition is
//!   met.
//! * `SwapPurify` builds two end-to-end pairs, then purifies them at the
//!   terminal nodes.
//! * `PurifySwap` purifies every elementary link (two generation slots per
//!   link) before letting links join swap-ASAP.
//! * `DeltaPurify` purifies only when it can help: it bypasses purification
//!   entirely when the threshold is reachable by swapping alone, screens the
//!   first pair against the best reachable purified fidelity, and rejects
//!   attempts whose observed asymmetry exceeds the tolerance.
//!
//! Purification attempts cost one timestep; swaps are instantaneous. The
//! waiting pair decays for the generation gap only, never for the
//! purification step itself.

use serde::Serialize;

use crate::calculus::{purification_feasibility, purification_gain, should_purify, Fidelity};
use crate::chain::{
    attempt_generation, attempt_purification, attempt_swap, current_fidelity, run_swap_asap,
    ChainParams, Counters, EntangledPair, EpisodeOutcome, GenerationMode, SimClock, SimCtx,
    SwapAsapState,
};
use crate::event::{Event, EventLog};
use crate::memory::Timestep;
use crate::rng::RngStream;

/// The four delivery policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    NoPur,
    SwapPurify,
    PurifySwap,
    DeltaPurify,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::NoPur,
        PolicyKind::SwapPurify,
        PolicyKind::PurifySwap,
        PolicyKind::DeltaPurify,
    ];

    /// Canonical CLI name.
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::NoPur => "no-pur",
            PolicyKind::SwapPurify => "sp",
            PolicyKind::PurifySwap => "ps",
            PolicyKind::DeltaPurify => "delta-purify",
        }
    }

    /// Parse a CLI/config spelling.
    pub fn parse(s: &str) -> Option<PolicyKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "no-pur" | "nopur" | "no-purification" => Some(PolicyKind::NoPur),
            "sp" | "swap-purify" => Some(PolicyKind::SwapPurify),
            "ps" | "purify-swap" => Some(PolicyKind::PurifySwap),
            "delta-purify" | "delta" => Some(PolicyKind::DeltaPurify),
            _ => None,
        }
    }

    /// Stable label for seed derivation.
    pub fn id(self) -> u64 {
        match self {
            PolicyKind::NoPur => 1,
            PolicyKind::SwapPurify => 2,
            PolicyKind::PurifySwap => 3,
            PolicyKind::DeltaPurify => 4,
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// When a trial counts as served.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StopCondition {
    /// Deliver the first pair at or above `f_th`; time unconstrained (only
    /// the trial cutoff applies).
    FidelityConstrained { f_th: f64 },
    /// Deliver the first pair produced within `budget` timesteps.
    TimeConstrained { budget: Timestep },
    /// Deliver the first pair at or above `f_th` within `budget` timesteps.
    Joint { f_th: f64, budget: Timestep },
}

/// Stop condition rejected by validation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StopError {
    #[error("fidelity threshold {0} outside (0.5, 1]")]
    Threshold(f64),
    #[error("time budget must be at least 1")]
    Budget,
}

impl StopCondition {
    pub fn validate(&self) -> Result<(), StopError> {
        if let Some(f_th) = self.f_th() {
            if !(f_th > 0.5 && f_th <= 1.0) {
                return Err(StopError::Threshold(f_th));
            }
        }
        if let Some(budget) = self.budget() {
            if budget < 1 {
                return Err(StopError::Budget);
            }
        }
        Ok(())
    }

    pub fn f_th(&self) -> Option<f64> {
        match *self {
            StopCondition::FidelityConstrained { f_th } | StopCondition::Joint { f_th, .. } => {
                Some(f_th)
            }
            StopCondition::TimeConstrained { .. } => None,
        }
    }

    pub fn budget(&self) -> Option<Timestep> {
        match *self {
            StopCondition::TimeConstrained { budget } | StopCondition::Joint { budget, .. } => {
                Some(budget)
            }
            StopCondition::FidelityConstrained { .. } => None,
        }
    }
}

/// Per-trial delivery record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub delivered: bool,
    pub t_deliver: Option<Timestep>,
    pub f_deliver: Option<f64>,
    /// Deterministic fidelity gain of every completed purification attempt,
    /// independent of the success draw.
    pub gain_samples: Vec<f64>,
    pub counters: Counters,
}

impl TrialOutcome {
    fn delivered(t: Timestep, f: f64, gain_samples: Vec<f64>, counters: Counters) -> Self {
        TrialOutcome {
            delivered: true,
            t_deliver: Some(t),
            f_deliver: Some(f),
            gain_samples,
            counters,
        }
    }

    fn censored(gain_samples: Vec<f64>, counters: Counters) -> Self {
        TrialOutcome {
            delivered: false,
            t_deliver: None,
            f_deliver: None,
            gain_samples,
            counters,
        }
    }
}

/// Trial horizon: the configured cutoff, tightened to the budget when the
/// stop condition carries one. Partially completed work at the horizon
/// counts as non-delivery.
fn effective_cutoff(params: &ChainParams, budget: Option<Timestep>) -> Timestep {
    budget.map_or(params.cutoff, |b| b.min(params.cutoff))
}

/// Dispatch a policy run. `DeltaPurify` requires a fidelity threshold.
pub fn run_policy(
    policy: PolicyKind,
    params: &ChainParams,
    stop: StopCondition,
    rng: &mut RngStream,
    log: &mut EventLog,
) -> TrialOutcome {
    match policy {
        PolicyKind::NoPur => run_no_pur(params, stop, rng, log),
        PolicyKind::SwapPurify => run_sp(params, stop, rng, log),
        PolicyKind::PurifySwap => run_ps(params, stop, rng, log),
        PolicyKind::DeltaPurify => match stop {
            StopCondition::FidelityConstrained { f_th } => run_delta_purify(params, f_th, rng, log),
            StopCondition::Joint { f_th, budget } => {
                run_delta_purify_bounded(params, f_th, Some(budget), rng, log)
            }
            StopCondition::TimeConstrained { .. } => {
                panic!("delta-purify needs a fidelity threshold")
            }
        },
    }
}

/// Deliver a single end-to-end pair with no purification, retrying episodes
/// until the stop condition is met or the horizon passes.
pub fn run_no_pur(
    params: &ChainParams,
    stop: StopCondition,
    rng: &mut RngStream,
    log: &mut EventLog,
) -> TrialOutcome {
    let mut bounded = params.clone();
    bounded.cutoff = effective_cutoff(params, stop.budget());
    let mut counters = Counters::default();
    let mut t = 0;
    loop {
        let mut ctx = SimCtx {
            rng,
            log,
            counters: &mut counters,
        };
        match run_swap_asap(&bounded, t, &mut ctx) {
            EpisodeOutcome::CutoffExceeded => return TrialOutcome::censored(Vec::new(), counters),
            EpisodeOutcome::Delivered { elapsed, fidelity } => {
                t += elapsed;
                if stop.f_th().is_none_or(|th| fidelity.get() >= th) {
                    log.record(Event::Delivered {
                        t,
                        span: (0, params.hops),
                        fidelity: fidelity.get(),
                    });
                    return TrialOutcome::delivered(t, fidelity.get(), Vec::new(), counters);
                }
                log.record(Event::Discarded {
                    t,
                    span: (0, params.hops),
                });
            }
        }
    }
}

/// One Swap-Purify cycle: two end-to-end pairs, one purification attempt.
enum SpCycle {
    Attempted {
        /// Trial time after the one-timestep purification attempt.
        t_after: Timestep,
        /// Deterministic gain of the attempt's inputs.
        gain: f64,
        success: bool,
        f_pur: Option<Fidelity>,
    },
    /// Waiting pair expired before the second arrived; resume generation.
    Restart {
        resume_at: Timestep,
    },
    Cutoff,
}

fn sp_cycle(params: &ChainParams, t0: Timestep, ctx: &mut SimCtx) -> SpCycle {
    let hops = params.hops;
    let (first, second) = match params.generation_mode {
        GenerationMode::Sequential => {
            let EpisodeOutcome::Delivered { elapsed, fidelity } = run_swap_asap(params, t0, ctx)
            else {
                return SpCycle::Cutoff;
            };
            let t1 = t0 + elapsed;
            let pair1 = EntangledPair::new(0, hops, fidelity, t1);
            let EpisodeOutcome::Delivered { elapsed, fidelity } = run_swap_asap(params, t1, ctx)
            else {
                return SpCycle::Cutoff;
            };
            let pair2 = EntangledPair::new(0, hops, fidelity, t1 + elapsed);
            (pair1, pair2)
        }
        GenerationMode::Parallel => match parallel_e2e_pairs(params, t0, ctx) {
            Some(pairs) => pairs,
            None => return SpCycle::Cutoff,
        },
    };

    let t_pur = second.t_herald();
    if t_pur + 1 > params.cutoff {
        return SpCycle::Cutoff;
    }
    let Some(f1) = current_fidelity(&first, t_pur, params.memory) else {
        ctx.log.record(Event::Expired {
            t: t_pur,
            span: first.span(),
        });
        // the whole cycle restarts from zero live pairs
        ctx.log.record(Event::Discarded {
            t: t_pur,
            span: second.span(),
        });
        return SpCycle::Restart { resume_at: t_pur };
    };
    let f2 = current_fidelity(&second, t_pur, params.memory).expect("second pair is fresh");
    let gain = purification_gain(f1, f2);
    let (success, out) = attempt_purification(first, second, t_pur, params.memory, ctx);
    SpCycle::Attempted {
        t_after: t_pur + 1,
        gain,
        success,
        f_pur: out.map(|p| p.f_herald()),
    }
}

/// Build two end-to-end pairs concurrently on doubled link hardware sharing
/// one clock. Returns them ordered by herald time.
fn parallel_e2e_pairs(
    params: &ChainParams,
    t0: Timestep,
    ctx: &mut SimCtx,
) -> Option<(EntangledPair, EntangledPair)> {
    let hops = params.hops;
    let mut chain_a = SwapAsapState::new();
    let mut chain_b = SwapAsapState::new();
    let mut done_a: Option<EntangledPair> = None;
    let mut done_b: Option<EntangledPair> = None;
    let mut clock = SimClock::starting_at(t0);
    loop {
        let now = clock.tick();
        if now > params.cutoff {
            return None;
        }
        if done_a.is_none() {
            chain_a.step(now, params, ctx);
            done_a = chain_a.delivered(hops).copied();
        }
        if done_b.is_none() {
            chain_b.step(now, params, ctx);
            done_b = chain_b.delivered(hops).copied();
        }
        if let (Some(a), Some(b)) = (done_a, done_b) {
            return Some(if a.t_herald() <= b.t_herald() {
                (a, b)
            } else {
                (b, a)
            });
        }
    }
}

/// Swap-Purify: produce two end-to-end pairs, purify at the ends, restart
/// the whole cycle on failure or an unmet threshold.
pub fn run_sp(
    params: &ChainParams,
    stop: StopCondition,
    rng: &mut RngStream,
    log: &mut EventLog,
) -> TrialOutcome {
    let mut bounded = params.clone();
    bounded.cutoff = effective_cutoff(params, stop.budget());
    let mut counters = Counters::default();
    let mut gains = Vec::new();
    let mut t = 0;
    loop {
        let mut ctx = SimCtx {
            rng,
            log,
            counters: &mut counters,
        };
        match sp_cycle(&bounded, t, &mut ctx) {
            SpCycle::Cutoff => return TrialOutcome::censored(gains, counters),
            SpCycle::Restart { resume_at } => t = resume_at,
            SpCycle::Attempted {
                t_after,
                gain,
                success,
                f_pur,
            } => {
                t = t_after;
                gains.push(gain);
                if success {
                    let f = f_pur.expect("successful attempt yields a pair").get();
                    if stop.f_th().is_none_or(|th| f >= th) {
                        log.record(Event::Delivered {
                            t,
                            span: (0, params.hops),
                            fidelity: f,
                        });
                        return TrialOutcome::delivered(t, f, gains, counters);
                    }
                    log.record(Event::Discarded {
                        t,
                        span: (0, params.hops),
                    });
                }
            }
        }
    }
}

/// One Swap-Purify cycle run for its gain sample alone (the per-attempt
/// distribution study). `None` when the trial is censored before an attempt
/// completes.
pub fn sp_gain_sample(
    params: &ChainParams,
    rng: &mut RngStream,
    log: &mut EventLog,
) -> Option<f64> {
    let mut counters = Counters::default();
    let mut t = 0;
    loop {
        let mut ctx = SimCtx {
            rng,
            log,
            counters: &mut counters,
        };
        match sp_cycle(params, t, &mut ctx) {
            SpCycle::Cutoff => return None,
            SpCycle::Restart { resume_at } => t = resume_at,
            SpCycle::Attempted { gain, .. } => return Some(gain),
        }
    }
}

/// Purify-Swap: each link holds two generation slots, filled by the link's
/// single per-timestep attempt; freshly paired slots purify immediately
/// (one timestep), purified links join swap-ASAP.
pub fn run_ps(
    params: &ChainParams,
    stop: StopCondition,
    rng: &mut RngStream,
    log: &mut EventLog,
) -> TrialOutcome {
    let limit = effective_cutoff(params, stop.budget());
    let hops = params.hops;
    let mut counters = Counters::default();
    let mut gains = Vec::new();
    let mut slots: Vec<[Option<EntangledPair>; 2]> = vec![[None, None]; hops];
    let mut merged: Vec<EntangledPair> = Vec::new();
    let mut clock = SimClock::default();

    loop {
        let now = clock.tick();
        if now > limit {
            return TrialOutcome::censored(gains, counters);
        }
        let mut ctx = SimCtx {
            rng,
            log,
            counters: &mut counters,
        };

        // drop expired / sub-threshold pairs, raw slots first
        for slot in slots.iter_mut() {
            for held in slot.iter_mut() {
                if let Some(pair) = held {
                    let alive = match current_fidelity(pair, now, params.memory) {
                        None => {
                            ctx.log.record(Event::Expired {
                                t: now,
                                span: pair.span(),
                            });
                            false
                        }
                        Some(f) => {
                            let keep = params.discard_below.is_none_or(|th| f.get() >= th);
                            if !keep {
                                ctx.log.record(Event::Discarded {
                                    t: now,
                                    span: pair.span(),
                                });
                            }
                            keep
                        }
                    };
                    if !alive {
                        *held = None;
                    }
                }
            }
        }
        merged.retain(|pair| match current_fidelity(pair, now, params.memory) {
            None => {
                ctx.log.record(Event::Expired {
                    t: now,
                    span: pair.span(),
                });
                false
            }
            Some(f) => {
                let keep = params.discard_below.is_none_or(|th| f.get() >= th);
                if !keep {
                    ctx.log.record(Event::Discarded {
                        t: now,
                        span: pair.span(),
                    });
                }
                keep
            }
        });

        // generation on links not yet covered by a purified or merged span;
        // a link makes at most one attempt per timestep, filling its first
        // empty slot
        for (link, slot) in slots.iter_mut().enumerate() {
            if merged.iter().any(|p| p.covers(link)) {
                continue;
            }
            if let Some(held) = slot.iter_mut().find(|h| h.is_none()) {
                *held = attempt_generation(link, now, params, &mut ctx);
            }
        }

        // purification resolves one step after the second slot fills
        for slot in slots.iter_mut() {
            let ready = match (&slot[0], &slot[1]) {
                (Some(a), Some(b)) => a.t_herald().max(b.t_herald()) < now,
                _ => false,
            };
            if !ready {
                continue;
            }
            let a = slot[0].take().expect("checked above");
            let b = slot[1].take().expect("checked above");
            let (early, late) = if a.t_herald() <= b.t_herald() {
                (a, b)
            } else {
                (b, a)
            };
            // inputs are evaluated when the second pair heralds; the
            // purification step itself is pure protocol cost
            let t_map = late.t_herald();
            debug_assert_eq!(t_map + 1, now);
            let f_early =
                current_fidelity(&early, t_map, params.memory).expect("alive at resolution");
            let f_late =
                current_fidelity(&late, t_map, params.memory).expect("alive at resolution");
            gains.push(purification_gain(f_early, f_late));
            let (_success, out) = attempt_purification(early, late, t_map, params.memory, &mut ctx);
            if let Some(pair) = out {
                merged.push(pair);
            }
        }

        // swap-ASAP over purified spans
        merged.sort_by_key(|p| p.left());
        let mut i = 0;
        while i + 1 < merged.len() {
            if merged[i].right() == merged[i + 1].left() {
                let a = merged.remove(i);
                let b = merged.remove(i);
                if let Some(m) = attempt_swap(a, b, now, params, &mut ctx) {
                    merged.insert(i, m);
                }
            } else {
                i += 1;
            }
        }

        if let Some(pair) = merged.iter().find(|p| p.span() == (0, hops)).copied() {
            let f = pair.f_herald().get();
            if stop.f_th().is_none_or(|th| f >= th) {
                ctx.log.record(Event::Delivered {
                    t: now,
                    span: (0, hops),
                    fidelity: f,
                });
                return TrialOutcome::delivered(now, f, gains, counters);
            }
            // below threshold: discard everything and restart from raw links
            for pair in merged.drain(..) {
                ctx.log.record(Event::Discarded {
                    t: now,
                    span: pair.span(),
                });
            }
            for slot in slots.iter_mut() {
                for held in slot.iter_mut() {
                    if let Some(pair) = held.take() {
                        ctx.log.record(Event::Discarded {
                            t: now,
                            span: pair.span(),
                        });
                    }
                }
            }
        }
    }
}

/// Delta-informed purification at a fidelity threshold (time unconstrained).
pub fn run_delta_purify(
    params: &ChainParams,
    f_th: f64,
    rng: &mut RngStream,
    log: &mut EventLog,
) -> TrialOutcome {
    run_delta_purify_bounded(params, f_th, None, rng, log)
}

/// Delta-informed purification, optionally under a joint time budget.
pub(crate) fn run_delta_purify_bounded(
    params: &ChainParams,
    f_th: f64,
    budget: Option<Timestep>,
    rng: &mut RngStream,
    log: &mut EventLog,
) -> TrialOutcome {
    assert!(
        f_th > 0.5 && f_th <= 1.0,
        "fidelity threshold outside (0.5, 1]"
    );
    let hops = params.hops;

    // threshold reachable by swapping alone: purification buys nothing
    if f_th <= params.f_lim().get() {
        let stop = match budget {
            None => StopCondition::FidelityConstrained { f_th },
            Some(budget) => StopCondition::Joint { f_th, budget },
        };
        return run_no_pur(params, stop, rng, log);
    }

    let f_th_fid = Fidelity::new(f_th).expect("threshold in (0.5, 1]");
    let mut bounded = params.clone();
    bounded.cutoff = effective_cutoff(params, budget);
    let mut counters = Counters::default();
    let mut gains = Vec::new();
    let mut t = 0;
    loop {
        let mut ctx = SimCtx {
            rng,
            log,
            counters: &mut counters,
        };

        // phase 1: first end-to-end pair
        let EpisodeOutcome::Delivered {
            elapsed,
            fidelity: f1,
        } = run_swap_asap(&bounded, t, &mut ctx)
        else {
            return TrialOutcome::censored(gains, counters);
        };
        t += elapsed;
        let first = EntangledPair::new(0, hops, f1, t);

        // feasibility screen: can any attempt with f1 as one input reach the
        // threshold? Pairs at or below 0.5 cannot be purified upward at all.
        let feasibility = if f1.is_entangled() {
            Some(purification_feasibility(f1, f_th_fid).expect("f1 in (0.5, 1]"))
        } else {
            None
        };
        if !feasibility.is_some_and(|f| f.feasible) {
            ctx.counters.feasibility_aborts += 1;
            ctx.log.record(Event::FeasibilityAbort {
                t,
                span: (0, hops),
                f1: f1.get(),
                f_hat: feasibility.map_or(f1.get(), |f| f.f_hat.get()),
            });
            continue;
        }

        // phase 2: second end-to-end pair; the first decays over the gap
        let EpisodeOutcome::Delivered {
            elapsed,
            fidelity: f2,
        } = run_swap_asap(&bounded, t, &mut ctx)
        else {
            return TrialOutcome::censored(gains, counters);
        };
        t += elapsed;
        let Some(f1_aged) = current_fidelity(&first, t, params.memory) else {
            ctx.log.record(Event::Expired {
                t,
                span: first.span(),
            });
            ctx.log.record(Event::Discarded { t, span: (0, hops) });
            continue;
        };

        // delta check on the observed asymmetry, referenced to the better
        // input; out-of-domain fidelities can never satisfy it
        let within_tolerance = f1_aged.is_entangled()
            && f2.is_entangled()
            && should_purify(f1_aged, f2).expect("inputs in (0.5, 1]");
        if !within_tolerance {
            ctx.counters.delta_aborts += 1;
            ctx.log.record(Event::DeltaAbort {
                t,
                span: (0, hops),
                f1: f1_aged.get(),
                f2: f2.get(),
            });
            continue;
        }

        // phase 3: the attempt itself costs one timestep
        if t + 1 > bounded.cutoff {
            return TrialOutcome::censored(gains, counters);
        }
        let second = EntangledPair::new(0, hops, f2, t);
        gains.push(purification_gain(f1_aged, f2));
        let (success, out) = attempt_purification(first, second, t, params.memory, &mut ctx);
        t += 1;
        if success {
            let f = out
                .expect("successful attempt yields a pair")
                .f_herald()
                .get();
            if f >= f_th {
                ctx.log.record(Event::Delivered {
                    t,
                    span: (0, hops),
                    fidelity: f,
                });
                return TrialOutcome::delivered(t, f, gains, counters);
            }
            ctx.log.record(Event::Discarded { t, span: (0, hops) });
        }
    }
}
