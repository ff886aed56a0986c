//! Memory decoherence models for stored entangled pairs.
//!
//! All stored states are Werner states, so decay acts on the scalar fidelity
//! alone. Storage time is measured in simulator timesteps; decay of a pair
//! heralded at fidelity `F0` is evaluated lazily from the elapsed time.

use serde::Serialize;

use crate::calculus::Fidelity;

/// Timestep count, the simulator's only clock unit.
pub type Timestep = u64;

/// How a stored pair's fidelity evolves while it waits in memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MemoryModel {
    /// Constant: fidelity holds until `cutoff` timesteps have passed, then
    /// the pair is discarded abruptly. `None` keeps pairs forever.
    Cmm { cutoff: Option<Timestep> },
    /// Linear: fidelity falls from `F0` toward 0.5 over `t_coh` timesteps
    /// and clamps there.
    Lmm { t_coh: f64 },
    /// Exponential: depolarizing decay of the Werner parameter,
    /// `F(t) = 1/4 + (F0 - 1/4) exp(-dt / t_coh)`, approaching the fully
    /// mixed value 1/4.
    Emm { t_coh: f64 },
}

/// Coherence-time validation failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("coherence time must be positive, got {0}")]
pub struct InvalidCoherenceTime(pub f64);

impl MemoryModel {
    /// Unbounded constant memory: the idealization that never decays and
    /// never discards.
    pub const IDEAL: MemoryModel = MemoryModel::Cmm { cutoff: None };

    pub fn validate(&self) -> Result<(), InvalidCoherenceTime> {
        match *self {
            MemoryModel::Cmm { .. } => Ok(()),
            MemoryModel::Lmm { t_coh } | MemoryModel::Emm { t_coh } => {
                if t_coh > 0.0 {
                    Ok(())
                } else {
                    Err(InvalidCoherenceTime(t_coh))
                }
            }
        }
    }

    /// Fidelity of a pair heralded at `f0` after `dt` timesteps in memory,
    /// or `None` once a constant-memory pair has outlived its cutoff.
    ///
    /// Non-increasing in `dt` for every model; LMM never falls below 0.5,
    /// EMM never below 0.25.
    pub fn decayed_fidelity(&self, f0: Fidelity, dt: Timestep) -> Option<Fidelity> {
        debug_assert!(
            f0.get() >= 0.25,
            "stored pairs are Werner states, F0 >= 0.25"
        );
        match *self {
            MemoryModel::Cmm { .. } => {
                if self.is_expired(dt) {
                    None
                } else {
                    Some(f0)
                }
            }
            MemoryModel::Lmm { t_coh } => {
                let decayed = f0.get() - dt as f64 * (f0.get() - 0.5) / t_coh;
                Some(Fidelity::new_unchecked(decayed.max(0.5)))
            }
            MemoryModel::Emm { t_coh } => {
                let decayed = 0.25 + (f0.get() - 0.25) * (-(dt as f64) / t_coh).exp();
                Some(Fidelity::new_unchecked(decayed))
            }
        }
    }

    /// A pair expires only under constant memory with a finite cutoff, once
    /// `dt` exceeds it; `dt == cutoff` is still alive. Gradual models never
    /// expire.
    pub fn is_expired(&self, dt: Timestep) -> bool {
        match *self {
            MemoryModel::Cmm { cutoff: Some(tau) } => dt > tau,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fid(v: f64) -> Fidelity {
        Fidelity::new(v).unwrap()
    }

    #[test]
    fn emm_decay() {
        let emm = MemoryModel::Emm { t_coh: 150.0 };
        assert_eq!(emm.decayed_fidelity(fid(0.99), 0).unwrap().get(), 0.99);
        // one coherence time: 1/4 + 0.74/e
        assert!(
            (emm.decayed_fidelity(fid(0.99), 150).unwrap().get() - 0.5222307864668674).abs()
                < 1e-15
        );
    }

    #[test]
    fn emm_approaches_mixed_floor() {
        let emm = MemoryModel::Emm { t_coh: 10.0 };
        let far = emm.decayed_fidelity(fid(0.99), 10_000).unwrap().get();
        assert!(far >= 0.25);
        assert!((far - 0.25).abs() < 1e-12);
    }

    #[test]
    fn emm_semigroup_composition() {
        let emm = MemoryModel::Emm { t_coh: 73.0 };
        for (a, b) in [(1u64, 2u64), (10, 17), (100, 250), (0, 40)] {
            let two_step = emm
                .decayed_fidelity(emm.decayed_fidelity(fid(0.93), a).unwrap(), b)
                .unwrap()
                .get();
            let one_step = emm.decayed_fidelity(fid(0.93), a + b).unwrap().get();
            assert!((two_step - one_step).abs() < 1e-12, "dt {a}+{b}");
        }
    }

    #[test]
    fn lmm_decay_and_clamp() {
        let lmm = MemoryModel::Lmm { t_coh: 100.0 };
        assert!((lmm.decayed_fidelity(fid(0.99), 50).unwrap().get() - 0.745).abs() < 1e-15);
        assert_eq!(lmm.decayed_fidelity(fid(0.99), 200).unwrap().get(), 0.5);
        assert_eq!(lmm.decayed_fidelity(fid(0.99), 100).unwrap().get(), 0.5);
    }

    #[test]
    fn lmm_matches_stepwise_recursion() {
        let t_coh = 100.0;
        let lmm = MemoryModel::Lmm { t_coh };
        let f0 = fid(0.99);
        let step = (f0.get() - 0.5) / t_coh;
        let mut recursed = f0.get();
        for dt in 1..=300u64 {
            recursed = (recursed - step).max(0.5);
            let closed = lmm.decayed_fidelity(f0, dt).unwrap().get();
            assert!(
                (closed - recursed).abs() < 1e-12,
                "dt {dt}: closed {closed} recursed {recursed}"
            );
        }
    }

    #[test]
    fn cmm_constant_and_expiry() {
        let ideal = MemoryModel::IDEAL;
        assert_eq!(
            ideal.decayed_fidelity(fid(0.99), 1_000_000).unwrap().get(),
            0.99
        );
        assert!(!ideal.is_expired(u64::MAX));

        let bounded = MemoryModel::Cmm { cutoff: Some(100) };
        assert!(!bounded.is_expired(100));
        assert!(bounded.is_expired(101));
        assert_eq!(bounded.decayed_fidelity(fid(0.9), 100).unwrap().get(), 0.9);
        assert!(bounded.decayed_fidelity(fid(0.9), 101).is_none());

        let emm = MemoryModel::Emm { t_coh: 5.0 };
        assert!(!emm.is_expired(u64::MAX));
    }

    #[test]
    fn monotone_in_elapsed_time() {
        for model in [
            MemoryModel::IDEAL,
            MemoryModel::Lmm { t_coh: 37.0 },
            MemoryModel::Emm { t_coh: 37.0 },
        ] {
            let mut prev = f64::INFINITY;
            for dt in 0..200 {
                let f = model.decayed_fidelity(fid(0.97), dt).unwrap().get();
                assert!(f <= prev + 1e-15, "{model:?} rose at dt {dt}");
                prev = f;
            }
        }
    }

    #[test]
    fn validation() {
        assert!(MemoryModel::Lmm { t_coh: 0.0 }.validate().is_err());
        assert!(MemoryModel::Emm { t_coh: -3.0 }.validate().is_err());
        assert!(MemoryModel::Emm { t_coh: 200.0 }.validate().is_ok());
        assert!(MemoryModel::IDEAL.validate().is_ok());
    }
}
