//! Per-trial event records.
//!
//! When enabled, the simulator appends one record per state-changing event.
//! The log carries herald times and spans only; fidelities recorded on
//! events are those observed at the moment of the operation. A trial's
//! delivered fidelity can be reconstructed from `Generated` events alone by
//! replaying the swap, decay, and purification maps, which is how the
//! provenance tests validate the engine.

use crate::memory::Timestep;

/// Node-index span `(left, right)` of a pair, `left < right`.
pub type Span = (usize, usize);

/// One state-changing simulator event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// A link-level pair heralded on `link` (spanning `link..link + 1`).
    Generated {
        t: Timestep,
        link: usize,
        fidelity: f64,
    },
    /// Adjacent spans merged; the output pair spans `left.0..right.1` and
    /// heralds at `t`.
    SwapSucceeded {
        t: Timestep,
        left: Span,
        right: Span,
        f_out: f64,
    },
    /// Bell-state measurement failed; both input pairs are destroyed.
    SwapFailed {
        t: Timestep,
        left: Span,
        right: Span,
    },
    /// Purification applied on two pairs sharing `span`, inputs observed at
    /// `t` as `f1`/`f2`. On success the output pair heralds at `t + 1`.
    PurifyAttempt {
        t: Timestep,
        span: Span,
        f1: f64,
        f2: f64,
        success: bool,
        f_out: f64,
    },
    /// First end-to-end pair discarded: no purification with it as an input
    /// can reach the threshold.
    FeasibilityAbort {
        t: Timestep,
        span: Span,
        f1: f64,
        f_hat: f64,
    },
    /// Both pairs discarded: observed asymmetry at or beyond the tolerance.
    DeltaAbort {
        t: Timestep,
        span: Span,
        f1: f64,
        f2: f64,
    },
    /// A constant-memory pair outlived its cutoff.
    Expired { t: Timestep, span: Span },
    /// A pair dropped by policy restart or the optional discard threshold.
    Discarded { t: Timestep, span: Span },
    /// End-to-end delivery accepted by the stop condition.
    Delivered {
        t: Timestep,
        span: Span,
        fidelity: f64,
    },
}

impl Event {
    /// Timestep the event occurred at.
    pub fn timestep(&self) -> Timestep {
        match *self {
            Event::Generated { t, .. }
            | Event::SwapSucceeded { t, .. }
            | Event::SwapFailed { t, .. }
            | Event::PurifyAttempt { t, .. }
            | Event::FeasibilityAbort { t, .. }
            | Event::DeltaAbort { t, .. }
            | Event::Expired { t, .. }
            | Event::Discarded { t, .. }
            | Event::Delivered { t, .. } => t,
        }
    }
}

/// Append-only event sink. A disabled log records nothing and costs almost
/// nothing.
#[derive(Debug, Default)]
pub struct EventLog {
    enabled: bool,
    events: Vec<Event>,
}

impl EventLog {
    pub fn enabled() -> Self {
        EventLog {
            enabled: true,
            events: Vec::new(),
        }
    }

    pub fn disabled() -> Self {
        EventLog::default()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    #[inline]
    pub fn record(&mut self, event: Event) {
        if self.enabled {
            self.events.push(event);
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn clear(&mut self) {
        self.events.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disabled_log_stays_empty() {
        let mut log = EventLog::disabled();
        log.record(Event::Generated {
            t: 1,
            link: 0,
            fidelity: 0.99,
        });
        assert!(log.events().is_empty());
    }

    #[test]
    fn enabled_log_appends_in_order() {
        let mut log = EventLog::enabled();
        log.record(Event::Generated {
            t: 1,
            link: 0,
            fidelity: 0.99,
        });
        log.record(Event::Delivered {
            t: 3,
            span: (0, 2),
            fidelity: 0.97,
        });
        assert_eq!(log.events().len(), 2);
        assert_eq!(log.events()[0].timestep(), 1);
        assert_eq!(log.events()[1].timestep(), 3);
    }
}
