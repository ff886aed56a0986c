//! Bit-stable file emission.
//!
//! CSV files are comma-separated with a header row, LF line endings, and no
//! quoting (the schemas contain no commas). Floats are written with Rust's
//! shortest round-trip formatting, so re-parsing a file recovers the exact
//! bits that produced it. JSON field order follows struct declaration
//! order, making repeated runs byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qpurify::{CellResult, Event, EventLog, MetricsSummary, TrialOutcome};

use crate::config::RunConfig;
use crate::CliError;

/// Format an optional float, empty when absent.
fn opt_f64(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// Create (or reuse) the output directory.
    pub fn create(root: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// Reproduction record: the subcommand plus the fully resolved
/// configuration.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
}

pub fn write_manifest(dir: &OutDir, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    dir.write_json(
        "manifest.json",
        &Manifest {
            command,
            config: cfg,
        },
    )
}

/// `trials.csv`: one row per trial.
pub fn trials_csv(outcomes: &[TrialOutcome]) -> String {
    let mut s = String::from(
        "trial,delivered,t_deliver,f_deliver,generations,swaps,purifications,delta_aborts,feasibility_aborts\n",
    );
    for (i, o) in outcomes.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            i,
            o.delivered,
            opt_u64(o.t_deliver),
            opt_f64(o.f_deliver),
            o.counters.generations,
            o.counters.swaps,
            o.counters.purifications,
            o.counters.delta_aborts,
            o.counters.feasibility_aborts,
        );
    }
    s
}

/// `gains.csv`: per-attempt fidelity gains, one row per attempt.
pub fn gains_csv(outcomes: &[TrialOutcome]) -> String {
    let mut s = String::from("trial,gain\n");
    for (i, o) in outcomes.iter().enumerate() {
        for g in &o.gain_samples {
            let _ = writeln!(s, "{i},{g}");
        }
    }
    s
}

/// `heatmap.csv`: one row per sweep cell.
pub fn heatmap_csv(cells: &[CellResult]) -> String {
    let mut s =
        String::from("policy,f_th,budget_n,hops,eta,mean_time,mean_fidelity,censored_fraction\n");
    for cell in cells {
        let summary = &cell.summary;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            cell.key.policy,
            opt_f64(cell.key.f_th),
            opt_u64(cell.key.budget),
            cell.key.hops,
            summary.eta,
            opt_f64(summary.time.map(|t| t.mean)),
            opt_f64(summary.fidelity.map(|f| f.mean)),
            summary.censored as f64 / summary.trials as f64,
        );
    }
    s
}

/// `compare.csv`: per-cell, per-policy delivery statistics.
pub fn compare_csv(cells: &[CellResult]) -> String {
    let mut s = String::from(
        "f_th,hops,policy,trials,eta,mean_time,median_time,q1_time,q3_time,mean_fidelity,\
         median_fidelity,purifications,delta_aborts,feasibility_aborts,censored_fraction\n",
    );
    for cell in cells {
        let m = &cell.summary;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            opt_f64(cell.key.f_th),
            cell.key.hops,
            cell.key.policy,
            m.trials,
            m.eta,
            opt_f64(m.time.map(|t| t.mean)),
            opt_f64(m.time.map(|t| t.median)),
            opt_f64(m.time.map(|t| t.q1)),
            opt_f64(m.time.map(|t| t.q3)),
            opt_f64(m.fidelity.map(|f| f.mean)),
            opt_f64(m.fidelity.map(|f| f.median)),
            m.counters.purifications,
            m.counters.delta_aborts,
            m.counters.feasibility_aborts,
            m.censored as f64 / m.trials as f64,
        );
    }
    s
}

/// `compare-diffs.csv`: pairwise mean differences between policies sharing
/// a cell.
pub fn compare_diffs_csv(cells: &[CellResult]) -> String {
    let mut s = String::from("f_th,hops,policy_a,policy_b,mean_time_diff,mean_fidelity_diff\n");
    for a in cells {
        for b in cells {
            if a.key.f_th != b.key.f_th || a.key.hops != b.key.hops {
                continue;
            }
            if a.key.policy.id() >= b.key.policy.id() {
                continue;
            }
            let dt = match (a.summary.time, b.summary.time) {
                (Some(ta), Some(tb)) => Some(ta.mean - tb.mean),
                _ => None,
            };
            let df = match (a.summary.fidelity, b.summary.fidelity) {
                (Some(fa), Some(fb)) => Some(fa.mean - fb.mean),
                _ => None,
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                opt_f64(a.key.f_th),
                a.key.hops,
                a.key.policy,
                b.key.policy,
                opt_f64(dt),
                opt_f64(df),
            );
        }
    }
    s
}

/// `summary.json` payload for a single-cell run.
#[derive(Serialize)]
pub struct RunSummary<'a> {
    pub policy: String,
    pub hops: usize,
    pub f_th: Option<f64>,
    pub budget: Option<u64>,
    pub f_lim: f64,
    #[serde(flatten)]
    pub metrics: &'a MetricsSummary,
}

/// `events.log`: line-delimited records
/// `trial,t,kind,left,right,left2,right2,f1,f2,f_out,success`.
pub fn events_log(trial: usize, log: &EventLog, sink: &mut String) {
    for event in log.events() {
        let (t, kind, a, b, f1, f2, f_out, success) = match *event {
            Event::Generated { t, link, fidelity } => (
                t,
                "generated",
                Some((link, link + 1)),
                None,
                None,
                None,
                Some(fidelity),
                String::new(),
            ),
            Event::SwapSucceeded {
                t,
                left,
                right,
                f_out,
            } => (
                t,
                "swap-ok",
                Some(left),
                Some(right),
                None,
                None,
                Some(f_out),
                String::new(),
            ),
            Event::SwapFailed { t, left, right } => (
                t,
                "swap-fail",
                Some(left),
                Some(right),
                None,
                None,
                None,
                String::new(),
            ),
            Event::PurifyAttempt {
                t,
                span,
                f1,
                f2,
                success,
                f_out,
            } => (
                t,
                "purify",
                Some(span),
                None,
                Some(f1),
                Some(f2),
                Some(f_out),
                success.to_string(),
            ),
            Event::FeasibilityAbort { t, span, f1, f_hat } => (
                t,
                "feasibility-abort",
                Some(span),
                None,
                Some(f1),
                None,
                Some(f_hat),
                String::new(),
            ),
            Event::DeltaAbort { t, span, f1, f2 } => (
                t,
                "delta-abort",
                Some(span),
                None,
                Some(f1),
                Some(f2),
                None,
                String::new(),
            ),
            Event::Expired { t, span } => (
                t,
                "expired",
                Some(span),
                None,
                None,
                None,
                None,
                String::new(),
            ),
            Event::Discarded { t, span } => (
                t,
                "discarded",
                Some(span),
                None,
                None,
                None,
                None,
                String::new(),
            ),
            Event::Delivered { t, span, fidelity } => (
                t,
                "delivered",
                Some(span),
                None,
                None,
                None,
                Some(fidelity),
                String::new(),
            ),
        };
        let span_cols = |s: Option<(usize, usize)>| match s {
            Some((l, r)) => (l.to_string(), r.to_string()),
            None => (String::new(), String::new()),
        };
        let (al, ar) = span_cols(a);
        let (bl, br) = span_cols(b);
        let _ = writeln!(
            sink,
            "{trial},{t},{kind},{al},{ar},{bl},{br},{},{},{},{success}",
            opt_f64(f1),
            opt_f64(f2),
            opt_f64(f_out),
        );
    }
}

pub const EVENTS_HEADER: &str = "trial,t,kind,left,right,left2,right2,f1,f2,f_out,success\n";
