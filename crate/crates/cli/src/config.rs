//! Configuration: INI-style file parsing, flag overrides, validation.
//!
//! Precedence is defaults < config file < command-line flags. The file
//! format is plain `key = value` lines grouped under `[chain]`, `[memory]`,
//! and `[run]` sections; `#` and `;` start comments. Unknown sections or
//! keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qpurify::{ChainParams, GenerationMode, MemoryModel, PolicyKind, Timestep};

use crate::CliError;

/// Fully resolved run configuration; serialized into every manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub chain: ChainParams,
    pub policies: Vec<PolicyKind>,
    pub trials: u64,
    /// Fidelity-threshold axis (scalar runs use a single value).
    pub f_th: Vec<f64>,
    /// Time-budget axis.
    pub budget: Vec<Timestep>,
    /// Hop-count axis; defaults to the chain's own hop count.
    pub hops_axis: Vec<usize>,
    pub out_dir: PathBuf,
    pub grid_res: usize,
    pub debug_events: bool,
    /// Calibration knobs.
    pub target: f64,
    pub tolerance: f64,
    pub t_coh_min: f64,
    pub t_coh_max: f64,
    pub t_coh_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            chain: ChainParams::uniform(2, 0.99, 0.1, 0.9, MemoryModel::IDEAL),
            policies: vec![PolicyKind::NoPur],
            trials: 1_000,
            f_th: Vec::new(),
            budget: Vec::new(),
            hops_axis: Vec::new(),
            out_dir: PathBuf::from("out"),
            grid_res: 201,
            debug_events: false,
            target: 0.143,
            tolerance: 0.02,
            t_coh_min: 10.0,
            t_coh_max: 3_000.0,
            t_coh_steps: 13,
        }
    }
}

/// Raw key/value view of a parsed INI file: `section.key -> value`.
#[derive(Debug, Default)]
pub struct IniFile {
    entries: BTreeMap<String, String>,
}

impl IniFile {
    pub fn parse(text: &str) -> Result<IniFile, CliError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(lineno, "unterminated section header"))?;
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(lineno, "expected `key = value`"));
            };
            if section.is_empty() {
                return Err(config_err(lineno, "key outside any [section]"));
            }
            let full = format!("{section}.{}", key.trim().to_ascii_lowercase());
            if entries
                .insert(full.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Config(format!("duplicate key `{full}`")));
            }
        }
        Ok(IniFile { entries })
    }

    pub fn load(path: &Path) -> Result<IniFile, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        IniFile::parse(&text)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Error out on anything not consumed by the schema.
    fn reject_leftovers(&self) -> Result<(), CliError> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let keys: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        Err(CliError::Config(format!(
            "unknown config keys: {}",
            keys.join(", ")
        )))
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

fn config_err(lineno: usize, msg: &str) -> CliError {
    CliError::Config(format!("config line {}: {msg}", lineno + 1))
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value for {key}: `{value}`")))
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("invalid value for {key}: `{s}`")))
        })
        .collect()
}

pub fn parse_policies(key: &str, value: &str) -> Result<Vec<PolicyKind>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            PolicyKind::parse(s).ok_or_else(|| {
                CliError::Config(format!(
                    "invalid value for {key}: `{s}` (expected no-pur, sp, ps, or delta-purify)"
                ))
            })
        })
        .collect()
}

fn parse_memory_kind(value: &str) -> Result<&'static str, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "cmm" => Ok("cmm"),
        "lmm" => Ok("lmm"),
        "emm" => Ok("emm"),
        other => Err(CliError::Config(format!(
            "invalid memory kind `{other}` (expected cmm, lmm, or emm)"
        ))),
    }
}

/// Apply a parsed config file onto the defaults.
pub fn apply_file(cfg: &mut RunConfig, mut file: IniFile) -> Result<(), CliError> {
    let mut memory_kind: Option<String> = None;
    let mut t_coh: Option<f64> = None;
    let mut cutoff_tau: Option<Option<Timestep>> = None;
    let mut f0_list: Option<Vec<f64>> = None;

    if let Some(v) = file.take("chain.hops") {
        cfg.chain.hops = parse_scalar("chain.hops", &v)?;
    }
    if let Some(v) = file.take("chain.f0") {
        f0_list = Some(parse_list("chain.f0", &v)?);
    }
    if let Some(v) = file.take("chain.pe") {
        cfg.chain.p_e = parse_scalar("chain.pe", &v)?;
    }
    if let Some(v) = file.take("chain.ps") {
        cfg.chain.p_s = parse_scalar("chain.ps", &v)?;
    }
    if let Some(v) = file.take("chain.cutoff") {
        cfg.chain.cutoff = parse_scalar("chain.cutoff", &v)?;
    }
    if let Some(v) = file.take("chain.generation_mode") {
        cfg.chain.generation_mode = match v.to_ascii_lowercase().as_str() {
            "sequential" => GenerationMode::Sequential,
            "parallel" => GenerationMode::Parallel,
            other => {
                return Err(CliError::Config(format!(
                    "invalid generation_mode `{other}`"
                )))
            }
        };
    }
    if let Some(v) = file.take("chain.discard_below") {
        cfg.chain.discard_below = Some(parse_scalar("chain.discard_below", &v)?);
    }

    if let Some(v) = file.take("memory.kind") {
        memory_kind = Some(parse_memory_kind(&v)?.to_string());
    }
    if let Some(v) = file.take("memory.t_coh") {
        t_coh = Some(parse_scalar("memory.t_coh", &v)?);
    }
    if let Some(v) = file.take("memory.cutoff_tau") {
        cutoff_tau = Some(if v.eq_ignore_ascii_case("inf") {
            None
        } else {
            Some(parse_scalar("memory.cutoff_tau", &v)?)
        });
    }

    if let Some(v) = file.take("run.policy") {
        cfg.policies = parse_policies("run.policy", &v)?;
    }
    if let Some(v) = file.take("run.trials") {
        cfg.trials = parse_scalar("run.trials", &v)?;
    }
    if let Some(v) = file.take("run.seed") {
        cfg.chain.seed = parse_scalar("run.seed", &v)?;
    }
    if let Some(v) = file.take("run.f_th") {
        cfg.f_th = parse_list("run.f_th", &v)?;
    }
    if let Some(v) = file.take("run.budget") {
        cfg.budget = parse_list("run.budget", &v)?;
    }
    if let Some(v) = file.take("run.hops") {
        cfg.hops_axis = parse_list("run.hops", &v)?;
    }
    if let Some(v) = file.take("run.out") {
        cfg.out_dir = PathBuf::from(v);
    }
    if let Some(v) = file.take("run.grid_res") {
        cfg.grid_res = parse_scalar("run.grid_res", &v)?;
    }
    if let Some(v) = file.take("run.debug_events") {
        cfg.debug_events = parse_scalar("run.debug_events", &v)?;
    }
    if let Some(v) = file.take("run.target") {
        cfg.target = parse_scalar("run.target", &v)?;
    }
    if let Some(v) = file.take("run.tolerance") {
        cfg.tolerance = parse_scalar("run.tolerance", &v)?;
    }
    if let Some(v) = file.take("run.t_coh_min") {
        cfg.t_coh_min = parse_scalar("run.t_coh_min", &v)?;
    }
    if let Some(v) = file.take("run.t_coh_max") {
        cfg.t_coh_max = parse_scalar("run.t_coh_max", &v)?;
    }
    if let Some(v) = file.take("run.t_coh_steps") {
        cfg.t_coh_steps = parse_scalar("run.t_coh_steps", &v)?;
    }

    file.reject_leftovers()?;

    apply_memory(cfg, memory_kind.as_deref(), t_coh, cutoff_tau)?;
    apply_f0(cfg, f0_list)?;
    Ok(())
}

/// Rebuild the memory model from its pieces, keeping unspecified pieces
/// from the current value.
pub fn apply_memory(
    cfg: &mut RunConfig,
    kind: Option<&str>,
    t_coh: Option<f64>,
    cutoff_tau: Option<Option<Timestep>>,
) -> Result<(), CliError> {
    let current_kind = match cfg.chain.memory {
        MemoryModel::Cmm { .. } => "cmm",
        MemoryModel::Lmm { .. } => "lmm",
        MemoryModel::Emm { .. } => "emm",
    };
    let kind = kind.unwrap_or(current_kind);
    let current_t_coh = match cfg.chain.memory {
        MemoryModel::Lmm { t_coh } | MemoryModel::Emm { t_coh } => Some(t_coh),
        MemoryModel::Cmm { .. } => None,
    };
    cfg.chain.memory = match kind {
        "cmm" => MemoryModel::Cmm {
            cutoff: cutoff_tau.unwrap_or(match cfg.chain.memory {
                MemoryModel::Cmm { cutoff } => cutoff,
                _ => None,
            }),
        },
        "lmm" | "emm" => {
            let t_coh = t_coh
                .or(current_t_coh)
                .ok_or_else(|| CliError::Config(format!("memory kind `{kind}` requires t_coh")))?;
            if kind == "lmm" {
                MemoryModel::Lmm { t_coh }
            } else {
                MemoryModel::Emm { t_coh }
            }
        }
        _ => unreachable!("kind validated"),
    };
    Ok(())
}

/// Expand a scalar or per-link fidelity list against the hop count.
pub fn apply_f0(cfg: &mut RunConfig, f0: Option<Vec<f64>>) -> Result<(), CliError> {
    let hops = cfg.chain.hops;
    match f0 {
        None => {
            // keep a uniform default in sync with a changed hop count
            if cfg.chain.link_f0.len() != hops {
                let uniform = cfg.chain.link_f0.first().copied().unwrap_or(0.99);
                cfg.chain.link_f0 = vec![uniform; hops];
            }
            Ok(())
        }
        Some(list) if list.len() == 1 => {
            cfg.chain.link_f0 = vec![list[0]; hops];
            Ok(())
        }
        Some(list) if list.len() == hops => {
            cfg.chain.link_f0 = list;
            Ok(())
        }
        Some(list) => Err(CliError::Config(format!(
            "f0 lists one value or one per link: got {} values for {hops} hops",
            list.len()
        ))),
    }
}

/// Final cross-field validation shared by every subcommand.
pub fn validate_common(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.chain
        .validate()
        .map_err(|e| CliError::Config(format!("chain: {e}")))?;
    if cfg.trials < 1 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    if cfg.policies.is_empty() {
        return Err(CliError::Config("at least one policy required".into()));
    }
    for &f_th in &cfg.f_th {
        if !(f_th > 0.5 && f_th <= 1.0) {
            return Err(CliError::Config(format!("f_th {f_th} outside (0.5, 1]")));
        }
    }
    for &budget in &cfg.budget {
        if budget < 1 {
            return Err(CliError::Config("budget must be at least 1".into()));
        }
    }
    for &hops in &cfg.hops_axis {
        if hops < 1 {
            return Err(CliError::Config("hops must be at least 1".into()));
        }
    }
    if cfg.grid_res < 2 {
        return Err(CliError::Config("grid_res must be at least 2".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_values() {
        let text = "\
# comment
[chain]
hops = 3
f0 = 0.97        ; trailing comment
pe = 0.2
[memory]
kind = emm
t_coh = 150
[run]
policy = sp,no-pur
f_th = 0.8, 0.9
seed = 7
";
        let mut cfg = RunConfig::default();
        apply_file(&mut cfg, IniFile::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.chain.hops, 3);
        assert_eq!(cfg.chain.link_f0, vec![0.97; 3]);
        assert_eq!(cfg.chain.p_e, 0.2);
        assert_eq!(cfg.chain.memory, MemoryModel::Emm { t_coh: 150.0 });
        assert_eq!(
            cfg.policies,
            vec![PolicyKind::SwapPurify, PolicyKind::NoPur]
        );
        assert_eq!(cfg.f_th, vec![0.8, 0.9]);
        assert_eq!(cfg.chain.seed, 7);
        validate_common(&cfg).unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = "[chain]\nhops = 2\nbogus = 1\n";
        let mut cfg = RunConfig::default();
        let err = apply_file(&mut cfg, IniFile::parse(text).unwrap()).unwrap_err();
        assert!(err.to_string().contains("chain.bogus"), "{err}");
    }

    #[test]
    fn rejects_duplicate_keys_and_bad_lines() {
        assert!(IniFile::parse("[chain]\nhops = 2\nhops = 3\n").is_err());
        assert!(IniFile::parse("[chain\nhops = 2\n").is_err());
        assert!(IniFile::parse("hops = 2\n").is_err());
        assert!(IniFile::parse("[chain]\nnot a pair\n").is_err());
    }

    #[test]
    fn per_link_f0_must_match_hops() {
        let text = "[chain]\nhops = 3\nf0 = 0.9,0.95\n";
        let mut cfg = RunConfig::default();
        assert!(apply_file(&mut cfg, IniFile::parse(text).unwrap()).is_err());

        let text = "[chain]\nhops = 2\nf0 = 0.9,0.95\n";
        let mut cfg = RunConfig::default();
        apply_file(&mut cfg, IniFile::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.chain.link_f0, vec![0.9, 0.95]);
    }

    #[test]
    fn lmm_requires_t_coh() {
        let text = "[memory]\nkind = lmm\n";
        let mut cfg = RunConfig::default();
        assert!(apply_file(&mut cfg, IniFile::parse(text).unwrap()).is_err());
    }

    #[test]
    fn cmm_cutoff_inf_is_unbounded() {
        let text = "[memory]\nkind = cmm\ncutoff_tau = inf\n";
        let mut cfg = RunConfig::default();
        apply_file(&mut cfg, IniFile::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.chain.memory, MemoryModel::Cmm { cutoff: None });

        let text = "[memory]\nkind = cmm\ncutoff_tau = 500\n";
        let mut cfg = RunConfig::default();
        apply_file(&mut cfg, IniFile::parse(text).unwrap()).unwrap();
        assert_eq!(cfg.chain.memory, MemoryModel::Cmm { cutoff: Some(500) });
    }

    #[test]
    fn validation_catches_bad_axes() {
        let mut cfg = RunConfig::default();
        cfg.f_th = vec![0.4];
        assert!(validate_common(&cfg).is_err());
        let mut cfg = RunConfig::default();
        cfg.budget = vec![0];
        assert!(validate_common(&cfg).is_err());
        let mut cfg = RunConfig::default();
        cfg.policies.clear();
        assert!(validate_common(&cfg).is_err());
    }
}
