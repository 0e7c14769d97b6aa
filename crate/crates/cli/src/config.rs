//! Flat `key = value` experiment configs and the topology file format.
//!
//! ```text
//! # comments start with '#'
//! topology = combination H=4 r=2
//! N = 6
//! M = 0, 1, 2
//! demand = worst-case
//! ```
//!
//! A topology file is either a single `combination H=<h> r=<r>` line, or a
//! `general` line followed by one `relay <h>: <users>` line per relay.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use combnet::analysis::Scenario;
use combnet::rational::parse_q;
use combnet::topology::RelayNetwork;
use combnet::Q;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] combnet::Error),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Centralized,
    General,
    Decentralized,
    Hybrid,
}

impl Mode {
    fn parse(s: &str) -> Option<Mode> {
        match s {
            "centralized" | "combination" => Some(Mode::Centralized),
            "general" => Some(Mode::General),
            "decentralized" => Some(Mode::Decentralized),
            "hybrid" => Some(Mode::Hybrid),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DemandSpec {
    WorstCase,
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct HybridParams {
    pub relay_memory: Q,
    pub user_memory: Q,
    pub t3: usize,
    pub t4: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub network: RelayNetwork,
    pub num_files: usize,
    /// Sweep points; a single point for hybrid runs (`M2`).
    pub memories: Vec<Q>,
    pub demand: DemandSpec,
    pub seed: u64,
    /// File length of the random decentralized placement.
    pub bits: u64,
    pub concrete_bits: Option<u64>,
    pub rebalance: bool,
    pub verify: bool,
    pub compare: bool,
    pub reference: Option<Scenario>,
    pub hybrid: Option<HybridParams>,
    /// Prefix for per-row JSON dumps.
    pub dump: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "mode", "topology", "topology_file", "N", "M", "demand", "seed", "bits", "concrete_B", "rebalance", "verify",
    "compare", "reference", "M1", "M2", "t3", "t4", "dump",
];

/// Reads `key = value` lines. Duplicate or unknown keys are errors.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |msg: String| ConfigError::Syntax { line: i + 1, msg };
        let (k, v) = line.split_once('=').ok_or_else(|| syntax(format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(syntax(format!("unknown key {k:?}")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(syntax(format!("duplicate key {k:?}")));
        }
    }
    Ok(out)
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse().map_err(|_| invalid(format!("{key}: expected a non-negative integer, got {v:?}")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.trim().parse().map_err(|_| invalid(format!("{key}: expected a non-negative integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(invalid(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_list<T>(v: &str, mut item: impl FnMut(&str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(&mut item).collect()
}

fn parse_scenario(v: &str) -> Result<Scenario, ConfigError> {
    use Scenario::*;
    [Worked, Example1, Example2, Example3, Sweep]
        .into_iter()
        .find(|s| s.name() == v)
        .ok_or_else(|| invalid(format!("unknown reference scenario {v:?}")))
}

/// `combination H=4 r=2`
fn parse_combination(rest: &str) -> Result<RelayNetwork, ConfigError> {
    let mut h = None;
    let mut r = None;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("H", v)) => h = Some(parse_usize("H", v)?),
            Some(("r", v)) => r = Some(parse_usize("r", v)?),
            _ => return Err(invalid(format!("unexpected token {tok:?} in combination topology"))),
        }
    }
    let (Some(h), Some(r)) = (h, r) else {
        return Err(invalid("combination topology needs H= and r="));
    };
    Ok(RelayNetwork::combination(h, r)?)
}

fn parse_relay_line(line: &str, map: &mut BTreeMap<usize, Vec<usize>>) -> Result<(), ConfigError> {
    let body = line.strip_prefix("relay").unwrap_or(line).trim();
    let (h, users) = body.split_once(':').ok_or_else(|| invalid(format!("expected `relay <h>: <users>`, got {line:?}")))?;
    let h = parse_usize("relay", h)?;
    let users = users
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|u| parse_usize("user", u))
        .collect::<Result<Vec<_>, _>>()?;
    if map.insert(h, users).is_some() {
        return Err(invalid(format!("relay {h} listed twice")));
    }
    Ok(())
}

fn general_from_map(map: BTreeMap<usize, Vec<usize>>) -> Result<RelayNetwork, ConfigError> {
    let ids: BTreeSet<usize> = map.keys().copied().collect();
    if ids != (1..=map.len()).collect() {
        return Err(invalid("relays must be numbered 1..H"));
    }
    Ok(RelayNetwork::general(&map)?)
}

/// Parses a topology file.
pub fn parse_topology(text: &str) -> Result<RelayNetwork, ConfigError> {
    let mut lines = text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty());
    let head = lines.next().ok_or_else(|| invalid("empty topology"))?;
    if let Some(rest) = head.strip_prefix("combination") {
        if lines.next().is_some() {
            return Err(invalid("combination topology takes a single line"));
        }
        return parse_combination(rest);
    }
    if head != "general" {
        return Err(invalid(format!("topology must start with `combination` or `general`, got {head:?}")));
    }
    let mut map = BTreeMap::new();
    for line in lines {
        parse_relay_line(line, &mut map)?;
    }
    general_from_map(map)
}

/// Inline topology value: `combination H=.. r=..` or
/// `general 1: 1 2 3; 2: 1 3 4; ...`.
fn parse_inline_topology(v: &str) -> Result<RelayNetwork, ConfigError> {
    if let Some(rest) = v.strip_prefix("combination") {
        return parse_combination(rest);
    }
    let rest = v.strip_prefix("general").ok_or_else(|| invalid(format!("unknown topology {v:?}")))?;
    let mut map = BTreeMap::new();
    for part in rest.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        parse_relay_line(part, &mut map)?;
    }
    general_from_map(map)
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

impl ExperimentConfig {
    pub fn load(path: &Path, mode: Mode) -> Result<Self, ConfigError> {
        let text = read(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), mode)
    }

    /// `base` resolves a relative `topology_file`.
    pub fn parse(text: &str, base: &Path, mode: Mode) -> Result<Self, ConfigError> {
        let kv = parse_pairs(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str);
        if let Some(m) = get("mode") {
            let declared = Mode::parse(m).ok_or_else(|| invalid(format!("unknown mode {m:?}")))?;
            if declared != mode {
                return Err(invalid(format!("config declares mode {m:?} but a different subcommand was used")));
            }
        }
        let network = match (get("topology"), get("topology_file")) {
            (Some(_), Some(_)) => return Err(invalid("give either topology or topology_file, not both")),
            (Some(v), None) => parse_inline_topology(v)?,
            (None, Some(f)) => parse_topology(&read(&base.join(f))?)?,
            (None, None) => return Err(invalid("missing topology")),
        };
        if matches!(mode, Mode::Centralized | Mode::Hybrid) && network.relay_degree().is_none() {
            return Err(invalid("this mode needs a combination topology"));
        }
        let num_files = parse_usize("N", get("N").ok_or_else(|| invalid("missing N"))?)?;
        let hybrid = if mode == Mode::Hybrid {
            let need = |k: &str| get(k).ok_or_else(|| invalid(format!("hybrid mode needs {k}")));
            Some(HybridParams {
                relay_memory: parse_q(need("M1")?)?,
                user_memory: parse_q(need("M2")?)?,
                t3: parse_usize("t3", need("t3")?)?,
                t4: parse_usize("t4", need("t4")?)?,
            })
        } else {
            for k in ["M1", "M2", "t3", "t4"] {
                if kv.contains_key(k) {
                    return Err(invalid(format!("{k} is only valid in hybrid mode")));
                }
            }
            None
        };
        let memories = match &hybrid {
            Some(h) => {
                if kv.contains_key("M") {
                    return Err(invalid("hybrid mode uses M1/M2, not M"));
                }
                vec![h.user_memory]
            }
            None => {
                let list = parse_list(get("M").ok_or_else(|| invalid("missing M"))?, |s| Ok(parse_q(s)?))?;
                if list.is_empty() {
                    return Err(invalid("M sweep is empty"));
                }
                list
            }
        };
        let n = Q::from_integer(num_files as i128);
        if let Some(bad) = memories.iter().find(|m| **m < Q::from_integer(0) || **m > n) {
            return Err(invalid(format!("M = {bad} outside [0, N]")));
        }
        let demand = match get("demand").unwrap_or("worst-case") {
            "worst-case" => DemandSpec::WorstCase,
            v => DemandSpec::Explicit(parse_list(v, |s| parse_usize("demand", s))?),
        };
        let flag = |k: &str, default: bool| get(k).map_or(Ok(default), |v| parse_bool(k, v));
        let dump = get("dump").map(|p| base.join(p));
        if dump.is_some() && mode == Mode::Hybrid {
            return Err(invalid("plan dumps are not supported in hybrid mode"));
        }
        Ok(ExperimentConfig {
            mode,
            network,
            num_files,
            memories,
            demand,
            seed: get("seed").map_or(Ok(0), |v| parse_u64("seed", v))?,
            bits: get("bits").map_or(Ok(1000), |v| parse_u64("bits", v))?,
            concrete_bits: get("concrete_B").map(|v| parse_u64("concrete_B", v)).transpose()?,
            rebalance: flag("rebalance", false)?,
            verify: flag("verify", true)?,
            compare: flag("compare", true)?,
            reference: get("reference").map(parse_scenario).transpose()?,
            hybrid,
            dump,
        })
    }
}
