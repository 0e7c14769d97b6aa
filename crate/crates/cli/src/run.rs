//! Experiment pipelines behind each subcommand.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use combnet::analysis::{closed_form_load_r2, reference_table, ReferenceConstant};
use combnet::delivery::{
    decentralized_deliver, deliver, deliver_loads, hybrid_deliver, rebalance, Bucket, Demand, DeliveryPlan, Plan,
    PlanDump,
};
use combnet::placement::{centralized_place, decentralized_place, hybrid_place, CachePlacement, PlacementDump};
use combnet::rational::{fmt_q, to_f64};
use combnet::topology::RelayNetwork;
use combnet::verifier::{simulate_concrete, verify_decodability, ConcreteOptions, LoadReport};
use combnet::Q;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, DemandSpec, ExperimentConfig, Mode};

#[derive(Debug, Error)]
pub enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Verification(_) => 2,
        }
    }
}

impl From<combnet::Error> for Failure {
    fn from(e: combnet::Error) -> Self {
        Failure::Config(ConfigError::Model(e))
    }
}

fn io_failure(path: &Path, source: std::io::Error) -> Failure {
    Failure::Config(ConfigError::Io { path: path.to_path_buf(), source })
}

/// One CSV row.
#[derive(Clone, Debug)]
struct Row {
    memory: Q,
    /// `t`, or `t' = KM/N` for decentralized runs.
    t: Q,
    loads: LoadReport,
    closed_form: Option<Q>,
    summary: Vec<String>,
}

fn demand_for(config: &ExperimentConfig) -> Result<Demand, Failure> {
    let k = config.network.num_users();
    Ok(match &config.demand {
        DemandSpec::WorstCase => Demand::new((1..=k).collect(), config.num_files)?,
        DemandSpec::Explicit(files) => Demand::new(files.clone(), config.num_files)?,
    })
}

fn integer_t(config: &ExperimentConfig, memory: Q) -> Result<usize, Failure> {
    let t = memory * Q::from_integer(config.network.num_users() as i128) / Q::from_integer(config.num_files as i128);
    if !t.is_integer() {
        return Err(ConfigError::Invalid(format!("M = {} gives non-integer t = KM/N = {}", fmt_q(&memory), fmt_q(&t)))
            .into());
    }
    Ok(t.to_integer() as usize)
}

fn relay_line(label: &str, loads: &LoadReport) -> String {
    let parts: Vec<String> = loads.relay.iter().enumerate().map(|(i, l)| format!("R{}={}", i + 1, fmt_q(l))).collect();
    format!("  {label}: {}", parts.join(" "))
}

fn rebalanced<B: Bucket>(plan: Plan<B>, network: &RelayNetwork, summary: &mut Vec<String>) -> Plan<B> {
    let after = rebalance(&plan, network);
    summary.push(relay_line("relay loads before rebalance", &plan.loads));
    summary.push(relay_line("relay loads after rebalance", &after.loads));
    summary.push(format!("  rebalance moves: {}", after.moves.len()));
    after
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("dump serializes");
    fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
}

fn dump_path(prefix: &Path, row: usize, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!("{row}.{suffix}.json"));
    PathBuf::from(s)
}

/// Symbolic and optional bit-level checks of a full plan.
fn check_plan(
    config: &ExperimentConfig,
    placement: &CachePlacement,
    plan: &DeliveryPlan,
    demand: &Demand,
    summary: &mut Vec<String>,
) -> Result<(), Failure> {
    let net = &config.network;
    if config.verify {
        let reports = verify_decodability(net, placement, plan, demand)?;
        let failing: Vec<usize> = reports.iter().filter(|r| !r.pass).map(|r| r.user).collect();
        if !failing.is_empty() {
            return Err(Failure::Verification(format!("users {failing:?} cannot decode their files")));
        }
        summary.push(format!("  decodability: all {} users pass", reports.len()));
    }
    if let Some(bits) = config.concrete_bits {
        let options = ConcreteOptions { bits, seed: config.seed, fault: None };
        let report = simulate_concrete(net, placement, plan, demand, &options)?;
        if !report.all_pass() {
            return Err(Failure::Verification(format!(
                "concrete run at B={bits}: users {:?} decoded wrong bits",
                report.failing()
            )));
        }
        summary.push(format!("  concrete run at B={bits}: all users recover their files"));
    }
    Ok(())
}

fn needs_full_plan(config: &ExperimentConfig) -> bool {
    config.verify || config.concrete_bits.is_some() || config.dump.is_some()
}

fn centralized_row(config: &ExperimentConfig, index: usize, memory: Q) -> Result<Row, Failure> {
    let net = &config.network;
    let demand = demand_for(config)?;
    let t = integer_t(config, memory)?;
    let mut summary = Vec::new();
    let loads = if needs_full_plan(config) {
        let placement = centralized_place(net.num_users(), config.num_files, t)?;
        let mut plan = deliver(net, &placement, &demand)?;
        if config.rebalance {
            plan = rebalanced(plan, net, &mut summary);
        }
        if let Some(prefix) = &config.dump {
            write_json(&dump_path(prefix, index, "plan"), &plan.to_dump(net, &demand))?;
            write_json(&dump_path(prefix, index, "placement"), &placement.to_dump())?;
        }
        check_plan(config, &placement, &plan, &demand, &mut summary)?;
        plan.loads
    } else {
        let mut plan = deliver_loads(net, config.num_files, t, &demand)?;
        if config.rebalance {
            plan = rebalanced(plan, net, &mut summary);
        }
        plan.loads
    };
    let closed_form = match (net.relay_degree(), &config.demand) {
        (Some(2), DemandSpec::WorstCase) if net.num_relays() >= 3 => Some(closed_form_load_r2(net.num_relays(), t)?),
        _ => None,
    };
    Ok(Row { memory, t: Q::from_integer(t as i128), loads, closed_form, summary })
}

fn decentralized_row(config: &ExperimentConfig, index: usize, memory: Q) -> Result<Row, Failure> {
    let net = &config.network;
    let demand = demand_for(config)?;
    let placement = decentralized_place(net.num_users(), config.num_files, memory, config.seed, config.bits)?;
    let mut plan = decentralized_deliver(net, &placement, &demand)?;
    let mut summary = Vec::new();
    if config.rebalance {
        plan = rebalanced(plan, net, &mut summary);
    }
    if let Some(prefix) = &config.dump {
        write_json(&dump_path(prefix, index, "plan"), &plan.to_dump(net, &demand))?;
        write_json(&dump_path(prefix, index, "placement"), &placement.to_dump())?;
    }
    check_plan(config, &placement, &plan, &demand, &mut summary)?;
    let t = memory * Q::from_integer(net.num_users() as i128) / Q::from_integer(config.num_files as i128);
    Ok(Row { memory, t, loads: plan.loads, closed_form: None, summary })
}

fn hybrid_row(config: &ExperimentConfig) -> Result<Row, Failure> {
    let net = &config.network;
    let params = config.hybrid.as_ref().expect("hybrid params present in hybrid mode");
    let demand = demand_for(config)?;
    let placement = hybrid_place(
        net,
        config.num_files,
        params.relay_memory,
        params.t3,
        params.t4,
        Some(params.user_memory),
        config.seed,
    )?;
    let outcome = hybrid_deliver(net, &placement, &demand)?;
    let mut summary = vec![
        format!("  server-to-relay load: {}", fmt_q(&outcome.server_to_relay)),
        format!("  relay-to-user load: {}", fmt_q(&outcome.relay_to_user)),
    ];
    check_plan(config, &placement, &outcome.plan, &demand, &mut summary)?;
    Ok(Row {
        memory: params.user_memory,
        t: Q::from_integer(params.t4 as i128),
        loads: outcome.plan.loads,
        closed_form: None,
        summary,
    })
}

fn reference_columns(config: &ExperimentConfig) -> Vec<(String, Vec<ReferenceConstant>)> {
    let Some(scenario) = config.reference.filter(|_| config.compare) else {
        return Vec::new();
    };
    let mut cols: Vec<(String, Vec<ReferenceConstant>)> = Vec::new();
    for c in reference_table(scenario) {
        let name = format!("ref_{}", c.scheme);
        match cols.iter_mut().find(|(n, _)| *n == name) {
            Some((_, v)) => v.push(c),
            None => cols.push((name, vec![c])),
        }
    }
    cols
}

fn reference_cell(constants: &[ReferenceConstant], memory: Q) -> String {
    constants
        .iter()
        .find(|c| c.memory.is_none_or(|m| m == memory))
        .map(|c| fmt_q(&c.load))
        .unwrap_or_default()
}

/// Runs every sweep point and writes the CSV to `out`. Rows come back in
/// sweep order whatever the scheduling.
pub fn run_experiment(config: &ExperimentConfig, out: &mut dyn Write, log: &mut dyn Write) -> Result<(), Failure> {
    let results: Vec<Result<Row, Failure>> = config
        .memories
        .par_iter()
        .enumerate()
        .map(|(i, &m)| match config.mode {
            Mode::Centralized | Mode::General => centralized_row(config, i, m),
            Mode::Decentralized => decentralized_row(config, i, m),
            Mode::Hybrid => hybrid_row(config),
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let refs = reference_columns(config);
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> =
        ["M", "t", "R_max", "R_max_float", "R_h_max", "R_hk_max", "closed_form"].map(String::from).to_vec();
    header.extend(refs.iter().map(|(n, _)| n.clone()));
    csv.write_record(&header).map_err(csv_failure)?;
    for row in &rows {
        let mut record = vec![
            fmt_q(&row.memory),
            fmt_q(&row.t),
            fmt_q(&row.loads.max),
            format!("{}", to_f64(&row.loads.max)),
            fmt_q(&row.loads.max_relay),
            fmt_q(&row.loads.max_link),
            row.closed_form.as_ref().map(fmt_q).unwrap_or_default(),
        ];
        record.extend(refs.iter().map(|(_, c)| reference_cell(c, row.memory)));
        csv.write_record(&record).map_err(csv_failure)?;
    }
    let bytes = csv.into_inner().map_err(|e| csv_failure(e.into_error().into()))?;
    out.write_all(&bytes).map_err(|e| io_failure(Path::new("<output>"), e))?;

    for row in &rows {
        let _ = writeln!(log, "M={} t={} R_max={}", fmt_q(&row.memory), fmt_q(&row.t), fmt_q(&row.loads.max));
        for line in &row.summary {
            let _ = writeln!(log, "{line}");
        }
        if let Some(cf) = &row.closed_form {
            if *cf != row.loads.max {
                let _ = writeln!(log, "  warning: closed form {} differs from simulated load", fmt_q(cf));
            }
        }
    }
    for (_, constants) in &refs {
        for c in constants.iter().filter(|c| c.flagged) {
            let _ = writeln!(log, "note: reference {} = {} disagrees with our own accounting", c.scheme, fmt_q(&c.load));
        }
    }
    Ok(())
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Config(ConfigError::Invalid(format!("csv output: {e}")))
}

/// Re-checks a dumped plan against a dumped placement. A plan that cannot
/// be rebuilt consistently counts as a verification failure.
pub fn verify_plan(
    plan_path: &Path,
    placement_path: &Path,
    concrete_bits: Option<u64>,
    seed: u64,
    log: &mut dyn Write,
) -> Result<(), Failure> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| io_failure(p, e));
    let parse_err = |p: &Path, e: serde_json::Error| ConfigError::Invalid(format!("{}: {e}", p.display()));
    let plan_dump: PlanDump = serde_json::from_str(&read(plan_path)?).map_err(|e| parse_err(plan_path, e))?;
    let placement_dump: PlacementDump =
        serde_json::from_str(&read(placement_path)?).map_err(|e| parse_err(placement_path, e))?;
    let placement = CachePlacement::from_dump(&placement_dump)?;
    let inconsistent = |e: combnet::Error| match e {
        combnet::Error::InconsistentPlan(msg) => Failure::Verification(format!("inconsistent plan: {msg}")),
        other => other.into(),
    };
    let (network, demand, plan) = DeliveryPlan::from_dump(&plan_dump).map_err(inconsistent)?;
    let reports = verify_decodability(&network, &placement, &plan, &demand).map_err(inconsistent)?;
    let _ = writeln!(log, "{}", relay_line("relay loads", &plan.loads));
    let _ = writeln!(log, "  R_max={}", fmt_q(&plan.loads.max));
    let failing: Vec<usize> = reports.iter().filter(|r| !r.pass).map(|r| r.user).collect();
    if !failing.is_empty() {
        return Err(Failure::Verification(format!("users {failing:?} cannot decode their files")));
    }
    let _ = writeln!(log, "  decodability: all {} users pass", reports.len());
    if let Some(bits) = concrete_bits {
        let options = ConcreteOptions { bits, seed, fault: None };
        let report = simulate_concrete(&network, &placement, &plan, &demand, &options).map_err(inconsistent)?;
        if !report.all_pass() {
            return Err(Failure::Verification(format!("users {:?} decoded wrong bits", report.failing())));
        }
        let _ = writeln!(log, "  concrete run at B={bits}: all users recover their files");
    }
    Ok(())
}
