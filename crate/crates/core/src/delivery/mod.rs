//! Topology-aware multicast delivery.
//!
//! Missing subfiles are routed to the relays that reach the most users
//! caching them ([`tsets::partition_subfiles`]); per relay, operands of each
//! user set `J` are equalized by bit borrowing ([`borrow::borrow_bits`]) and
//! XOR-ed into one message `W^h_J` that the relay forwards to `J`.

pub mod borrow;
pub mod bucket;
mod extensions;
mod rebalance;
pub mod tsets;

use std::collections::HashMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

pub use borrow::{BorrowRecord, BorrowRound};
pub use bucket::{Bucket, SegmentList, Span};
pub use extensions::{decentralized_deliver, hybrid_deliver, CodedTransfer, HybridOutcome};
pub use rebalance::{rebalance, RebalanceMove, MOVE_GRID};
pub use tsets::{MissingSubfiles, PieceRecord, TSetTable};

use crate::error::{Error, Result};
use crate::placement::{CachePlacement, PlacementKind};
use crate::rational::{fmt_q, parse_q, Q};
use crate::topology::RelayNetwork;
use crate::userset::UserSet;
use crate::verifier::{compute_loads, LoadReport};
use tsets::{check_dimensions, partition_subfiles, CentralizedMissing, FromPlacement, Partition};

/// Demand vector `d`: user `k` requests file `d[k-1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand(Vec<usize>);

impl Demand {
    pub fn new(files: Vec<usize>, num_files: usize) -> Result<Self> {
        if let Some(bad) = files.iter().find(|&&f| f == 0 || f > num_files) {
            return Err(Error::DimensionMismatch(format!(
                "demanded file {bad} outside 1..={num_files}"
            )));
        }
        Ok(Demand(files))
    }

    /// All-distinct demand `(1, 2, …, K)`.
    pub fn worst_case(num_users: usize) -> Self {
        Demand((1..=num_users).collect())
    }

    pub fn file_of(&self, user: usize) -> usize {
        self.0[user - 1]
    }

    pub fn files(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operand<B> {
    pub user: usize,
    pub data: B,
}

/// `W^h_J`: positional XOR of one operand per user of `J`, each padded with
/// zeros to `length`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message<B> {
    pub relay: usize,
    pub users: UserSet,
    pub length: Q,
    pub operands: Vec<Operand<B>>,
    /// Cache-set size of the subfiles carried (decentralized groups);
    /// equals `t` for centralized plans.
    pub group: usize,
}

impl<B: Bucket> Message<B> {
    pub fn operand(&self, user: usize) -> Option<&B> {
        self.operands.iter().find(|o| o.user == user).map(|o| &o.data)
    }

    /// Cuts the leading `amount` of every operand into a new message.
    pub fn split_front(&mut self, amount: &Q) -> Message<B> {
        let amount = if *amount > self.length { self.length } else { *amount };
        let operands = self
            .operands
            .iter_mut()
            .map(|o| Operand { user: o.user, data: o.data.take_front(&amount) })
            .collect();
        self.length -= amount;
        Message { relay: self.relay, users: self.users, length: amount, operands, group: self.group }
    }
}

#[derive(Clone, Debug)]
pub struct Plan<B> {
    pub messages: Vec<Message<B>>,
    /// Relay-sourced coded transfers (hybrid placements only).
    pub coded: Vec<CodedTransfer>,
    pub ledger: Vec<BorrowRecord>,
    pub pieces: Vec<PieceRecord>,
    pub moves: Vec<RebalanceMove>,
    pub loads: LoadReport,
}

pub type DeliveryPlan = Plan<SegmentList>;

impl<B: Bucket> Plan<B> {
    pub fn refresh_loads(&mut self, network: &RelayNetwork) {
        self.loads = compute_loads(network, &self.messages, &self.coded);
    }

    /// Total operand length destined to each user (padding excluded).
    pub fn delivered_per_user(&self, num_users: usize) -> Vec<Q> {
        let mut out = vec![Q::zero(); num_users];
        for m in &self.messages {
            for o in &m.operands {
                out[o.user - 1] += o.data.length();
            }
        }
        out
    }

    /// Number of pieces each file was cut into by the partition step. A
    /// subfile counts as the most pieces any single requester cut it into,
    /// or once if nobody needed it.
    pub fn pieces_per_file(&self, placement: &CachePlacement) -> Vec<usize> {
        let mut cuts: HashMap<(usize, UserSet, usize), usize> = HashMap::new();
        for p in &self.pieces {
            *cuts.entry((p.file, p.subfile, p.user)).or_default() += 1;
        }
        let mut widest: HashMap<(usize, UserSet), usize> = HashMap::new();
        for ((f, w, _), n) in cuts {
            let e = widest.entry((f, w)).or_default();
            *e = (*e).max(n);
        }
        let mut out = vec![0usize; placement.num_files()];
        for s in placement.all_subfiles() {
            out[s.file - 1] += widest.get(&(s.file, s.cache_set)).copied().unwrap_or(1);
        }
        out
    }
}

/// Runs borrowing and message generation relay by relay, user sets in
/// increasing size.
pub(crate) fn generate_messages<B: Bucket>(
    network: &RelayNetwork,
    tsets: &mut TSetTable<B>,
    group: usize,
) -> (Vec<Message<B>>, Vec<BorrowRecord>) {
    let mut messages = Vec::new();
    let mut ledger = Vec::new();
    for h in network.relays() {
        let relay_users = network.users_of(h);
        for j in tsets.message_sets(h) {
            let target = j
                .iter()
                .map(|k| tsets.length(h, k, j.without(k)))
                .max()
                .unwrap_or_else(Q::zero);
            if target.is_zero() {
                continue;
            }
            for k in j.iter() {
                if let Some(rec) = borrow::borrow_bits(tsets, h, relay_users, j, k, &target) {
                    ledger.push(rec);
                }
            }
            let operands: Vec<Operand<B>> = j
                .iter()
                .map(|k| Operand { user: k, data: tsets.remove(h, k, j.without(k)) })
                .collect();
            let length = operands.iter().map(|o| o.data.length()).max().unwrap_or_else(Q::zero);
            messages.push(Message { relay: h, users: j, length, operands, group });
        }
    }
    (messages, ledger)
}

pub(crate) fn run_engine<B: Bucket>(
    network: &RelayNetwork,
    source: &dyn MissingSubfiles,
    group: usize,
    record: bool,
) -> (Vec<Message<B>>, Vec<BorrowRecord>, Vec<PieceRecord>) {
    let Partition { mut tsets, pieces } = partition_subfiles::<B>(network, source, record);
    let (messages, ledger) = generate_messages(network, &mut tsets, group);
    (messages, ledger, pieces)
}

/// Full delivery plan for a centralized placement (or any placement whose
/// missing subfiles should be handled as one group).
pub fn deliver(network: &RelayNetwork, placement: &CachePlacement, demand: &Demand) -> Result<DeliveryPlan> {
    check_dimensions(network, placement, demand)?;
    let group = match placement.kind() {
        PlacementKind::Centralized { t } => *t,
        PlacementKind::Hybrid { t4, .. } => *t4,
        PlacementKind::Decentralized { .. } => {
            return Err(Error::ParameterDomain(
                "decentralized placements are delivered by decentralized_deliver".into(),
            ))
        }
    };
    let source = FromPlacement { placement, demand, group: None };
    let (messages, ledger, pieces) = run_engine::<SegmentList>(network, &source, group, true);
    let loads = compute_loads(network, &messages, &[]);
    Ok(Plan { messages, coded: Vec::new(), ledger, pieces, moves: Vec::new(), loads })
}

/// Loads of the centralized `t`-placement, computed on lengths only.
pub fn deliver_loads(
    network: &RelayNetwork,
    num_files: usize,
    t: usize,
    demand: &Demand,
) -> Result<Plan<Span>> {
    let k = network.num_users();
    if t > k {
        return Err(Error::ParameterDomain(format!("t={t} outside [0, {k}]")));
    }
    if num_files < k {
        return Err(Error::ParameterDomain(format!("N={num_files} < K={k} is not supported")));
    }
    if demand.len() != k {
        return Err(Error::DimensionMismatch(format!("demand has {} entries, K={k}", demand.len())));
    }
    Demand::new(demand.files().to_vec(), num_files)?;
    let source = CentralizedMissing { num_users: k, t, demand };
    let (messages, ledger, _) = run_engine::<Span>(network, &source, t, false);
    let loads = compute_loads(network, &messages, &[]);
    Ok(Plan { messages, coded: Vec::new(), ledger, pieces: Vec::new(), moves: Vec::new(), loads })
}

/// JSON plan dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDump {
    pub relays: Vec<Vec<usize>>,
    pub demand: Vec<usize>,
    pub messages: Vec<DumpMessage>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpMessage {
    pub relay: usize,
    pub users: Vec<usize>,
    pub length_num: i128,
    pub length_den: i128,
    pub operands: Vec<DumpOperand>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpOperand {
    pub user: usize,
    /// `(file, lo, hi)` with `lo`/`hi` as `num/den` strings.
    pub segments: Vec<(usize, String, String)>,
}

impl DeliveryPlan {
    pub fn to_dump(&self, network: &RelayNetwork, demand: &Demand) -> PlanDump {
        PlanDump {
            relays: network.relays().map(|h| network.users_of(h).to_vec()).collect(),
            demand: demand.files().to_vec(),
            messages: self
                .messages
                .iter()
                .map(|m| DumpMessage {
                    relay: m.relay,
                    users: m.users.to_vec(),
                    length_num: *m.length.numer(),
                    length_den: *m.length.denom(),
                    operands: m
                        .operands
                        .iter()
                        .map(|o| DumpOperand {
                            user: o.user,
                            segments: o
                                .data
                                .segments()
                                .iter()
                                .map(|s| (s.file, fmt_q(&s.lo), fmt_q(&s.hi)))
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds network, demand and messages from a dump. Operand lengths
    /// must not exceed the stated message length.
    pub fn from_dump(dump: &PlanDump) -> Result<(RelayNetwork, Demand, DeliveryPlan)> {
        let map = dump
            .relays
            .iter()
            .enumerate()
            .map(|(i, users)| (i + 1, users.clone()))
            .collect();
        let network = RelayNetwork::general(&map)?;
        let num_files = dump.demand.iter().copied().max().unwrap_or(0);
        let demand = Demand::new(dump.demand.clone(), num_files)?;
        if demand.len() != network.num_users() {
            return Err(Error::DimensionMismatch("demand length differs from user count".into()));
        }
        let mut messages = Vec::new();
        for m in &dump.messages {
            if m.relay == 0 || m.relay > network.num_relays() || m.length_den <= 0 {
                return Err(Error::InconsistentPlan(format!("bad message header at relay {}", m.relay)));
            }
            let users = UserSet::from_ids(m.users.iter().copied());
            let length = Q::new(m.length_num, m.length_den);
            let mut operands = Vec::new();
            for o in &m.operands {
                if !users.contains(o.user) {
                    return Err(Error::InconsistentPlan(format!("operand for user {} outside J", o.user)));
                }
                let mut segs = Vec::new();
                for (file, lo, hi) in &o.segments {
                    let (lo, hi) = (parse_q(lo)?, parse_q(hi)?);
                    if lo >= hi {
                        return Err(Error::InconsistentPlan(format!("empty segment [{lo},{hi})")));
                    }
                    segs.push(crate::placement::Segment::new(*file, lo, hi));
                }
                let data = SegmentList::from_segments(segs);
                if data.length() > length {
                    return Err(Error::InconsistentPlan("operand longer than its message".into()));
                }
                operands.push(Operand { user: o.user, data });
            }
            messages.push(Message { relay: m.relay, users, length, operands, group: 0 });
        }
        let loads = compute_loads(&network, &messages, &[]);
        let plan = Plan { messages, coded: Vec::new(), ledger: Vec::new(), pieces: Vec::new(), moves: Vec::new(), loads };
        Ok((network, demand, plan))
    }
}
