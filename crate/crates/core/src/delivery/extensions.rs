//! Delivery for decentralized and hybrid (relay + user cache) placements.

use num_traits::Zero;
use serde::Serialize;

use super::tsets::{check_dimensions, FromPlacement};
use super::{run_engine, Demand, DeliveryPlan, Plan, SegmentList};
use crate::error::{Error, Result};
use crate::placement::{CachePlacement, PlacementKind};
use crate::rational::{qi, Q};
use crate::topology::RelayNetwork;
use crate::verifier::compute_loads;

/// Coded units of the relay-cached region sent from a relay's own cache to
/// one user. Costs nothing on the server → relay link.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodedTransfer {
    pub relay: usize,
    pub user: usize,
    pub file: usize,
    pub amount: Q,
}

/// Delivers each cache-set-size group `t'` of a decentralized placement
/// separately and concatenates the plans. The `t' = 0` group is sent
/// uncoded, split evenly over each requester's relays.
pub fn decentralized_deliver(
    network: &RelayNetwork,
    placement: &CachePlacement,
    demand: &Demand,
) -> Result<DeliveryPlan> {
    check_dimensions(network, placement, demand)?;
    if !matches!(placement.kind(), PlacementKind::Decentralized { .. }) {
        return Err(Error::ParameterDomain("expected a decentralized placement".into()));
    }
    let mut plan = Plan {
        messages: Vec::new(),
        coded: Vec::new(),
        ledger: Vec::new(),
        pieces: Vec::new(),
        moves: Vec::new(),
        loads: Default::default(),
    };
    for group in 0..network.num_users() {
        let source = FromPlacement { placement, demand, group: Some(group) };
        let (messages, ledger, pieces) = run_engine::<SegmentList>(network, &source, group, true);
        plan.messages.extend(messages);
        plan.ledger.extend(ledger);
        plan.pieces.extend(pieces);
    }
    plan.loads = compute_loads(network, &plan.messages, &plan.coded);
    Ok(plan)
}

#[derive(Clone, Debug)]
pub struct HybridOutcome {
    pub plan: DeliveryPlan,
    /// `max_h R_h`.
    pub server_to_relay: Q,
    /// `max_{h,k} R_{h→k}`.
    pub relay_to_user: Q,
}

/// Hybrid delivery: every relay forwards `(|F¹| − plain)/r` coded units of
/// the requested file's relay-cached region to each of its users, and the
/// remainder of each file is delivered by the topology-aware scheme with
/// parameter `t4`.
pub fn hybrid_deliver(
    network: &RelayNetwork,
    placement: &CachePlacement,
    demand: &Demand,
) -> Result<HybridOutcome> {
    check_dimensions(network, placement, demand)?;
    let PlacementKind::Hybrid { t4, .. } = placement.kind() else {
        return Err(Error::ParameterDomain("expected a hybrid placement".into()));
    };
    let r = network
        .relay_degree()
        .ok_or_else(|| Error::ParameterDomain("hybrid delivery needs a combination network".into()))?;
    let source = FromPlacement { placement, demand, group: None };
    let (messages, ledger, pieces) = run_engine::<SegmentList>(network, &source, *t4, true);
    let mut coded = Vec::new();
    if let Some(rc) = placement.relay_cache() {
        let plain = placement.plain_sample().map(|p| p.per_file).unwrap_or_else(Q::zero);
        let amount = (rc.region - plain) / qi(r as i128);
        if amount > Q::zero() {
            for h in network.relays() {
                for k in network.users_of(h).iter() {
                    coded.push(CodedTransfer { relay: h, user: k, file: demand.file_of(k), amount });
                }
            }
        }
    }
    let loads = compute_loads(network, &messages, &coded);
    let outcome = HybridOutcome {
        server_to_relay: loads.max_relay,
        relay_to_user: loads.max_link,
        plan: Plan { messages, coded, ledger, pieces, moves: Vec::new(), loads },
    };
    Ok(outcome)
}
