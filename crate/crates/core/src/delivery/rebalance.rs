//! Greedy load rebalancing across relays: part of a message on a heavily
//! loaded relay is re-routed through a lighter relay that also reaches
//! every user of the message.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use super::{Bucket, Plan};
use crate::rational::{denominator_lcm, qi, Q};
use crate::topology::RelayNetwork;
use crate::userset::UserSet;
use crate::verifier::compute_loads;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RebalanceMove {
    pub from: usize,
    pub to: usize,
    pub users: UserSet,
    pub amount: Q,
}

fn relay_loads<B: Bucket>(plan: &Plan<B>, num_relays: usize) -> Vec<Q> {
    let mut loads = vec![Q::zero(); num_relays];
    for m in &plan.messages {
        loads[m.relay - 1] += m.length;
    }
    loads
}

/// Moves are multiples of `1/(D·MOVE_GRID)` where `D` is the common
/// denominator of the input message lengths; smaller moves are dropped.
pub const MOVE_GRID: i128 = 64;

/// Relays sorted by decreasing server load, ties by id.
fn heaviest_first(loads: &[Q]) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=loads.len()).collect();
    order.sort_by(|a, b| loads[b - 1].cmp(&loads[a - 1]).then(a.cmp(b)));
    order
}

/// Walks relays from heaviest to lightest. At the current relay, every user
/// set `J` with a non-empty message is a candidate; its receiver is the
/// most loaded strictly-later relay connected to all of `J`, and the
/// movable amount is `min(|W_J|, (L_from − L_to)/2)`. The candidate with
/// the largest positive amount (ties: smallest `J`) is moved as a prefix of
/// the message and the relays are re-sorted; when no candidate has a
/// positive amount the walk advances. Amounts are rounded down to the
/// [`MOVE_GRID`] lattice, otherwise two relays sharing a user set can trade
/// ever smaller halves forever. Stops after `H · #messages` moves.
pub fn rebalance<B: Bucket>(plan: &Plan<B>, network: &RelayNetwork) -> Plan<B> {
    let mut out = plan.clone();
    let h_count = network.num_relays();
    let mut loads = relay_loads(&out, h_count);
    let cap = h_count * out.messages.len().max(1);
    let quantum = Q::new(1, denominator_lcm(out.messages.iter().map(|m| &m.length)) * MOVE_GRID);
    let mut i = 0;
    while i + 1 < h_count && out.moves.len() - plan.moves.len() < cap {
        let order = heaviest_first(&loads);
        let from = order[i];
        let lighter = &order[i + 1..];

        let mut per_set: BTreeMap<UserSet, Q> = BTreeMap::new();
        for m in out.messages.iter().filter(|m| m.relay == from) {
            *per_set.entry(m.users).or_insert_with(Q::zero) += m.length;
        }
        let mut best: Option<(Q, UserSet, usize)> = None;
        for (&users, &len) in &per_set {
            if len.is_zero() {
                continue;
            }
            let Some(&to) = lighter
                .iter()
                .filter(|&&h| users.is_subset_of(network.users_of(h)))
                .max_by(|a, b| loads[*a - 1].cmp(&loads[*b - 1]).then(b.cmp(a)))
            else {
                continue;
            };
            let amount = len.min((loads[from - 1] - loads[to - 1]) / qi(2));
            let amount = (amount / quantum).floor() * quantum;
            if amount > Q::zero() && best.as_ref().is_none_or(|(b, _, _)| amount > *b) {
                best = Some((amount, users, to));
            }
        }
        let Some((amount, users, to)) = best else {
            i += 1;
            continue;
        };

        let mut left = amount;
        let mut moved = Vec::new();
        for m in out.messages.iter_mut().filter(|m| m.relay == from && m.users == users) {
            if left.is_zero() {
                break;
            }
            let mut piece = m.split_front(&left);
            left -= piece.length;
            piece.relay = to;
            moved.push(piece);
        }
        out.messages.retain(|m| !m.length.is_zero());
        out.messages.extend(moved);
        loads[from - 1] -= amount;
        loads[to - 1] += amount;
        out.moves.push(RebalanceMove { from, to, users, amount });
    }
    out.loads = compute_loads(network, &out.messages, &out.coded);
    out
}
