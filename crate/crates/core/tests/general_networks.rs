mod common;

use std::collections::BTreeMap;

use combnet::delivery::tsets::{partition_subfiles, FromPlacement, Partition};
use combnet::delivery::{hybrid_deliver, rebalance, SegmentList, Bucket};
use combnet::placement::hybrid_place;
use combnet::rational::{binom, q, qi, Q};
use combnet::topology::RelayNetwork;
use combnet::userset::UserSet;
use combnet::verifier::{compute_loads, verify_decodability};

use common::{asymmetric_five, symmetric_five, worst_case, Fixture};

fn table(f: &Fixture) -> Vec<(usize, Vec<usize>, Q)> {
    f.plan.messages.iter().map(|m| (m.relay, m.users.to_vec(), m.length)).collect()
}

/// Independent recount of T-set lengths: every `(k, W)` pair is routed to
/// the relays of `k` that see the most of `W`, read straight off the
/// adjacency map.
fn recount(map: &BTreeMap<usize, Vec<usize>>, k_users: usize, t: usize) -> BTreeMap<(usize, usize, Vec<usize>), Q> {
    let mut out = BTreeMap::new();
    let piece = Q::new(1, binom(k_users as i64, t as i64));
    let subsets: Vec<Vec<usize>> = (0u32..1 << k_users)
        .filter(|m| m.count_ones() as usize == t)
        .map(|m| (1..=k_users).filter(|u| m >> (u - 1) & 1 == 1).collect())
        .collect();
    for k in 1..=k_users {
        let relays: Vec<usize> = map.iter().filter(|(_, us)| us.contains(&k)).map(|(h, _)| *h).collect();
        for w in subsets.iter().filter(|w| !w.contains(&k)) {
            let seen = |h: &usize| w.iter().filter(|u| map[h].contains(u)).count();
            let best = relays.iter().map(seen).max().unwrap();
            let winners: Vec<usize> = relays.iter().copied().filter(|h| seen(h) == best).collect();
            for h in &winners {
                let known: Vec<usize> = w.iter().copied().filter(|u| map[h].contains(u)).collect();
                *out.entry((*h, k, known)).or_insert_with(|| qi(0)) += piece / qi(winners.len() as i128);
            }
        }
    }
    out
}

fn engine_lengths(f: &Fixture) -> BTreeMap<(usize, usize, Vec<usize>), Q> {
    let source = FromPlacement { placement: &f.placement, demand: &f.demand, group: None };
    let Partition { tsets, .. } = partition_subfiles::<SegmentList>(&f.network, &source, false);
    tsets
        .sorted()
        .into_iter()
        .map(|((h, k, known), b)| ((h, k, known.to_vec()), b.length()))
        .collect()
}

#[test]
fn tset_lengths_match_recount() {
    for (f, t) in [(symmetric_five(), 2), (asymmetric_five(), 2), (common::combination(5, 3, 3), 3), (common::combination(4, 2, 1), 1)] {
        let map = f.network.to_map();
        assert_eq!(engine_lengths(&f), recount(&map, f.network.num_users(), t));
    }
}

#[test]
fn symmetric_five_relays_carry_a_quarter() {
    let f = symmetric_five();
    assert!(f.plan.loads.relay.iter().all(|l| *l == q(1, 4)));
    assert_eq!(f.plan.loads.max, q(1, 4));
}

#[test]
fn asymmetric_relay_loads() {
    let f = asymmetric_five();
    assert_eq!(f.plan.loads.relay, vec![q(1, 3), q(7, 30), q(17, 60), q(7, 30), q(1, 3)]);
    assert_eq!(f.plan.loads.max, q(1, 3));
}

#[test]
fn asymmetric_message_table() {
    let f = asymmetric_five();
    // W^2_{3,4} is B/20: this is what makes relay 2 total 7/30
    let expected = common::asymmetric_table();
    assert_eq!(table(&f), expected);
}

#[test]
fn rebalance_reaches_three_tenths() {
    let f = asymmetric_five();
    let before: Q = f.plan.loads.total();
    let after = rebalance(&f.plan, &f.network);
    assert_eq!(after.loads.max, q(3, 10));
    assert_eq!(after.loads.total(), before);
    let first: Vec<_> = after.moves.iter().take(2).map(|m| (m.from, m.to, m.users.to_vec(), m.amount)).collect();
    assert_eq!(first, vec![(1, 2, vec![1, 3], q(1, 30)), (5, 4, vec![3, 5], q(1, 30))]);
    let reports = verify_decodability(&f.network, &f.placement, &after, &f.demand).unwrap();
    assert!(reports.iter().all(|r| r.pass));
}

#[test]
fn rebalance_leaves_symmetric_plans_alone() {
    for f in [symmetric_five(), common::four_relays()] {
        let after = rebalance(&f.plan, &f.network);
        assert!(after.moves.is_empty());
        assert_eq!(table(&f), after.messages.iter().map(|m| (m.relay, m.users.to_vec(), m.length)).collect::<Vec<_>>());
    }
}

#[test]
fn hybrid_load_pair() {
    let net = RelayNetwork::combination(4, 2).unwrap();
    let demand = worst_case(6);
    let placement = hybrid_place(&net, 6, qi(1), 1, 2, Some(qi(2)), 3).unwrap();
    assert!(placement.cache_size(1) <= qi(2));
    let out = hybrid_deliver(&net, &placement, &demand).unwrap();
    assert_eq!(out.server_to_relay, q(14, 45));
    // 5/36 coded units from the relay cache plus 2/9 of delivery traffic
    assert_eq!(out.relay_to_user, q(13, 36));
    let coded: Q = out.plan.coded.iter().filter(|c| c.relay == 1 && c.user == 1).map(|c| c.amount).sum();
    assert_eq!(coded, q(5, 36));
    let reports = verify_decodability(&net, &placement, &out.plan, &demand).unwrap();
    assert!(reports.iter().all(|r| r.pass));
}

#[test]
fn hybrid_without_relay_memory_is_plain_delivery() {
    let net = RelayNetwork::combination(4, 2).unwrap();
    let demand = worst_case(6);
    let placement = hybrid_place(&net, 6, qi(0), 0, 2, None, 3).unwrap();
    let out = hybrid_deliver(&net, &placement, &demand).unwrap();
    assert!(out.plan.coded.is_empty());
    assert_eq!(out.plan.loads, compute_loads(&net, &common::four_relays().plan.messages, &[]));
}

#[test]
fn t_sets_recount_on_shared_subsets() {
    // two relays with identical user sets split every piece in half
    let map = BTreeMap::from([(1, vec![1, 2, 3]), (2, vec![1, 2, 3])]);
    let net = RelayNetwork::general(&map).unwrap();
    let placement = combnet::placement::centralized_place(3, 3, 1).unwrap();
    let demand = worst_case(3);
    let plan = combnet::delivery::deliver(&net, &placement, &demand).unwrap();
    assert_eq!(plan.loads.relay, vec![q(1, 2), q(1, 2)]);
    let j = UserSet::from_ids([1, 2]);
    assert!(plan.messages.iter().filter(|m| m.users == j).all(|m| m.length == q(1, 6)));
}
