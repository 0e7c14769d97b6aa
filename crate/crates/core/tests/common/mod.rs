#![allow(dead_code)]

use combnet::delivery::{deliver, Demand, DeliveryPlan};
use combnet::placement::{centralized_place, CachePlacement, Segment};
use combnet::rational::q;
use combnet::userset::UserSet;
use combnet::topology::{example_asymmetric_map, example_symmetric_map, RelayNetwork};

pub struct Fixture {
    pub network: RelayNetwork,
    pub placement: CachePlacement,
    pub demand: Demand,
    pub plan: DeliveryPlan,
}

pub fn worst_case(k: usize) -> Demand {
    Demand::new((1..=k).collect(), k).unwrap()
}

fn centralized(network: RelayNetwork, t: usize) -> Fixture {
    let k = network.num_users();
    let placement = centralized_place(k, k, t).unwrap();
    let demand = worst_case(k);
    let plan = deliver(&network, &placement, &demand).unwrap();
    Fixture { network, placement, demand, plan }
}

/// H=4, r=2, N=K=6, M=2.
pub fn four_relays() -> Fixture {
    centralized(RelayNetwork::combination(4, 2).unwrap(), 2)
}

pub fn combination(h: usize, r: usize, t: usize) -> Fixture {
    centralized(RelayNetwork::combination(h, r).unwrap(), t)
}

/// Five relays, five users, each user on three relays; N=K=5, M=2.
pub fn symmetric_five() -> Fixture {
    centralized(RelayNetwork::general(&example_symmetric_map()).unwrap(), 2)
}

/// Like [`symmetric_five`] with relay 4 serving `{3,4,5}`.
pub fn asymmetric_five() -> Fixture {
    centralized(RelayNetwork::general(&example_asymmetric_map()).unwrap(), 2)
}

/// Position of `W` among the 2-subsets of `[6]` in lexicographic order.
fn index_of(w: [usize; 2]) -> i128 {
    let mut i = 0;
    for a in 1..=6 {
        for b in a + 1..=6 {
            if [a, b] == w {
                return i;
            }
            i += 1;
        }
    }
    unreachable!()
}

/// Whole subfile, or the first of its two halves.
fn piece(file: usize, w: [usize; 2], whole: bool) -> Segment {
    let lo = q(index_of(w), 15);
    let len = if whole { q(1, 15) } else { q(1, 30) };
    Segment::new(file, lo, lo + len)
}

/// The nine T-sets of relay 1 in [`four_relays`], as `(user, known, pieces)`.
pub fn relay_one_listing() -> Vec<(usize, UserSet, Vec<Segment>)> {
    let set = |ids: &[usize]| UserSet::from_ids(ids.iter().copied());
    vec![
        (1, set(&[2, 3]), vec![piece(1, [2, 3], true)]),
        (1, set(&[2]), vec![piece(1, [2, 4], false), piece(1, [2, 5], false), piece(1, [2, 6], true)]),
        (1, set(&[3]), vec![piece(1, [3, 4], false), piece(1, [3, 5], false), piece(1, [3, 6], true)]),
        (2, set(&[1, 3]), vec![piece(2, [1, 3], true)]),
        (2, set(&[1]), vec![piece(2, [1, 4], false), piece(2, [1, 5], true), piece(2, [1, 6], false)]),
        (2, set(&[3]), vec![piece(2, [3, 4], false), piece(2, [3, 5], true), piece(2, [3, 6], false)]),
        (3, set(&[1, 2]), vec![piece(3, [1, 2], true)]),
        (3, set(&[1]), vec![piece(3, [1, 4], true), piece(3, [1, 5], false), piece(3, [1, 6], false)]),
        (3, set(&[2]), vec![piece(3, [2, 4], true), piece(3, [2, 5], false), piece(3, [2, 6], false)]),
    ]
}

/// Message lengths `(relay, J, |W^h_J|)` of [`asymmetric_five`] before
/// rebalancing.
pub fn asymmetric_table() -> Vec<(usize, Vec<usize>, combnet::Q)> {
    vec![
        (1, vec![1, 2], q(3, 20)),
        (1, vec![1, 3], q(1, 30)),
        (1, vec![2, 3], q(1, 20)),
        (1, vec![1, 2, 3], q(1, 10)),
        (2, vec![1, 3], q(1, 30)),
        (2, vec![1, 4], q(1, 20)),
        (2, vec![3, 4], q(1, 20)),
        (2, vec![1, 3, 4], q(1, 10)),
        (3, vec![1, 4], q(1, 20)),
        (3, vec![1, 5], q(1, 12)),
        (3, vec![4, 5], q(1, 20)),
        (3, vec![1, 4, 5], q(1, 10)),
        (4, vec![3, 4], q(1, 20)),
        (4, vec![3, 5], q(1, 30)),
        (4, vec![4, 5], q(1, 20)),
        (4, vec![3, 4, 5], q(1, 10)),
        (5, vec![2, 3], q(1, 20)),
        (5, vec![2, 5], q(3, 20)),
        (5, vec![3, 5], q(1, 30)),
        (5, vec![2, 3, 5], q(1, 10)),
    ]
}
