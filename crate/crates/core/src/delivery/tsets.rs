//! Subfile partition: routing every missing subfile to the relays that
//! reach the most users caching it.

use std::collections::HashMap;

use num_traits::Zero;
use serde::Serialize;

use super::bucket::Bucket;
use super::Demand;
use crate::error::{Error, Result};
use crate::placement::{CachePlacement, Segment};
use crate::rational::{binom, q, Q};
use crate::topology::RelayNetwork;
use crate::userset::{for_each_combination, UserSet};

/// `(relay, target user, known set)`.
pub type TSetKey = (usize, usize, UserSet);

/// All T-sets `T^h_{k,J'}`: what user `k` must recover through relay `h`,
/// already known by the users in `J'`.
#[derive(Clone, Debug, Default)]
pub struct TSetTable<B> {
    sets: HashMap<TSetKey, B>,
}

impl<B: Bucket> TSetTable<B> {
    pub fn get(&self, relay: usize, user: usize, known: UserSet) -> Option<&B> {
        self.sets.get(&(relay, user, known))
    }

    pub fn length(&self, relay: usize, user: usize, known: UserSet) -> Q {
        self.get(relay, user, known).map(|b| b.length()).unwrap_or_else(Q::zero)
    }

    pub fn entry(&mut self, relay: usize, user: usize, known: UserSet) -> &mut B {
        self.sets.entry((relay, user, known)).or_default()
    }

    pub fn remove(&mut self, relay: usize, user: usize, known: UserSet) -> B {
        self.sets.remove(&(relay, user, known)).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Non-empty T-sets sorted by key.
    pub fn sorted(&self) -> Vec<(TSetKey, &B)> {
        let mut v: Vec<_> = self
            .sets
            .iter()
            .filter(|(_, b)| !b.is_empty())
            .map(|(k, b)| (*k, b))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// User sets `J = J' ∪ {k}` of the non-empty T-sets at `relay`, ordered
    /// by size and then lexicographically.
    pub fn message_sets(&self, relay: usize) -> Vec<UserSet> {
        let mut js: Vec<UserSet> = self
            .sets
            .iter()
            .filter(|((h, _, _), b)| *h == relay && !b.is_empty())
            .map(|((_, k, known), _)| known.with(*k))
            .collect();
        js.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        js.dedup();
        js
    }
}

/// Where one piece of a missing subfile was routed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PieceRecord {
    pub user: usize,
    pub file: usize,
    pub subfile: UserSet,
    pub relay: usize,
    pub known: UserSet,
    pub length: Q,
}

#[derive(Clone, Debug, Default)]
pub struct Partition<B> {
    pub tsets: TSetTable<B>,
    pub pieces: Vec<PieceRecord>,
}

/// Supplies, per user, the subfiles of its demanded file that it misses,
/// as `(cache set W, segment)` in lexicographic order of `W`.
pub trait MissingSubfiles {
    fn for_each_missing(&self, user: usize, f: &mut dyn FnMut(UserSet, Segment));
}

/// Missing subfiles read off a placement, optionally restricted to cache
/// sets of one size.
pub struct FromPlacement<'a> {
    pub placement: &'a CachePlacement,
    pub demand: &'a Demand,
    pub group: Option<usize>,
}

impl MissingSubfiles for FromPlacement<'_> {
    fn for_each_missing(&self, user: usize, f: &mut dyn FnMut(UserSet, Segment)) {
        let file = self.demand.file_of(user);
        let mut subs: Vec<_> = self
            .placement
            .missing_subfiles(user, file)
            .filter(|s| self.group.is_none_or(|g| s.cache_set.len() == g))
            .collect();
        subs.sort_by(|a, b| a.cache_set.cmp(&b.cache_set).then(a.segment.lo.cmp(&b.segment.lo)));
        for s in subs {
            f(s.cache_set, s.segment.clone());
        }
    }
}

/// Centralized `t`-placement enumerated on the fly, without building the
/// subfile table. Used by load-only sweeps.
pub struct CentralizedMissing<'a> {
    pub num_users: usize,
    pub t: usize,
    pub demand: &'a Demand,
}

impl MissingSubfiles for CentralizedMissing<'_> {
    fn for_each_missing(&self, user: usize, f: &mut dyn FnMut(UserSet, Segment)) {
        let count = binom(self.num_users as i64, self.t as i64);
        let file = self.demand.file_of(user);
        let mut j = 0i128;
        for_each_combination(self.num_users, self.t, |idx| {
            if !idx.contains(&(user - 1)) {
                let w = UserSet::from_ids(idx.iter().map(|i| i + 1));
                f(w, Segment::new(file, q(j, count), q(j + 1, count)));
            }
            j += 1;
        });
    }
}

/// Relays of `H_k` reaching the largest number of users of `W`.
pub fn best_relays(network: &RelayNetwork, user: usize, cache_set: UserSet) -> Vec<usize> {
    let relays = network.relays_of(user);
    let overlap = |h: usize| network.users_of(h).intersect(cache_set).len();
    let best = relays.iter().map(overlap).max().unwrap_or(0);
    relays.iter().filter(|&h| overlap(h) == best).collect()
}

/// Splits each missing subfile `F_{d_k,W}` into `|S_{k,W}|` equal pieces and
/// appends the piece for relay `h` to `T^h_{k, W ∩ U_h}`. Users ascend, `W`
/// follows the source order, relays ascend.
pub fn partition_subfiles<B: Bucket>(
    network: &RelayNetwork,
    source: &dyn MissingSubfiles,
    record: bool,
) -> Partition<B> {
    let mut part: Partition<B> = Partition { tsets: TSetTable::default(), pieces: Vec::new() };
    for user in network.users() {
        source.for_each_missing(user, &mut |w, seg| {
            let relays = best_relays(network, user, w);
            for (&h, piece) in relays.iter().zip(seg.split_equal(relays.len())) {
                let known = w.intersect(network.users_of(h));
                if record {
                    part.pieces.push(PieceRecord {
                        user,
                        file: piece.file,
                        subfile: w,
                        relay: h,
                        known,
                        length: piece.len(),
                    });
                }
                part.tsets.entry(h, user, known).push(piece);
            }
        });
    }
    part
}

pub(crate) fn check_dimensions(
    network: &RelayNetwork,
    placement: &CachePlacement,
    demand: &Demand,
) -> Result<()> {
    if demand.len() != network.num_users() || placement.num_users() != network.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "network has {} users, placement {}, demand {}",
            network.num_users(),
            placement.num_users(),
            demand.len()
        )));
    }
    if let Some(bad) = demand.files().iter().find(|&&f| f == 0 || f > placement.num_files()) {
        return Err(Error::DimensionMismatch(format!(
            "demanded file {bad} outside 1..={}",
            placement.num_files()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::bucket::{SegmentList, Span};
    use crate::placement::centralized_place;

    #[test]
    fn argmax_relays() {
        let net = RelayNetwork::combination(4, 2).unwrap();
        assert_eq!(best_relays(&net, 1, UserSet::from_ids([2, 3])), vec![1]);
        assert_eq!(best_relays(&net, 1, UserSet::from_ids([2, 5])), vec![1, 2]);
        assert_eq!(best_relays(&net, 1, UserSet::EMPTY), vec![1, 2]);
    }

    #[test]
    fn lazy_source_matches_placement() {
        let net = RelayNetwork::combination(4, 2).unwrap();
        let demand = Demand::worst_case(6);
        let p = centralized_place(6, 6, 2).unwrap();
        let a: Partition<SegmentList> =
            partition_subfiles(&net, &FromPlacement { placement: &p, demand: &demand, group: None }, true);
        let b: Partition<Span> =
            partition_subfiles(&net, &CentralizedMissing { num_users: 6, t: 2, demand: &demand }, true);
        assert_eq!(a.pieces, b.pieces);
        for ((h, k, j), list) in a.tsets.sorted() {
            assert_eq!(list.length(), b.tsets.length(h, k, j));
        }
    }

    #[test]
    fn empty_cache_splits_over_all_relays() {
        let net = RelayNetwork::combination(4, 2).unwrap();
        let demand = Demand::worst_case(6);
        let part: Partition<Span> =
            partition_subfiles(&net, &CentralizedMissing { num_users: 6, t: 0, demand: &demand }, false);
        for k in net.users() {
            for h in net.relays_of(k).iter() {
                assert_eq!(part.tsets.length(h, k, UserSet::EMPTY), q(1, 2));
            }
        }
    }
}
