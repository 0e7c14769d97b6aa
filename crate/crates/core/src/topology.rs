//! Server → relay → user topologies.
//!
//! A [`RelayNetwork`] stores both directions of the bipartite relay/user
//! incidence: `U_h` (users behind relay `h`) and `H_k` (relays reaching
//! user `k`). Relay and user ids are 1-based.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::binom;
use crate::userset::{for_each_combination, UserSet, MAX_ID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkKind {
    /// Every user is attached to a distinct `r`-subset of the relays.
    Combination { r: usize },
    General,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelayNetwork {
    num_relays: usize,
    num_users: usize,
    users_of_relay: Vec<UserSet>,
    relays_of_user: Vec<UserSet>,
    kind: NetworkKind,
}

impl RelayNetwork {
    /// Combination network with `C(H, r)` users; user `k` is attached to the
    /// `k`-th `r`-subset of `[1..H]` in lexicographic order.
    pub fn combination(num_relays: usize, r: usize) -> Result<Self> {
        if num_relays < 1 || r < 1 || r > num_relays {
            return Err(Error::ParameterDomain(format!(
                "combination network needs 1 <= r <= H, got H={num_relays}, r={r}"
            )));
        }
        if num_relays > MAX_ID {
            return Err(Error::ParameterDomain(format!("H={num_relays} exceeds {MAX_ID}")));
        }
        let k = binom(num_relays as i64, r as i64);
        if k > MAX_ID as i128 {
            return Err(Error::ParameterDomain(format!(
                "C({num_relays},{r})={k} users exceeds {MAX_ID}"
            )));
        }
        let mut relays_of_user = Vec::with_capacity(k as usize);
        for_each_combination(num_relays, r, |idx| {
            relays_of_user.push(UserSet::from_ids(idx.iter().map(|i| i + 1)));
        });
        let users_of_relay = transpose(&relays_of_user, num_relays);
        Ok(RelayNetwork {
            num_relays,
            num_users: relays_of_user.len(),
            users_of_relay,
            relays_of_user,
            kind: NetworkKind::Combination { r },
        })
    }

    /// Network given by explicit relay → user lists. User ids must cover
    /// `[1..K]` with every user attached to at least one relay.
    pub fn general(users_of_relay: &BTreeMap<usize, Vec<usize>>) -> Result<Self> {
        if users_of_relay.is_empty() {
            return Err(Error::Topology("no relays given".into()));
        }
        let num_relays = users_of_relay.len();
        let ids: Vec<usize> = users_of_relay.keys().copied().collect();
        if ids != (1..=num_relays).collect::<Vec<_>>() {
            return Err(Error::Topology(format!(
                "relay ids must be exactly 1..={num_relays}, got {ids:?}"
            )));
        }
        if num_relays > MAX_ID {
            return Err(Error::ParameterDomain(format!("H={num_relays} exceeds {MAX_ID}")));
        }
        let mut sets = Vec::with_capacity(num_relays);
        let mut num_users = 0;
        for (&relay, users) in users_of_relay {
            let mut set = UserSet::EMPTY;
            for &u in users {
                if u == 0 || u > MAX_ID {
                    return Err(Error::Topology(format!("user id {u} out of range 1..={MAX_ID}")));
                }
                if set.contains(u) {
                    return Err(Error::DuplicateUser { relay, user: u });
                }
                set.insert(u);
                num_users = num_users.max(u);
            }
            sets.push(set);
        }
        if num_users == 0 {
            return Err(Error::Topology("no users attached".into()));
        }
        let relays_of_user = transpose(&sets, num_users);
        if let Some(orphan) = relays_of_user.iter().position(|s| s.is_empty()) {
            return Err(Error::OrphanUser(orphan + 1));
        }
        Ok(RelayNetwork {
            num_relays,
            num_users,
            users_of_relay: sets,
            relays_of_user,
            kind: NetworkKind::General,
        })
    }

    pub fn num_relays(&self) -> usize {
        self.num_relays
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    /// `r` for combination networks.
    pub fn relay_degree(&self) -> Option<usize> {
        match self.kind {
            NetworkKind::Combination { r } => Some(r),
            NetworkKind::General => None,
        }
    }

    /// `U_h`.
    pub fn users_of(&self, relay: usize) -> UserSet {
        self.users_of_relay[relay - 1]
    }

    /// `H_k`.
    pub fn relays_of(&self, user: usize) -> UserSet {
        self.relays_of_user[user - 1]
    }

    pub fn relays(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.num_relays
    }

    pub fn users(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.num_users
    }

    pub fn all_users(&self) -> UserSet {
        UserSet::from_ids(self.users())
    }

    /// `true` when every relay has the same number of users and every user
    /// the same number of relays.
    pub fn is_symmetric(&self) -> bool {
        let du = self.users_of_relay[0].len();
        let dr = self.relays_of_user[0].len();
        self.users_of_relay.iter().all(|s| s.len() == du)
            && self.relays_of_user.iter().all(|s| s.len() == dr)
    }

    /// Relay → user lists, suitable for [`RelayNetwork::general`].
    pub fn to_map(&self) -> BTreeMap<usize, Vec<usize>> {
        self.relays()
            .map(|h| (h, self.users_of(h).to_vec()))
            .collect()
    }

    /// Checks the structural invariants; constructors already guarantee
    /// them, this exists for tests and for deserialized inputs.
    pub fn validate(&self) -> Result<()> {
        if self.users_of_relay.len() != self.num_relays || self.relays_of_user.len() != self.num_users {
            return Err(Error::Topology("size mismatch".into()));
        }
        if transpose(&self.relays_of_user, self.num_relays) != self.users_of_relay {
            return Err(Error::Topology("relay and user maps are not transposes".into()));
        }
        if let Some(orphan) = self.relays_of_user.iter().position(|s| s.is_empty()) {
            return Err(Error::OrphanUser(orphan + 1));
        }
        let all = self.all_users();
        if self.users_of_relay.iter().any(|s| !s.is_subset_of(all)) {
            return Err(Error::Topology("user id outside 1..=K".into()));
        }
        if let NetworkKind::Combination { r } = self.kind {
            let h = self.num_relays as i64;
            if self.num_users as i128 != binom(h, r as i64) {
                return Err(Error::Topology("K != C(H, r)".into()));
            }
            let degree = binom(h - 1, r as i64 - 1) as usize;
            if self.users_of_relay.iter().any(|s| s.len() != degree) {
                return Err(Error::Topology("relay degree != C(H-1, r-1)".into()));
            }
            let mut seen: Vec<UserSet> = self.relays_of_user.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.num_users || self.relays_of_user.iter().any(|s| s.len() != r) {
                return Err(Error::Topology("user relay sets are not distinct r-subsets".into()));
            }
        }
        Ok(())
    }
}

fn transpose(sets: &[UserSet], width: usize) -> Vec<UserSet> {
    let mut out = vec![UserSet::EMPTY; width];
    for (i, s) in sets.iter().enumerate() {
        for j in s.iter() {
            if j <= width {
                out[j - 1].insert(i + 1);
            }
        }
    }
    out
}

/// Relay lists of the symmetric five-relay example network.
pub fn example_symmetric_map() -> BTreeMap<usize, Vec<usize>> {
    BTreeMap::from([
        (1, vec![1, 2, 3]),
        (2, vec![1, 3, 4]),
        (3, vec![1, 4, 5]),
        (4, vec![2, 4, 5]),
        (5, vec![2, 3, 5]),
    ])
}

/// Same as [`example_symmetric_map`] with relay 4 re-attached to `{3,4,5}`.
pub fn example_asymmetric_map() -> BTreeMap<usize, Vec<usize>> {
    let mut m = example_symmetric_map();
    m.insert(4, vec![3, 4, 5]);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_relay_pairs() {
        let net = RelayNetwork::combination(4, 2).unwrap();
        assert_eq!(net.num_users(), 6);
        assert_eq!(net.users_of(1).to_vec(), vec![1, 2, 3]);
        assert_eq!(net.users_of(2).to_vec(), vec![1, 4, 5]);
        assert_eq!(net.relays_of(1).to_vec(), vec![1, 2]);
        assert_eq!(net.relays_of(6).to_vec(), vec![3, 4]);
        net.validate().unwrap();
    }

    #[test]
    fn degenerate_and_larger_combinations() {
        let net = RelayNetwork::combination(2, 2).unwrap();
        assert_eq!(net.num_users(), 1);
        assert_eq!(net.users_of(1).to_vec(), vec![1]);
        assert_eq!(net.users_of(2).to_vec(), vec![1]);

        let net = RelayNetwork::combination(6, 3).unwrap();
        assert_eq!(net.num_users(), 20);
        // incidence count by brute force over all 3-subsets
        for h in 1..=6 {
            let mut count = 0;
            for a in 1..=6 {
                for b in a + 1..=6 {
                    for c in b + 1..=6 {
                        if [a, b, c].contains(&h) {
                            count += 1;
                        }
                    }
                }
            }
            assert_eq!(net.users_of(h).len(), count);
            assert_eq!(count, 10);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(RelayNetwork::combination(3, 4), Err(Error::ParameterDomain(_))));
        assert!(matches!(RelayNetwork::combination(0, 1), Err(Error::ParameterDomain(_))));
        assert!(matches!(RelayNetwork::combination(3, 0), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn general_examples() {
        let net = RelayNetwork::general(&example_symmetric_map()).unwrap();
        assert_eq!(net.relays_of(1).to_vec(), vec![1, 2, 3]);
        assert!(net.users().all(|k| net.relays_of(k).len() == 3));
        assert!(net.is_symmetric());

        let net = RelayNetwork::general(&example_asymmetric_map()).unwrap();
        assert_eq!(net.relays_of(2).len(), 2);
        assert_eq!(net.relays_of(3).len(), 4);
        assert!(!net.is_symmetric());

        let shared = RelayNetwork::general(&BTreeMap::from([(1, (1..=5).collect())])).unwrap();
        assert!(shared.users().all(|k| shared.relays_of(k).to_vec() == vec![1]));
    }

    #[test]
    fn general_errors() {
        let orphan = BTreeMap::from([(1, vec![1, 3]), (2, vec![3])]);
        assert_eq!(RelayNetwork::general(&orphan), Err(Error::OrphanUser(2)));
        let dup = BTreeMap::from([(1, vec![1, 1])]);
        assert_eq!(
            RelayNetwork::general(&dup),
            Err(Error::DuplicateUser { relay: 1, user: 1 })
        );
        assert!(RelayNetwork::general(&BTreeMap::new()).is_err());
        let gap = BTreeMap::from([(1, vec![1]), (3, vec![1])]);
        assert!(RelayNetwork::general(&gap).is_err());
    }

    proptest! {
        #[test]
        fn combination_invariants(h in 2usize..8, r in 1usize..8) {
            prop_assume!(r <= h);
            let net = RelayNetwork::combination(h, r).unwrap();
            net.validate().unwrap();
            let total: usize = net.relays().map(|x| net.users_of(x).len()).sum();
            prop_assert_eq!(total, r * net.num_users());
            let again = RelayNetwork::combination(h, r).unwrap();
            prop_assert_eq!(&net, &again);
            let rebuilt = RelayNetwork::general(&net.to_map()).unwrap();
            prop_assert_eq!(rebuilt.to_map(), net.to_map());
        }
    }
}
