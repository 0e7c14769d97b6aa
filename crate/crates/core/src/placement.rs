//! Cache placement: centralized (one subfile per `t`-set of users),
//! decentralized (random bits, grouped by the exact set of users caching
//! them) and the hybrid relay + user placement.
//!
//! Files have normalized length 1. A subfile occupies a half-open interval
//! `[lo, hi)` of its file. For the decentralized placement the interval
//! coordinates refer to the file's bits regrouped by cache set, which keeps
//! every subfile contiguous.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{binom, fmt_q, parse_q, q, qi, Q};
use crate::topology::RelayNetwork;
use crate::userset::{for_each_combination, UserSet};

/// A contiguous range of one file.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Segment {
    pub file: usize,
    pub lo: Q,
    pub hi: Q,
    /// Marks the relay-coded region of a hybrid placement.
    pub coded: bool,
}

impl Segment {
    pub fn new(file: usize, lo: Q, hi: Q) -> Self {
        debug_assert!(lo < hi, "empty segment [{lo}, {hi})");
        Segment { file, lo, hi, coded: false }
    }

    pub fn len(&self) -> Q {
        self.hi - self.lo
    }

    /// Splits into `parts` consecutive pieces of equal length.
    pub fn split_equal(&self, parts: usize) -> Vec<Segment> {
        let step = self.len() / qi(parts as i128);
        (0..parts)
            .map(|i| {
                let lo = self.lo + step * qi(i as i128);
                let hi = if i + 1 == parts { self.hi } else { lo + step };
                Segment { file: self.file, lo, hi, coded: self.coded }
            })
            .collect()
    }

    /// Cuts `len` off the front; returns `(head, tail)`.
    pub fn split_at(&self, len: Q) -> (Segment, Option<Segment>) {
        if len >= self.len() {
            return (self.clone(), None);
        }
        let mid = self.lo + len;
        (
            Segment { hi: mid, ..self.clone() },
            Some(Segment { lo: mid, ..self.clone() }),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubfileIndex {
    pub file: usize,
    /// Users that cache this subfile (`W`).
    pub cache_set: UserSet,
    pub segment: Segment,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlacementKind {
    Centralized { t: usize },
    Decentralized { memory: Q, seed: u64, bits: u64 },
    Hybrid { relay_memory: Q, user_memory: Q, t3: usize, t4: usize, seed: u64 },
}

/// Relay-side coded content of a hybrid placement. Every relay stores
/// `units_per_file` MDS-coded units of the region `[0, region)` of each
/// file; any `region` worth of distinct units reconstructs that region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelayCache {
    pub region: Q,
    pub units_per_file: Q,
}

/// Uniformly random plain bits of the coded region cached by each user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlainSample {
    pub region: Q,
    pub per_file: Q,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CachePlacement {
    kind: PlacementKind,
    num_users: usize,
    num_files: usize,
    /// Per file, sorted by `lo`, covering `[0, 1)`.
    subfiles: Vec<Vec<SubfileIndex>>,
    relay_cache: Option<RelayCache>,
    plain: Option<PlainSample>,
}

impl CachePlacement {
    pub fn kind(&self) -> &PlacementKind {
        &self.kind
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn relay_cache(&self) -> Option<&RelayCache> {
        self.relay_cache.as_ref()
    }

    pub fn plain_sample(&self) -> Option<&PlainSample> {
        self.plain.as_ref()
    }

    /// Subfile table of one file.
    pub fn subfiles(&self, file: usize) -> &[SubfileIndex] {
        &self.subfiles[file - 1]
    }

    pub fn all_subfiles(&self) -> impl Iterator<Item = &SubfileIndex> {
        self.subfiles.iter().flatten()
    }

    /// `Z_k`: every plain subfile user `k` stores.
    pub fn user_cache(&self, user: usize) -> impl Iterator<Item = &SubfileIndex> {
        self.all_subfiles()
            .filter(move |s| !s.segment.coded && s.cache_set.contains(user))
    }

    /// Normalized cache usage of `user`, counting plain samples of the coded
    /// region.
    pub fn cache_size(&self, user: usize) -> Q {
        let mut total: Q = self.user_cache(user).map(|s| s.segment.len()).sum();
        if let Some(p) = &self.plain {
            total += p.per_file * qi(self.num_files as i128);
        }
        total
    }

    /// Subfiles of `file` that `user` does not cache (excluding the coded
    /// region).
    pub fn missing_subfiles(&self, user: usize, file: usize) -> impl Iterator<Item = &SubfileIndex> {
        self.subfiles(file)
            .iter()
            .filter(move |s| !s.segment.coded && !s.cache_set.contains(user))
    }

    /// `true` when `user` stores every bit of `[lo, hi)` of `file` in plain
    /// form.
    pub fn is_cached(&self, user: usize, file: usize, lo: &Q, hi: &Q) -> bool {
        if file == 0 || file > self.num_files || lo >= hi {
            return lo >= hi;
        }
        let subs = self.subfiles(file);
        let mut i = subs.partition_point(|s| s.segment.hi <= *lo);
        let mut pos = lo.clone();
        while pos < *hi {
            let Some(s) = subs.get(i) else { return false };
            if s.segment.coded || !s.cache_set.contains(user) || s.segment.lo > pos {
                return false;
            }
            pos = s.segment.hi;
            i += 1;
        }
        true
    }

    /// Checks that each file's subfiles are disjoint and cover `[0, 1)`.
    pub fn check_partition(&self) -> Result<()> {
        for (i, subs) in self.subfiles.iter().enumerate() {
            let mut pos = Q::zero();
            for s in subs {
                if s.file != i + 1 || s.segment.file != i + 1 {
                    return Err(Error::InconsistentPlan(format!("subfile filed under wrong file {}", i + 1)));
                }
                if s.segment.lo != pos || s.segment.hi <= s.segment.lo {
                    return Err(Error::InconsistentPlan(format!(
                        "file {} subfiles not contiguous at {}",
                        i + 1,
                        pos
                    )));
                }
                pos = s.segment.hi;
            }
            if pos != Q::one() {
                return Err(Error::InconsistentPlan(format!("file {} covers only [0,{pos})", i + 1)));
            }
        }
        Ok(())
    }

    pub fn to_dump(&self) -> PlacementDump {
        let seg = |s: &SubfileIndex| DumpSubfile {
            file: s.file,
            cache_set: s.cache_set.to_vec(),
            lo: fmt_q(&s.segment.lo),
            hi: fmt_q(&s.segment.hi),
            coded: s.segment.coded,
        };
        PlacementDump {
            num_users: self.num_users,
            num_files: self.num_files,
            users: (1..=self.num_users)
                .map(|k| DumpUser { user: k, segments: self.user_cache(k).map(seg).collect() })
                .collect(),
            subfiles: self.all_subfiles().map(seg).collect(),
        }
    }

    /// Rebuilds a segment-only placement from a dump. Relay caches and
    /// plain samples are not part of the dump.
    pub fn from_dump(dump: &PlacementDump) -> Result<Self> {
        let mut subfiles = vec![Vec::new(); dump.num_files];
        for s in &dump.subfiles {
            if s.file == 0 || s.file > dump.num_files {
                return Err(Error::Parse(format!("file id {} out of range", s.file)));
            }
            if s.cache_set.iter().any(|&u| u == 0 || u > dump.num_users) {
                return Err(Error::Parse(format!("cache set {:?} out of range", s.cache_set)));
            }
            let (lo, hi) = (parse_q(&s.lo)?, parse_q(&s.hi)?);
            if lo >= hi {
                return Err(Error::Parse(format!("empty subfile [{lo},{hi})")));
            }
            subfiles[s.file - 1].push(SubfileIndex {
                file: s.file,
                cache_set: UserSet::from_ids(s.cache_set.iter().copied()),
                segment: Segment { file: s.file, lo, hi, coded: s.coded },
            });
        }
        for subs in &mut subfiles {
            subs.sort_by(|a, b| a.segment.lo.cmp(&b.segment.lo));
        }
        let p = CachePlacement {
            kind: PlacementKind::Centralized { t: 0 },
            num_users: dump.num_users,
            num_files: dump.num_files,
            subfiles,
            relay_cache: None,
            plain: None,
        };
        p.check_partition()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpSubfile {
    pub file: usize,
    pub cache_set: Vec<usize>,
    pub lo: String,
    pub hi: String,
    #[serde(default)]
    pub coded: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpUser {
    pub user: usize,
    pub segments: Vec<DumpSubfile>,
}

/// Debug dump of a placement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementDump {
    pub num_users: usize,
    pub num_files: usize,
    pub users: Vec<DumpUser>,
    pub subfiles: Vec<DumpSubfile>,
}

fn check_files(num_users: usize, num_files: usize) -> Result<()> {
    if num_users == 0 {
        return Err(Error::ParameterDomain("K must be positive".into()));
    }
    if num_files < num_users {
        return Err(Error::ParameterDomain(format!(
            "N={num_files} < K={num_users} is not supported"
        )));
    }
    Ok(())
}

/// Splits `[start, start+span)` of every file into `C(K, t)` equal subfiles,
/// subfile `W` cached by the users in `W`.
fn t_subfiles(num_users: usize, num_files: usize, t: usize, start: Q, span: Q) -> Vec<Vec<SubfileIndex>> {
    let count = binom(num_users as i64, t as i64);
    let step = span / qi(count);
    let mut sets = Vec::with_capacity(count as usize);
    for_each_combination(num_users, t, |idx| {
        sets.push(UserSet::from_ids(idx.iter().map(|i| i + 1)));
    });
    (1..=num_files)
        .map(|file| {
            sets.iter()
                .enumerate()
                .map(|(j, &w)| {
                    let lo = start + step * qi(j as i128);
                    let hi = if j + 1 == sets.len() { start + span } else { lo + step };
                    SubfileIndex { file, cache_set: w, segment: Segment::new(file, lo, hi) }
                })
                .collect()
        })
        .collect()
}

/// Centralized placement with parameter `t = K·M/N`.
pub fn centralized_place(num_users: usize, num_files: usize, t: usize) -> Result<CachePlacement> {
    check_files(num_users, num_files)?;
    if t > num_users {
        return Err(Error::ParameterDomain(format!("t={t} outside [0, {num_users}]")));
    }
    Ok(CachePlacement {
        kind: PlacementKind::Centralized { t },
        num_users,
        num_files,
        subfiles: t_subfiles(num_users, num_files, t, Q::zero(), Q::one()),
        relay_cache: None,
        plain: None,
    })
}

/// Decentralized placement at concrete file length `bits`: every user
/// independently caches `floor(M·bits/N)` uniformly random bits of every
/// file. Bits cached by exactly the users in `W` form subfile `W`;
/// subfiles are laid out by `(|W|, W)`.
pub fn decentralized_place(
    num_users: usize,
    num_files: usize,
    memory: Q,
    seed: u64,
    bits: u64,
) -> Result<CachePlacement> {
    check_files(num_users, num_files)?;
    if memory < Q::zero() || memory > qi(num_files as i128) {
        return Err(Error::ParameterDomain(format!("M={memory} outside [0, {num_files}]")));
    }
    if bits == 0 {
        return Err(Error::ParameterDomain("concrete file length must be positive".into()));
    }
    let per_file = (memory * qi(bits as i128) / qi(num_files as i128)).floor().to_integer() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subfiles = Vec::with_capacity(num_files);
    let mut masks = vec![0u128; bits as usize];
    for file in 1..=num_files {
        masks.iter_mut().for_each(|m| *m = 0);
        for user in 0..num_users {
            for b in sample(&mut rng, bits as usize, per_file) {
                masks[b] |= 1u128 << user;
            }
        }
        let mut counts: BTreeMap<(usize, UserSet), u64> = BTreeMap::new();
        for &m in &masks {
            let w = UserSet::from_bits(m);
            *counts.entry((w.len(), w)).or_default() += 1;
        }
        let mut pos = 0u64;
        let list = counts
            .into_iter()
            .map(|((_, w), n)| {
                let seg = Segment::new(file, q(pos as i128, bits as i128), q((pos + n) as i128, bits as i128));
                pos += n;
                SubfileIndex { file, cache_set: w, segment: seg }
            })
            .collect();
        subfiles.push(list);
    }
    Ok(CachePlacement {
        kind: PlacementKind::Decentralized { memory, seed, bits },
        num_users,
        num_files,
        subfiles,
        relay_cache: None,
        plain: None,
    })
}

/// Hybrid placement on a combination network. The first
/// `min(r·M1/N, 1)` of every file is cached at the relays as coded units;
/// each user keeps `t3/K` of that region as random plain bits and applies
/// the centralized `t4` placement to the rest of the file.
///
/// `user_memory`, when given, is a budget the resulting user cache usage
/// must not exceed.
pub fn hybrid_place(
    network: &RelayNetwork,
    num_files: usize,
    relay_memory: Q,
    t3: usize,
    t4: usize,
    user_memory: Option<Q>,
    seed: u64,
) -> Result<CachePlacement> {
    let r = network.relay_degree().ok_or_else(|| {
        Error::ParameterDomain("hybrid placement needs a combination network".into())
    })?;
    let k = network.num_users();
    check_files(k, num_files)?;
    let n = qi(num_files as i128);
    if relay_memory < Q::zero() || relay_memory > n {
        return Err(Error::ParameterDomain(format!("M1={relay_memory} outside [0, {num_files}]")));
    }
    if t3 > k || t4 > k {
        return Err(Error::ParameterDomain(format!("t3={t3}, t4={t4} must lie in [0, {k}]")));
    }
    let region = (qi(r as i128) * relay_memory / n).min(Q::one());
    let rest = Q::one() - region;
    let usage = n * (qi(t3 as i128) * region + qi(t4 as i128) * rest) / qi(k as i128);
    if usage > n {
        return Err(Error::ParameterDomain(format!("user cache usage {usage} exceeds N")));
    }
    if let Some(budget) = user_memory {
        if usage > budget {
            return Err(Error::ParameterDomain(format!(
                "user cache usage {usage} exceeds budget M2={budget}"
            )));
        }
    }
    let mut subfiles = if rest.is_zero() {
        vec![Vec::new(); num_files]
    } else {
        t_subfiles(k, num_files, t4, region, rest)
    };
    if !region.is_zero() {
        for (i, subs) in subfiles.iter_mut().enumerate() {
            let file = i + 1;
            let mut seg = Segment::new(file, Q::zero(), region);
            seg.coded = true;
            subs.insert(0, SubfileIndex { file, cache_set: UserSet::EMPTY, segment: seg });
        }
    }
    let (relay_cache, plain) = if region.is_zero() {
        (None, None)
    } else {
        (
            Some(RelayCache { region, units_per_file: region / qi(r as i128) }),
            (t3 > 0).then(|| PlainSample {
                region,
                per_file: qi(t3 as i128) * region / qi(k as i128),
                seed,
            }),
        )
    };
    Ok(CachePlacement {
        kind: PlacementKind::Hybrid { relay_memory, user_memory: usage, t3, t4, seed },
        num_users: k,
        num_files,
        subfiles,
        relay_cache,
        plain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centralized_six_users() {
        let p = centralized_place(6, 6, 2).unwrap();
        assert_eq!(p.subfiles(1).len(), 15);
        assert!(p.subfiles(1).iter().all(|s| s.segment.len() == q(1, 15)));
        assert_eq!(p.user_cache(1).filter(|s| s.file == 1).count(), 5);
        assert_eq!(p.cache_size(1), qi(2));
        p.check_partition().unwrap();
        // lexicographic layout: {2,4} is the seventh pair
        let s = &p.subfiles(1)[6];
        assert_eq!(s.cache_set.to_vec(), vec![2, 4]);
        assert_eq!(s.segment.lo, q(6, 15));
    }

    #[test]
    fn centralized_extremes() {
        let empty = centralized_place(6, 6, 0).unwrap();
        assert_eq!(empty.subfiles(3).len(), 1);
        assert_eq!(empty.user_cache(2).count(), 0);
        let full = centralized_place(6, 6, 6).unwrap();
        assert!((1..=6).all(|f| full.is_cached(4, f, &Q::zero(), &Q::one())));
        assert_eq!(full.cache_size(4), qi(6));
    }

    #[test]
    fn centralized_errors() {
        assert!(matches!(centralized_place(6, 6, 7), Err(Error::ParameterDomain(_))));
        assert!(matches!(centralized_place(6, 5, 2), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn decentralized_extremes_and_determinism() {
        let none = decentralized_place(4, 4, qi(0), 1, 100).unwrap();
        assert!(none.all_subfiles().all(|s| s.cache_set.is_empty()));
        let all = decentralized_place(4, 4, qi(4), 1, 100).unwrap();
        assert!(all.all_subfiles().all(|s| s.cache_set.len() == 4));
        let a = decentralized_place(5, 6, q(3, 2), 9, 500).unwrap();
        let b = decentralized_place(5, 6, q(3, 2), 9, 500).unwrap();
        assert_eq!(a, b);
        a.check_partition().unwrap();
        // floor(1.5 * 500 / 6) = 125 bits per file per user
        assert_eq!(a.cache_size(3), q(125 * 6, 500));
        assert!(decentralized_place(4, 4, qi(5), 1, 10).is_err());
    }

    #[test]
    fn hybrid_regions() {
        let net = RelayNetwork::combination(4, 2).unwrap();
        let p = hybrid_place(&net, 6, qi(1), 1, 2, Some(qi(2)), 3).unwrap();
        let rc = p.relay_cache().unwrap();
        assert_eq!(rc.region, q(1, 3));
        assert_eq!(rc.units_per_file, q(1, 6));
        assert_eq!(p.subfiles(1).len(), 16);
        p.check_partition().unwrap();
        assert_eq!(p.cache_size(1), q(5, 3));
        match p.kind() {
            PlacementKind::Hybrid { user_memory, .. } => assert_eq!(*user_memory, q(5, 3)),
            _ => unreachable!(),
        }

        let relay_only = hybrid_place(&net, 6, qi(3), 0, 0, None, 3).unwrap();
        assert!(relay_only.all_subfiles().all(|s| s.segment.coded));
        assert!(hybrid_place(&net, 6, qi(1), 1, 2, Some(qi(1)), 3).is_err());
    }

    #[test]
    fn hybrid_without_relay_memory_is_centralized() {
        let net = RelayNetwork::combination(4, 2).unwrap();
        let h = hybrid_place(&net, 6, qi(0), 3, 2, None, 1).unwrap();
        let c = centralized_place(6, 6, 2).unwrap();
        assert!(h.relay_cache().is_none() && h.plain_sample().is_none());
        assert_eq!(h.subfiles, c.subfiles);
        assert_eq!(h.to_dump(), c.to_dump());
    }

    #[test]
    fn dump_round_trip() {
        let p = centralized_place(4, 4, 1).unwrap();
        let back = CachePlacement::from_dump(&p.to_dump()).unwrap();
        assert_eq!(back.subfiles, p.subfiles);
    }

    proptest! {
        #[test]
        fn centralized_partition_and_budget(k in 1usize..8, extra in 0usize..3, t in 0usize..8) {
            prop_assume!(t <= k);
            let n = k + extra;
            let p = centralized_place(k, n, t).unwrap();
            p.check_partition().unwrap();
            for user in 1..=k {
                prop_assert_eq!(p.cache_size(user), q((n * t) as i128, k as i128));
            }
        }

        #[test]
        fn decentralized_partition(seed in 0u64..1000, k in 1usize..6, m in 0i128..6) {
            prop_assume!(m <= k as i128);
            let p = decentralized_place(k, k, qi(m), seed, 64).unwrap();
            p.check_partition().unwrap();
        }
    }
}
