//! Symbolic decodability check.
//!
//! All intervals referenced by the placement and the plan are refined into
//! per-file atoms such that every aligned position range of every message
//! covers whole atoms. Each such range is then one GF(2) equation over atom
//! symbols, and a user decodes its file iff every missing atom of it lies in
//! the span of its received equations once cached atoms are eliminated.

use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::delivery::{Bucket, Demand, DeliveryPlan, Message, SegmentList};
use crate::error::{Error, Result};
use crate::placement::CachePlacement;
use crate::rational::{fmt_q, to_f64, Q};
use crate::topology::RelayNetwork;
use crate::userset::UserSet;

const MAX_REFINEMENT_PASSES: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AtomRef {
    pub file: usize,
    pub lo: String,
    pub hi: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserReport {
    pub user: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_atom: Option<AtomRef>,
    pub decoded_fraction: f64,
    #[serde(skip)]
    pub decoded: Q,
}

struct Atom {
    file: usize,
    lo: Q,
    hi: Q,
    cache_set: UserSet,
    coded: bool,
}

/// Atoms plus one equation list per message.
pub struct AtomSpace {
    atoms: Vec<Atom>,
    /// Per file (index `file − 1`): atom start points and the id of the
    /// first atom.
    starts: Vec<(Vec<Q>, usize)>,
    /// Per message: equations as sorted atom-id lists.
    equations: Vec<Vec<Vec<u32>>>,
}

/// `(message position, segment)` layout of one operand.
fn layout(data: &SegmentList) -> Vec<(Q, &crate::placement::Segment)> {
    let mut pos = Q::zero();
    data.segments()
        .iter()
        .map(|s| {
            let at = pos;
            pos += s.len();
            (at, s)
        })
        .collect()
}

fn check_message(m: &Message<SegmentList>, num_files: usize) -> Result<()> {
    for o in &m.operands {
        if o.data.length() > m.length {
            return Err(Error::InconsistentPlan(format!(
                "operand of user {} longer than message at relay {}",
                o.user, m.relay
            )));
        }
        for s in o.data.segments() {
            if s.file == 0 || s.file > num_files || s.lo < Q::zero() || s.hi > Q::one() || s.lo >= s.hi {
                return Err(Error::InconsistentPlan(format!(
                    "segment [{}, {}) of file {} is not part of any file",
                    s.lo, s.hi, s.file
                )));
            }
        }
    }
    Ok(())
}

impl AtomSpace {
    pub fn build(placement: &CachePlacement, messages: &[Message<SegmentList>]) -> Result<Self> {
        let num_files = placement.num_files();
        for m in messages {
            check_message(m, num_files)?;
        }
        let mut points: Vec<BTreeSet<Q>> = vec![BTreeSet::new(); num_files];
        for s in placement.all_subfiles() {
            points[s.file - 1].insert(s.segment.lo);
            points[s.file - 1].insert(s.segment.hi);
        }
        for m in messages {
            for o in &m.operands {
                for s in o.data.segments() {
                    points[s.file - 1].insert(s.lo);
                    points[s.file - 1].insert(s.hi);
                }
            }
        }
        let layouts: Vec<Vec<Vec<(Q, &crate::placement::Segment)>>> = messages
            .iter()
            .map(|m| m.operands.iter().map(|o| layout(&o.data)).collect())
            .collect();

        // refine until each message cut maps onto file breakpoints
        let mut cuts_per_message: Vec<BTreeSet<Q>> = vec![BTreeSet::new(); messages.len()];
        let mut converged = false;
        for _ in 0..MAX_REFINEMENT_PASSES {
            let mut changed = false;
            for (mi, m) in messages.iter().enumerate() {
                let cuts = &mut cuts_per_message[mi];
                cuts.insert(Q::zero());
                cuts.insert(m.length);
                for lay in &layouts[mi] {
                    for (at, s) in lay {
                        cuts.insert(*at);
                        cuts.insert(at + s.len());
                        for b in points[s.file - 1].range(s.lo..s.hi) {
                            cuts.insert(at + (b - s.lo));
                        }
                    }
                }
                for lay in &layouts[mi] {
                    for (at, s) in lay {
                        let end = at + s.len();
                        for c in cuts.range(*at..end) {
                            if points[s.file - 1].insert(s.lo + (c - at)) {
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::InconsistentPlan("atom refinement did not converge".into()));
        }

        let mut atoms = Vec::new();
        let mut starts = Vec::with_capacity(num_files);
        for (i, pts) in points.iter().enumerate() {
            let file = i + 1;
            let first = atoms.len();
            let pts: Vec<Q> = pts.iter().copied().collect();
            let subs = placement.subfiles(file);
            let mut si = 0;
            let mut file_starts = Vec::new();
            for w in pts.windows(2) {
                while si < subs.len() && subs[si].segment.hi <= w[0] {
                    si += 1;
                }
                let (cache_set, coded) = subs
                    .get(si)
                    .filter(|s| s.segment.lo <= w[0])
                    .map(|s| (s.cache_set, s.segment.coded))
                    .unwrap_or((UserSet::EMPTY, false));
                file_starts.push(w[0]);
                atoms.push(Atom { file, lo: w[0], hi: w[1], cache_set, coded });
            }
            starts.push((file_starts, first));
        }

        let mut space = AtomSpace { atoms, starts, equations: Vec::new() };
        let mut equations = Vec::with_capacity(messages.len());
        for (mi, lays) in layouts.iter().enumerate() {
            let cuts: Vec<Q> = cuts_per_message[mi].iter().copied().collect();
            let mut rows = Vec::new();
            for w in cuts.windows(2) {
                let (c, next) = (w[0], w[1]);
                let mut row: Vec<u32> = Vec::new();
                for lay in lays {
                    let idx = lay.partition_point(|(at, s)| at + s.len() <= c);
                    let Some((at, s)) = lay.get(idx) else { continue };
                    if *at > c {
                        continue;
                    }
                    let lo = s.lo + (c - at);
                    let id = space
                        .atom_at(s.file, &lo)
                        .ok_or_else(|| Error::InconsistentPlan("unaligned atom".into()))?;
                    debug_assert_eq!(space.atoms[id as usize].hi - lo, next - c);
                    row.push(id);
                }
                row.sort_unstable();
                // equal atoms cancel pairwise
                let mut reduced: Vec<u32> = Vec::with_capacity(row.len());
                for id in row {
                    if reduced.last() == Some(&id) {
                        reduced.pop();
                    } else {
                        reduced.push(id);
                    }
                }
                rows.push(reduced);
            }
            equations.push(rows);
        }
        space.equations = equations;
        Ok(space)
    }

    fn atom_at(&self, file: usize, lo: &Q) -> Option<u32> {
        let (pts, first) = &self.starts[file - 1];
        pts.binary_search(lo).ok().map(|i| (first + i) as u32)
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    fn atom_ref(&self, id: u32) -> AtomRef {
        let a = &self.atoms[id as usize];
        AtomRef { file: a.file, lo: fmt_q(&a.lo), hi: fmt_q(&a.hi) }
    }
}

/// Sparse GF(2) basis keyed by each row's smallest atom id.
#[derive(Default)]
struct SparseBasis {
    rows: HashMap<u32, Vec<u32>>,
}

fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl SparseBasis {
    fn reduce(&self, mut row: Vec<u32>) -> Vec<u32> {
        while let Some(&p) = row.first() {
            match self.rows.get(&p) {
                Some(b) => row = xor_sorted(&row, b),
                None => break,
            }
        }
        row
    }

    fn insert(&mut self, row: Vec<u32>) {
        let row = self.reduce(row);
        if let Some(&p) = row.first() {
            self.rows.insert(p, row);
        }
    }

    /// `true` if the unit vector of `id` is spanned. Leading elements are
    /// eliminated one at a time, so a remainder means `id` is free.
    fn spans(&self, id: u32) -> bool {
        let mut row = vec![id];
        while let Some(&p) = row.first() {
            match self.rows.get(&p) {
                Some(b) => row = xor_sorted(&row, b),
                None => return false,
            }
        }
        true
    }
}

/// Per-user decodability of `plan` under `placement`. A user receives the
/// messages addressed to it through the relays it is attached to; coded
/// relay units count through the MDS rule (any `|F¹|` distinct units
/// reconstruct the coded region).
pub fn verify_decodability(
    network: &RelayNetwork,
    placement: &CachePlacement,
    plan: &DeliveryPlan,
    demand: &Demand,
) -> Result<Vec<UserReport>> {
    if demand.len() != network.num_users() || placement.num_users() != network.num_users() {
        return Err(Error::DimensionMismatch("network, placement and demand disagree on K".into()));
    }
    let space = AtomSpace::build(placement, &plan.messages)?;
    let mut reports = Vec::with_capacity(network.num_users());
    for user in network.users() {
        let file = demand.file_of(user);
        let relays = network.relays_of(user);
        let known = |id: u32| {
            let a = &space.atoms[id as usize];
            !a.coded && a.cache_set.contains(user)
        };
        let mut basis = SparseBasis::default();
        for (mi, m) in plan.messages.iter().enumerate() {
            if !m.users.contains(user) || !relays.contains(m.relay) {
                continue;
            }
            for row in &space.equations[mi] {
                let unknown: Vec<u32> = row.iter().copied().filter(|&id| !known(id)).collect();
                if !unknown.is_empty() {
                    basis.insert(unknown);
                }
            }
        }

        let (fatoms, first) = &space.starts[file - 1];
        let mut decoded = Q::zero();
        let mut missing = None;
        for id in *first..first + fatoms.len() {
            let id = id as u32;
            let a = &space.atoms[id as usize];
            if a.coded {
                continue;
            }
            if known(id) || basis.spans(id) {
                decoded += a.hi - a.lo;
            } else if missing.is_none() {
                missing = Some(space.atom_ref(id));
            }
        }

        if let Some(rc) = placement.relay_cache() {
            let plain = placement.plain_sample().map(|p| p.per_file).unwrap_or_else(Q::zero);
            let mut units = plain;
            for h in relays.iter() {
                let sent: Q = plan
                    .coded
                    .iter()
                    .filter(|c| c.relay == h && c.user == user && c.file == file)
                    .map(|c| c.amount)
                    .sum();
                units += sent.min(rc.units_per_file);
            }
            if units >= rc.region {
                decoded += rc.region;
            } else {
                decoded += units;
                if missing.is_none() {
                    missing = Some(AtomRef { file, lo: fmt_q(&Q::zero()), hi: fmt_q(&rc.region) });
                }
            }
        }

        reports.push(UserReport {
            user,
            pass: missing.is_none(),
            missing_atom: missing,
            decoded_fraction: to_f64(&decoded),
            decoded,
        });
    }
    Ok(reports)
}
