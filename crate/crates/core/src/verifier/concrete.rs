//! Bit-level simulation of a plan: random files, materialized caches and
//! XOR payloads, and a peeling decoder per user. The relay-coded region of
//! hybrid placements is instantiated as random GF(2) combinations and
//! decoded by Gaussian elimination.

use num_traits::Zero;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gf2::{Basis, BitRow};
use crate::delivery::{Demand, DeliveryPlan};
use crate::error::{Error, Result};
use crate::placement::{CachePlacement, PlainSample, RelayCache};
use crate::rational::{denominator_lcm, Q};
use crate::topology::RelayNetwork;

const CACHE_DRAWS: u64 = 64;
const SELECTION_RESTARTS: u64 = 32;

/// Flip one payload bit before decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    pub message: usize,
    pub bit: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteOptions {
    pub bits: u64,
    pub seed: u64,
    pub fault: Option<Fault>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteReport {
    /// Per user, `true` when the decoded file matches bit for bit.
    pub users: Vec<bool>,
}

impl ConcreteReport {
    pub fn all_pass(&self) -> bool {
        self.users.iter().all(|&p| p)
    }

    pub fn failing(&self) -> Vec<usize> {
        (1..=self.users.len()).filter(|&k| !self.users[k - 1]).collect()
    }
}

/// Smallest file length at which every boundary of `placement` and `plan`
/// falls on a whole bit.
pub fn concrete_unit(placement: &CachePlacement, plan: &DeliveryPlan) -> i128 {
    let mut values: Vec<Q> = Vec::new();
    for s in placement.all_subfiles() {
        values.push(s.segment.lo);
        values.push(s.segment.hi);
    }
    for m in &plan.messages {
        values.push(m.length);
        for o in &m.operands {
            for s in o.data.segments() {
                values.push(s.lo);
                values.push(s.hi);
            }
        }
    }
    for c in &plan.coded {
        values.push(c.amount);
    }
    if let Some(rc) = placement.relay_cache() {
        values.push(rc.region);
        values.push(rc.units_per_file);
    }
    if let Some(p) = placement.plain_sample() {
        values.push(p.per_file);
    }
    denominator_lcm(values.iter())
}

fn to_bits(v: &Q, bits: u64) -> usize {
    let x = v * Q::from_integer(bits as i128);
    debug_assert!(x.is_integer());
    x.to_integer() as usize
}

/// Per-bit knowledge of one user: `None` unknown.
type Knowledge = Vec<Vec<Option<bool>>>;

pub fn simulate_concrete(
    network: &RelayNetwork,
    placement: &CachePlacement,
    plan: &DeliveryPlan,
    demand: &Demand,
    options: &ConcreteOptions,
) -> Result<ConcreteReport> {
    let bits = options.bits;
    let unit = concrete_unit(placement, plan);
    if bits == 0 || (bits as i128) % unit != 0 {
        return Err(Error::ConcreteLength { b: bits, unit });
    }
    if demand.len() != network.num_users() || placement.num_users() != network.num_users() {
        return Err(Error::DimensionMismatch("network, placement and demand disagree on K".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let files: Vec<Vec<bool>> = (0..placement.num_files())
        .map(|_| (0..bits).map(|_| rng.gen::<bool>()).collect())
        .collect();

    // operand bit positions per message position: (file index, bit)
    let mut layouts: Vec<Vec<Vec<(usize, usize)>>> = Vec::with_capacity(plan.messages.len());
    let mut payloads: Vec<Vec<bool>> = Vec::with_capacity(plan.messages.len());
    for m in &plan.messages {
        let len = to_bits(&m.length, bits);
        let mut layout = vec![Vec::with_capacity(m.operands.len()); len];
        for o in &m.operands {
            let mut pos = 0;
            for s in o.data.segments() {
                let f = s.file - 1;
                if f >= files.len() {
                    return Err(Error::InconsistentPlan(format!("unknown file {}", s.file)));
                }
                for b in to_bits(&s.lo, bits)..to_bits(&s.hi, bits) {
                    if pos >= len {
                        return Err(Error::InconsistentPlan("operand longer than message".into()));
                    }
                    layout[pos].push((f, b));
                    pos += 1;
                }
            }
        }
        let payload: Vec<bool> = layout
            .iter()
            .map(|ops| ops.iter().fold(false, |acc, &(f, b)| acc ^ files[f][b]))
            .collect();
        layouts.push(layout);
        payloads.push(payload);
    }
    if let Some(fault) = options.fault {
        let p = payloads
            .get_mut(fault.message)
            .and_then(|p| p.get_mut(fault.bit))
            .ok_or_else(|| Error::InconsistentPlan("fault outside the plan".into()))?;
        *p = !*p;
    }

    let coded_region = match placement.relay_cache() {
        Some(rc) => Some(CodedRegion::draw(network, placement, rc, bits, options.seed)?),
        None => None,
    };

    let mut users = Vec::with_capacity(network.num_users());
    for user in network.users() {
        let file = demand.file_of(user) - 1;
        let mut know: Knowledge = vec![Vec::new(); files.len()];
        for s in placement.user_cache(user) {
            let f = s.file - 1;
            if know[f].is_empty() {
                know[f] = vec![None; bits as usize];
            }
            for b in to_bits(&s.segment.lo, bits)..to_bits(&s.segment.hi, bits) {
                know[f][b] = Some(files[f][b]);
            }
        }
        for k in know.iter_mut() {
            if k.is_empty() {
                *k = vec![None; bits as usize];
            }
        }
        let relays = network.relays_of(user);
        let received: Vec<usize> = (0..plan.messages.len())
            .filter(|&i| plan.messages[i].users.contains(user) && relays.contains(plan.messages[i].relay))
            .collect();
        loop {
            let mut progress = false;
            for &mi in &received {
                for (pos, ops) in layouts[mi].iter().enumerate() {
                    let mut unknown = None;
                    let mut count = 0;
                    let mut acc = payloads[mi][pos];
                    for &(f, b) in ops {
                        match know[f][b] {
                            Some(v) => acc ^= v,
                            None => {
                                count += 1;
                                unknown = Some((f, b));
                            }
                        }
                    }
                    if count == 1 {
                        let (f, b) = unknown.unwrap();
                        know[f][b] = Some(acc);
                        progress = true;
                    }
                }
            }
            if !progress {
                break;
            }
        }
        let mut ok = true;
        let coded_end = coded_region.as_ref().map(|c| c.len).unwrap_or(0);
        if let Some(cr) = &coded_region {
            match cr.decode(network, plan, user, file, &files[file]) {
                Some(decoded) => {
                    for (b, v) in decoded.into_iter().enumerate() {
                        know[file][b] = Some(v);
                    }
                }
                None => ok = false,
            }
        }
        if ok {
            ok = (coded_end..bits as usize).all(|b| know[file][b] == Some(files[file][b]))
                && (0..coded_end).all(|b| know[file][b] == Some(files[file][b]));
        }
        users.push(ok);
    }
    Ok(ConcreteReport { users })
}

/// Concrete relay caches and plain user samples of the coded region.
struct CodedRegion {
    len: usize,
    /// `caches[h-1][file]`: coefficient rows of relay `h`'s units.
    caches: Vec<Vec<Vec<BitRow>>>,
    /// `plain[k-1][file]`: cached bit positions of user `k`.
    plain: Vec<Vec<Vec<usize>>>,
    seed: u64,
    bits: u64,
}

fn random_row(rng: &mut ChaCha8Rng, len: usize) -> BitRow {
    let mut r = BitRow::zeros(len);
    for i in 0..len {
        r.set(i, rng.gen::<bool>());
    }
    r
}

impl CodedRegion {
    /// Draws relay caches per file, redrawing (placement is centralized, so
    /// the server may) until every user's relays together with its plain
    /// bits span the region.
    fn draw(network: &RelayNetwork, placement: &CachePlacement, rc: &RelayCache, bits: u64, seed: u64) -> Result<Self> {
        let len = to_bits(&rc.region, bits);
        let units = to_bits(&rc.units_per_file, bits);
        let nf = placement.num_files();
        let plain_count = placement.plain_sample().map(|p: &PlainSample| to_bits(&p.per_file, bits)).unwrap_or(0);
        let plain_seed = placement.plain_sample().map(|p| p.seed).unwrap_or(seed);
        let mut prng = ChaCha8Rng::seed_from_u64(plain_seed ^ 0x5eed_0f_b175);
        let plain: Vec<Vec<Vec<usize>>> = network
            .users()
            .map(|_| (0..nf).map(|_| sample(&mut prng, len, plain_count).into_vec()).collect())
            .collect();
        let mut caches = vec![vec![Vec::new(); nf]; network.num_relays()];
        for f in 0..nf {
            let mut ok = false;
            for attempt in 0..CACHE_DRAWS {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((f as u64) << 32) ^ (attempt << 48) ^ 0xcac4e);
                let drawn: Vec<Vec<BitRow>> = network
                    .relays()
                    .map(|_| (0..units).map(|_| random_row(&mut rng, len)).collect())
                    .collect();
                let spans_all = network.users().all(|k| {
                    let mut basis = Basis::default();
                    for &b in &plain[k - 1][f] {
                        basis.insert(BitRow::unit(len, b), false);
                    }
                    for h in network.relays_of(k).iter() {
                        for row in &drawn[h - 1] {
                            basis.insert(row.clone(), false);
                        }
                    }
                    basis.rank() == len
                });
                if spans_all {
                    for (h, rows) in drawn.into_iter().enumerate() {
                        caches[h][f] = rows;
                    }
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(Error::InconsistentPlan(format!(
                    "no spanning relay cache found for file {}",
                    f + 1
                )));
            }
        }
        Ok(CodedRegion { len, caches, plain, seed, bits })
    }

    /// Relays pick random combinations of their cached units that are
    /// independent of what the user already holds; the user then solves for
    /// the region. `None` when the received system is rank deficient.
    fn decode(&self, network: &RelayNetwork, plan: &DeliveryPlan, user: usize, file: usize, data: &[bool]) -> Option<Vec<bool>> {
        let region = &data[..self.len];
        let per_relay: Vec<(usize, usize)> = network
            .relays_of(user)
            .iter()
            .map(|h| {
                let amount: Q = plan
                    .coded
                    .iter()
                    .filter(|c| c.relay == h && c.user == user && c.file == file + 1)
                    .map(|c| c.amount)
                    .sum();
                (h, if amount.is_zero() { 0 } else { to_bits(&amount, self.bits) })
            })
            .collect();
        for restart in 0..SELECTION_RESTARTS {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ ((user as u64) << 40) ^ restart ^ 0xdec0de);
            let mut basis = Basis::default();
            for &b in &self.plain[user - 1][file] {
                basis.insert(BitRow::unit(self.len, b), region[b]);
            }
            let mut stuck = false;
            for &(h, count) in &per_relay {
                let cached = &self.caches[h - 1][file];
                let count = count.min(cached.len());
                let mut accepted = 0;
                let mut tries = 0;
                while accepted < count && tries < 64 * (count + 1) {
                    tries += 1;
                    let mut row = BitRow::zeros(self.len);
                    for c in cached {
                        if rng.gen::<bool>() {
                            row.xor_with(c);
                        }
                    }
                    // the relay computes the value from its cached unit values
                    let value = row.dot(region);
                    if basis.is_independent(&row) {
                        basis.insert(row, value);
                        accepted += 1;
                    }
                }
                if accepted < count {
                    stuck = true;
                    break;
                }
            }
            if !stuck {
                if let Some(x) = basis.solve(self.len) {
                    return Some(x);
                }
            }
        }
        None
    }
}
