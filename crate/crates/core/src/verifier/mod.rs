//! Load accounting and decodability checks.

mod atoms;
mod concrete;
pub mod gf2;

use num_traits::Zero;
use serde::Serialize;

pub use atoms::{verify_decodability, AtomRef, AtomSpace, UserReport};
pub use concrete::{concrete_unit, simulate_concrete, ConcreteOptions, ConcreteReport, Fault};

use crate::delivery::{Bucket, CodedTransfer, Message};
use crate::rational::Q;
use crate::topology::RelayNetwork;

/// Exact server → relay and relay → user loads of a plan.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// `R_h`, indexed by `h − 1`.
    pub relay: Vec<Q>,
    /// `R_{h→k}` for every `k ∈ U_h`, sorted by `(h, k)`.
    pub links: Vec<((usize, usize), Q)>,
    pub max_relay: Q,
    pub max_link: Q,
    /// Max link-load: the largest of all of the above.
    pub max: Q,
}

impl LoadReport {
    pub fn link(&self, relay: usize, user: usize) -> Q {
        self.links
            .binary_search_by(|(key, _)| key.cmp(&(relay, user)))
            .map(|i| self.links[i].1)
            .unwrap_or_else(|_| Q::zero())
    }

    pub fn total(&self) -> Q {
        self.relay.iter().sum()
    }
}

/// `R_h = Σ_{J⊆U_h} |W^h_J|` and `R_{h→k} = Σ_{J∋k} |W^h_J|` plus any
/// relay-sourced coded transfers on the relay → user links.
pub fn compute_loads<B: Bucket>(
    network: &RelayNetwork,
    messages: &[Message<B>],
    coded: &[CodedTransfer],
) -> LoadReport {
    let mut relay = vec![Q::zero(); network.num_relays()];
    let mut links: Vec<((usize, usize), Q)> = network
        .relays()
        .flat_map(|h| network.users_of(h).iter().map(move |k| ((h, k), Q::zero())))
        .collect();
    let index = |links: &Vec<((usize, usize), Q)>, h: usize, k: usize| {
        links.binary_search_by(|(key, _)| key.cmp(&(h, k))).ok()
    };
    for m in messages {
        relay[m.relay - 1] += m.length;
        for k in m.users.iter() {
            if let Some(i) = index(&links, m.relay, k) {
                links[i].1 += m.length;
            }
        }
    }
    for c in coded {
        if let Some(i) = index(&links, c.relay, c.user) {
            links[i].1 += c.amount;
        }
    }
    let max_relay = relay.iter().copied().max().unwrap_or_else(Q::zero);
    let max_link = links.iter().map(|(_, l)| *l).max().unwrap_or_else(Q::zero);
    LoadReport { max: max_relay.max(max_link), relay, links, max_relay, max_link }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::Span;

    #[test]
    fn empty_plan_has_zero_load() {
        let net = RelayNetwork::combination(4, 2).unwrap();
        let r = compute_loads::<Span>(&net, &[], &[]);
        assert!(r.max.is_zero());
        assert_eq!(r.relay.len(), 4);
        assert_eq!(r.links.len(), 12);
    }
}
