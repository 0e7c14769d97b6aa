//! Closed-form loads and stored comparison constants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{binom, q, qi, Q};

/// Max link-load of the delivery scheme on an `r = 2` combination network
/// with `H` relays and integer cache parameter `t`.
pub fn closed_form_load_r2(h: usize, t: usize) -> Result<Q> {
    if h < 3 {
        return Err(Error::ParameterDomain(format!("need H >= 3, got {h}")));
    }
    let h = h as i64;
    let k = binom(h, 2) as i64;
    let t = t as i64;
    if t > k {
        return Err(Error::ParameterDomain(format!("t = {t} exceeds K = {k}")));
    }
    let inner = binom(h - 2, 2) as i64;
    let mut x = Q::from_integer(0);
    for b1 in 0..=t.min(h - 2) {
        let c1 = binom(h - 2, b1);
        x += Q::new(c1 * c1 * binom(inner, t - 2 * b1), (b1 + 1) as i128);
        for b2 in 0..b1 {
            x += Q::new(2 * c1 * binom(h - 2, b2) * binom(inner, t - b1 - b2), (b1 + 1) as i128);
        }
    }
    Ok(x * qi(k as i128) / qi(h as i128 * binom(k, t)))
}

/// Shared-link load of the centralized scheme, `C(K, t+1) / C(K, t)`.
pub fn shared_link_centralized_load(k: usize, t: usize) -> Result<Q> {
    if t > k {
        return Err(Error::ParameterDomain(format!("t = {t} outside [0, {k}]")));
    }
    Ok(Q::new(binom(k as i64, t as i64 + 1), binom(k as i64, t as i64)))
}

/// Shared-link load of the decentralized scheme, `(N/M − 1)(1 − (1 − M/N)^K)`.
/// Tends to `K` as `M → 0`.
pub fn shared_link_decentralized_load(k: usize, m: f64, n: f64) -> Result<f64> {
    if !(0.0..=n).contains(&m) || n <= 0.0 {
        return Err(Error::ParameterDomain(format!("memory {m} outside [0, {n}]")));
    }
    if m == 0.0 {
        return Ok(k as f64);
    }
    let p = m / n;
    Ok((1.0 / p - 1.0) * (1.0 - (1.0 - p).powi(k as i32)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// H=4, r=2, N=K=6, M=2.
    Worked,
    Example1,
    Example2,
    Example3,
    /// H=6, r=3, N=K=20 sweep.
    Sweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Worked => "worked",
            Scenario::Example1 => "example1",
            Scenario::Example2 => "example2",
            Scenario::Example3 => "example3",
            Scenario::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReferenceConstant {
    pub scheme: &'static str,
    pub scenario: Scenario,
    /// Memory point for sweep endpoints.
    pub memory: Option<Q>,
    pub load: Q,
    pub citation: &'static str,
    /// Set when our own accounting of the same quantity disagrees.
    pub flagged: bool,
}

fn constant(scheme: &'static str, scenario: Scenario, load: Q, citation: &'static str) -> ReferenceConstant {
    ReferenceConstant { scheme, scenario, memory: None, load, citation, flagged: false }
}

/// Published loads of competing schemes (and bounds) for each scenario.
pub fn reference_table(scenario: Scenario) -> Vec<ReferenceConstant> {
    use Scenario::*;
    match scenario {
        Worked => vec![
            constant("ies", Worked, q(17, 30), "novelwan2017"),
            constant("routing-coded", Worked, q(20, 30), "cachingincom"),
            constant("multiserver", Worked, q(20, 30), "multiserver"),
            constant("mds-relay", Worked, q(15, 30), "Zewail2017codedcaching"),
        ],
        Example1 => vec![
            constant("ies", Example1, q(4, 15), "novelwan2017"),
            constant("mds-relay", Example1, q(13, 45), "Zewail2017codedcaching"),
            constant("routing-coded", Example1, q(1, 3), "cachingincom"),
            constant("multiserver", Example1, q(3, 5), "multiserver"),
        ],
        Example2 => vec![
            constant("ies", Example2, q(1, 3), "novelwan2017"),
            constant("routing-coded", Example2, q(1, 2), "cachingincom"),
            constant("multiserver", Example2, q(3, 5), "multiserver"),
            constant("cut-set", Example2, q(3, 10), "novelwan2017"),
        ],
        Example3 => vec![
            constant("server-to-relay", Example3, q(14, 45), "self"),
            ReferenceConstant { flagged: true, ..constant("relay-to-user", Example3, q(1, 3), "self") },
        ],
        Sweep => vec![
            ReferenceConstant { memory: Some(qi(0)), ..constant("ies", Sweep, q(10, 3), "novelwan2017") },
            ReferenceConstant { memory: Some(qi(1)), ..constant("ies", Sweep, q(8, 5), "novelwan2017") },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_point() {
        assert_eq!(closed_form_load_r2(4, 2).unwrap(), q(7, 15));
    }

    #[test]
    fn full_cache_is_free() {
        assert_eq!(closed_form_load_r2(4, 6).unwrap(), qi(0));
        assert_eq!(shared_link_centralized_load(6, 6).unwrap(), qi(0));
    }

    #[test]
    fn shared_link() {
        assert_eq!(shared_link_centralized_load(6, 2).unwrap(), q(4, 3));
        assert_eq!(shared_link_centralized_load(6, 0).unwrap(), qi(6));
        assert_eq!(shared_link_decentralized_load(15, 0.0, 15.0).unwrap(), 15.0);
        assert_eq!(shared_link_decentralized_load(15, 15.0, 15.0).unwrap(), 0.0);
        let v = shared_link_decentralized_load(15, 5.0, 15.0).unwrap();
        assert!((v - 2.0 * (1.0 - (2.0f64 / 3.0).powi(15))).abs() < 1e-12);
    }

    #[test]
    fn domain() {
        assert!(closed_form_load_r2(2, 0).is_err());
        assert!(closed_form_load_r2(4, 7).is_err());
        assert!(shared_link_centralized_load(3, 4).is_err());
    }

    #[test]
    fn nonincreasing_in_t() {
        for h in 3..=7 {
            let k = h * (h - 1) / 2;
            let loads: Vec<Q> = (0..=k).map(|t| closed_form_load_r2(h, t).unwrap()).collect();
            assert!(loads.windows(2).all(|w| w[1] <= w[0]), "H={h}: {loads:?}");
        }
    }
}
