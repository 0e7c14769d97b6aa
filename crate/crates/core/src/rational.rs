//! Exact rational lengths and binomial helpers.
//!
//! Every length in this crate is a fraction of the normalized file size, so
//! loads and segment boundaries are carried as `Ratio<i128>` and compared
//! exactly.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational number used for all lengths and loads.
pub type Q = Ratio<i128>;

pub fn q(num: i128, den: i128) -> Q {
    Q::new(num, den)
}

pub fn qi(n: i128) -> Q {
    Q::from_integer(n)
}

/// Binomial coefficient with the zero convention: `C(n, k) = 0` whenever
/// `n < 0`, `k < 0` or `n < k`.
pub fn binom(n: i64, k: i64) -> i128 {
    if n < 0 || k < 0 || n < k {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Least common multiple of the denominators of `values`.
pub fn denominator_lcm<'a, I: IntoIterator<Item = &'a Q>>(values: I) -> i128 {
    values
        .into_iter()
        .fold(1i128, |acc, v| acc.lcm(v.denom()))
}

/// Formats a rational as `num/den` (integers print as `n/1`).
pub fn fmt_q(v: &Q) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

pub fn to_f64(v: &Q) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

/// Parses `a`, `a/b` or a finite decimal such as `0.25`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let negative = int.trim_start().starts_with('-');
        let whole: i128 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let den = 10i128.pow(frac.len() as u32);
        let part: i128 = frac.parse().map_err(|_| bad())?;
        let mag = whole.abs() * den + part;
        return Ok(Q::new(if negative { -mag } else { mag }, den));
    }
    s.parse::<i128>().map(Q::from_integer).map_err(|_| bad())
}

/// `true` when `v` is a non-negative integer multiple of `1/den`.
pub fn is_multiple_of_unit(v: &Q, den: i128) -> bool {
    !v.is_negative() && (v * Q::from_integer(den)).is_integer()
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_zero_convention() {
        assert_eq!(binom(6, 2), 15);
        assert_eq!(binom(20, 10), 184_756);
        assert_eq!(binom(2, 3), 0);
        assert_eq!(binom(-1, 0), 0);
        assert_eq!(binom(3, -1), 0);
        assert_eq!(binom(0, 0), 1);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("7/15").unwrap(), q(7, 15));
        assert_eq!(parse_q("2").unwrap(), qi(2));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-1.5").unwrap(), q(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn lcm_of_denominators() {
        let v = [q(1, 20), q(1, 30), q(1, 12)];
        assert_eq!(denominator_lcm(v.iter()), 60);
        assert_eq!(fmt_q(&q(14, 30)), "7/15");
    }
}
