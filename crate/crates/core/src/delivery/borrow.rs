//! Bit borrowing: lengthening a short operand `T^h_{k,J∖{k}}` with bits
//! from larger T-sets `T^h_{k,W}`, `W ⊋ J∖{k}`, which every other member
//! of `J` already knows.

use num_traits::Zero;
use serde::Serialize;

use super::bucket::Bucket;
use super::tsets::TSetTable;
use crate::rational::{qi, Q};
use crate::userset::UserSet;

/// Donors used in one pass at a fixed donor-set size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BorrowRound {
    /// Size of the donor known-sets in this pass (`t2`).
    pub donor_size: usize,
    /// `(W, bits taken)` in take order.
    pub donors: Vec<(UserSet, Q)>,
    /// 1-based threshold index `a`; `None` when every donor was taken whole.
    pub threshold: Option<usize>,
}

/// One borrowing event for operand `(relay, user, J∖{user})`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BorrowRecord {
    pub relay: usize,
    pub user: usize,
    pub users: UserSet,
    pub deficit: Q,
    pub rounds: Vec<BorrowRound>,
    /// Deficit left after all donor sizes were exhausted.
    pub residual: Q,
}

impl BorrowRecord {
    pub fn borrowed(&self) -> Q {
        self.rounds
            .iter()
            .flat_map(|r| r.donors.iter().map(|(_, l)| *l))
            .sum()
    }
}

/// Amounts to take from donors (already sorted by decreasing length) so
/// that exactly `need` bits are taken and the first `a − 1` donors are cut
/// down to a common level. Returns the takes and `a`.
pub fn equalizing_takes(lengths: &[Q], need: &Q) -> (Vec<Q>, usize) {
    let n = lengths.len();
    debug_assert!(n > 0);
    let mut prefix = Q::zero();
    let mut a = n + 1;
    for i in 2..=n {
        prefix += lengths[i - 2];
        if prefix - qi((i - 1) as i128) * lengths[i - 1] >= *need {
            a = i;
            break;
        }
    }
    let head: Q = lengths[..a - 1].iter().sum();
    let level = (head - need) / qi((a - 1) as i128);
    let takes = lengths[..a - 1].iter().map(|l| l - level).collect();
    (takes, a)
}

/// Lengthens `T^relay_{user, users∖{user}}` up to `target`. `relay_users` is
/// `U_h`. Returns `None` when the operand is already long enough.
pub fn borrow_bits<B: Bucket>(
    tsets: &mut TSetTable<B>,
    relay: usize,
    relay_users: UserSet,
    users: UserSet,
    user: usize,
    target: &Q,
) -> Option<BorrowRecord> {
    let base = users.without(user);
    let current = tsets.length(relay, user, base);
    if current >= *target {
        return None;
    }
    let deficit = target - current;
    let mut need = deficit;
    let outside = relay_users.minus(users);
    let mut donor_size = users.len();
    let mut rounds = Vec::new();
    loop {
        let extra = donor_size + 1 - users.len();
        let mut donors: Vec<(UserSet, Q)> = outside
            .subsets_of_size(extra)
            .into_iter()
            .map(|e| base.union(e))
            .map(|w| (w, tsets.length(relay, user, w)))
            .filter(|(_, l)| !l.is_zero())
            .collect();
        if !donors.is_empty() {
            donors.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let total: Q = donors.iter().map(|(_, l)| *l).sum();
            let (takes, threshold) = if need >= total {
                (donors.iter().map(|(_, l)| *l).collect::<Vec<_>>(), None)
            } else {
                let lengths: Vec<Q> = donors.iter().map(|(_, l)| *l).collect();
                let (takes, a) = equalizing_takes(&lengths, &need);
                (takes, Some(a))
            };
            let mut collected = B::default();
            let mut used = Vec::new();
            for ((w, _), amount) in donors.iter().zip(&takes) {
                let piece = tsets.entry(relay, user, *w).take_front(amount);
                used.push((*w, piece.length()));
                collected.extend(piece);
            }
            need -= collected.length();
            tsets.entry(relay, user, base).extend(collected);
            rounds.push(BorrowRound { donor_size, donors: used, threshold });
        }
        if need > Q::zero() && donor_size + 1 < relay_users.len() {
            donor_size += 1;
        } else {
            break;
        }
    }
    Some(BorrowRecord { relay, user, users, deficit, rounds, residual: need })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delivery::bucket::{SegmentList, Span};
    use crate::placement::Segment;
    use crate::rational::q;
    use proptest::prelude::*;

    /// Brute force over integer take vectors: the take must total `need`,
    /// never exceed a donor, and leave the touched donors at one common
    /// level no lower than any untouched donor.
    fn brute_force_takes(lengths: &[i128], need: i128) -> Vec<Vec<i128>> {
        fn rec(i: usize, lengths: &[i128], need: i128, take: &mut Vec<i128>, found: &mut Vec<Vec<i128>>) {
            if i == lengths.len() {
                if take.iter().sum::<i128>() != need {
                    return;
                }
                let touched: Vec<i128> = (0..lengths.len()).filter(|&j| take[j] > 0).map(|j| lengths[j] - take[j]).collect();
                let Some(&level) = touched.first() else { return };
                if touched.iter().any(|&x| x != level) {
                    return;
                }
                if (0..lengths.len()).any(|j| take[j] == 0 && lengths[j] > level) {
                    return;
                }
                found.push(take.clone());
                return;
            }
            for x in 0..=lengths[i] {
                take[i] = x;
                rec(i + 1, lengths, need, take, found);
            }
            take[i] = 0;
        }
        let mut found = Vec::new();
        rec(0, lengths, need, &mut vec![0; lengths.len()], &mut found);
        found
    }

    #[test]
    fn three_donor_example() {
        let lengths = [q(5, 60), q(3, 60), q(1, 60)];
        let (takes, a) = equalizing_takes(&lengths, &q(4, 60));
        assert_eq!(a, 3);
        assert_eq!(takes, vec![q(3, 60), q(1, 60)]);
        let oracle = brute_force_takes(&[5, 3, 1], 4);
        assert_eq!(oracle, vec![vec![3, 1, 0]]);
    }

    #[test]
    fn single_donor_takes_exactly_the_deficit() {
        let (takes, a) = equalizing_takes(&[q(1, 2)], &q(1, 5));
        assert_eq!(a, 2);
        assert_eq!(takes, vec![q(1, 5)]);
    }

    fn table_with(entries: &[(UserSet, i128, i128)]) -> TSetTable<SegmentList> {
        let mut t: TSetTable<SegmentList> = TSetTable::default();
        let mut pos = 0;
        for &(known, len, den) in entries {
            let seg = Segment::new(1, q(pos, den), q(pos + len, den));
            pos += len;
            t.entry(1, 1, known).push(seg);
        }
        t
    }

    #[test]
    fn deficit_exceeding_donors_takes_everything() {
        // U_h = {1,2,3,4}, J = {1,2}: donors are {2,3} and {2,4}, then {2,3,4}
        let relay_users = UserSet::from_ids(1..=4);
        let mut t = table_with(&[
            (UserSet::from_ids([2]), 1, 100),
            (UserSet::from_ids([2, 3]), 2, 100),
            (UserSet::from_ids([2, 4]), 3, 100),
        ]);
        let rec = borrow_bits(&mut t, 1, relay_users, UserSet::from_ids([1, 2]), 1, &q(20, 100)).unwrap();
        assert_eq!(rec.deficit, q(19, 100));
        assert_eq!(rec.borrowed(), q(5, 100));
        assert_eq!(rec.residual, q(14, 100));
        assert_eq!(rec.rounds.len(), 1);
        assert_eq!(rec.rounds[0].threshold, None);
        assert_eq!(t.length(1, 1, UserSet::from_ids([2])), q(6, 100));
        assert!(t.length(1, 1, UserSet::from_ids([2, 3])).is_zero());
    }

    #[test]
    fn borrowing_climbs_donor_sizes() {
        let relay_users = UserSet::from_ids(1..=4);
        let mut t = table_with(&[
            (UserSet::from_ids([2]), 1, 100),
            (UserSet::from_ids([2, 3]), 1, 100),
            (UserSet::from_ids([2, 3, 4]), 10, 100),
        ]);
        let rec = borrow_bits(&mut t, 1, relay_users, UserSet::from_ids([1, 2]), 1, &q(5, 100)).unwrap();
        assert_eq!(rec.rounds.len(), 2);
        assert_eq!(rec.rounds[1].donor_size, 3);
        assert_eq!(rec.rounds[1].donors, vec![(UserSet::from_ids([2, 3, 4]), q(3, 100))]);
        assert!(rec.residual.is_zero());
        assert_eq!(t.length(1, 1, UserSet::from_ids([2])), q(5, 100));
        assert_eq!(t.length(1, 1, UserSet::from_ids([2, 3, 4])), q(7, 100));
    }

    #[test]
    fn no_record_when_long_enough() {
        let mut t = table_with(&[(UserSet::from_ids([2]), 5, 100)]);
        assert!(borrow_bits(&mut t, 1, UserSet::from_ids(1..=3), UserSet::from_ids([1, 2]), 1, &q(5, 100)).is_none());
    }

    proptest! {
        #[test]
        fn takes_total_the_need_and_equalize(
            mut raw in proptest::collection::vec(1i128..30, 1..6),
            frac in 1i128..100,
        ) {
            raw.sort_by(|a, b| b.cmp(a));
            let total: i128 = raw.iter().sum();
            let need = q(total * frac, 100 * 60).min(q(total, 60) - q(1, 6000));
            prop_assume!(need > Q::zero());
            let lengths: Vec<Q> = raw.iter().map(|&x| q(x, 60)).collect();
            let (takes, a) = equalizing_takes(&lengths, &need);
            prop_assert_eq!(takes.iter().sum::<Q>(), need);
            let level = lengths[0] - takes[0];
            for (l, t) in lengths.iter().zip(&takes) {
                prop_assert!(*t > Q::zero());
                prop_assert_eq!(l - t, level);
            }
            for l in &lengths[a - 1..] {
                prop_assert!(*l <= level);
            }
        }

        #[test]
        fn span_and_segment_buckets_agree(lens in proptest::collection::vec(1i128..20, 1..5), target in 1i128..80) {
            let relay_users = UserSet::from_ids(1..=5);
            let donors = [
                UserSet::from_ids([2, 3]),
                UserSet::from_ids([2, 4]),
                UserSet::from_ids([2, 5]),
                UserSet::from_ids([2, 3, 4]),
                UserSet::from_ids([2, 4, 5]),
            ];
            let mut seg_table: TSetTable<SegmentList> = TSetTable::default();
            let mut span_table: TSetTable<Span> = TSetTable::default();
            let mut pos = 0;
            for (w, &l) in donors.iter().zip(&lens) {
                seg_table.entry(1, 1, *w).push(Segment::new(1, q(pos, 200), q(pos + l, 200)));
                span_table.entry(1, 1, *w).push(Segment::new(1, q(pos, 200), q(pos + l, 200)));
                pos += l;
            }
            let j = UserSet::from_ids([1, 2]);
            let a = borrow_bits(&mut seg_table, 1, relay_users, j, 1, &q(target, 200));
            let b = borrow_bits(&mut span_table, 1, relay_users, j, 1, &q(target, 200));
            prop_assert_eq!(a, b);
            for w in donors {
                prop_assert_eq!(seg_table.length(1, 1, w), span_table.length(1, 1, w));
            }
        }
    }
}
