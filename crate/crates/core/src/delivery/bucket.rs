//! Ordered contents of a T-set or message operand.
//!
//! The delivery engine is generic over [`Bucket`] so the same code can run
//! with full segment lists (for verification and dumps) or with bare
//! lengths (for large load sweeps).

use std::fmt;

use num_traits::Zero;

use crate::placement::Segment;
use crate::rational::Q;

pub trait Bucket: Clone + Default + fmt::Debug + Send + Sync {
    fn length(&self) -> Q;

    /// Appends one piece at the tail.
    fn push(&mut self, seg: Segment);

    /// Removes and returns the leading `amount` (or everything, if shorter).
    fn take_front(&mut self, amount: &Q) -> Self;

    /// Appends `other` at the tail.
    fn extend(&mut self, other: Self);

    fn is_empty(&self) -> bool {
        self.length().is_zero()
    }
}

/// Concatenation of segments with a cached total length.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SegmentList {
    segments: Vec<Segment>,
    length: Q,
}

impl SegmentList {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn from_segments(segments: Vec<Segment>) -> Self {
        let length = segments.iter().map(|s| s.len()).sum();
        SegmentList { segments, length }
    }
}

impl Bucket for SegmentList {
    fn length(&self) -> Q {
        self.length
    }

    fn push(&mut self, seg: Segment) {
        self.length += seg.len();
        self.segments.push(seg);
    }

    fn take_front(&mut self, amount: &Q) -> Self {
        if *amount >= self.length {
            return std::mem::take(self);
        }
        let mut head = SegmentList::default();
        let mut left = *amount;
        let mut used = 0;
        for seg in &self.segments {
            if left.is_zero() {
                break;
            }
            if seg.len() <= left {
                left -= seg.len();
                head.push(seg.clone());
                used += 1;
            } else {
                break;
            }
        }
        self.segments.drain(..used);
        if !left.is_zero() {
            let (cut, rest) = self.segments[0].split_at(left);
            head.push(cut);
            self.segments[0] = rest.expect("partial cut leaves a tail");
        }
        self.length -= head.length;
        head
    }

    fn extend(&mut self, other: Self) {
        self.length += other.length;
        self.segments.extend(other.segments);
    }
}

/// Length-only bucket.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Span(pub Q);

impl Bucket for Span {
    fn length(&self) -> Q {
        self.0
    }

    fn push(&mut self, seg: Segment) {
        self.0 += seg.len();
    }

    fn take_front(&mut self, amount: &Q) -> Self {
        let taken = if *amount >= self.0 { self.0 } else { *amount };
        self.0 -= taken;
        Span(taken)
    }

    fn extend(&mut self, other: Self) {
        self.0 += other.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn seg(lo: i128, hi: i128) -> Segment {
        Segment::new(1, q(lo, 60), q(hi, 60))
    }

    #[test]
    fn take_front_splits_segments() {
        let mut list = SegmentList::from_segments(vec![seg(0, 3), seg(10, 12), seg(20, 25)]);
        let head = list.take_front(&q(4, 60));
        assert_eq!(head.segments(), &[seg(0, 3), seg(10, 11)]);
        assert_eq!(list.segments(), &[seg(11, 12), seg(20, 25)]);
        assert_eq!(head.length() + list.length(), q(10, 60));
        let all = list.take_front(&q(1, 1));
        assert_eq!(all.length(), q(6, 60));
        assert!(list.is_empty());
    }

    #[test]
    fn exact_boundary_take() {
        let mut list = SegmentList::from_segments(vec![seg(0, 3), seg(10, 12)]);
        let head = list.take_front(&q(3, 60));
        assert_eq!(head.segments(), &[seg(0, 3)]);
        assert_eq!(list.segments(), &[seg(10, 12)]);
    }

    #[test]
    fn span_matches_list() {
        let mut s = Span::default();
        s.push(seg(0, 5));
        let head = s.take_front(&q(2, 60));
        assert_eq!(head.0, q(2, 60));
        assert_eq!(s.0, q(3, 60));
        assert_eq!(s.take_front(&q(1, 1)).0, q(3, 60));
    }
}
