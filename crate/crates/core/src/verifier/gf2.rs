//! Dense GF(2) rows and an incremental reduced-echelon basis.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitRow {
    words: Vec<u64>,
    len: usize,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut r = BitRow::zeros(len);
        r.set(i, true);
        r
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        if v {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn xor_with(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// Inner product with `bits` over GF(2).
    pub fn dot(&self, bits: &[bool]) -> bool {
        (0..self.len).filter(|&i| self.get(i) && bits[i]).count() % 2 == 1
    }
}

/// Rows with attached right-hand-side bits, kept in reduced row echelon
/// form.
#[derive(Clone, Debug, Default)]
pub struct Basis {
    rows: Vec<(BitRow, bool, usize)>,
}

impl Basis {
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn reduce(&self, row: &mut BitRow, value: &mut bool) {
        for (r, v, p) in &self.rows {
            if row.get(*p) {
                row.xor_with(r);
                *value ^= v;
            }
        }
    }

    /// `true` if `row` is outside the current span.
    pub fn is_independent(&self, row: &BitRow) -> bool {
        let mut r = row.clone();
        let mut v = false;
        self.reduce(&mut r, &mut v);
        !r.is_zero()
    }

    /// Adds `row = value`; returns `false` (and changes nothing) if the
    /// row is already spanned.
    pub fn insert(&mut self, row: BitRow, value: bool) -> bool {
        let mut row = row;
        let mut value = value;
        self.reduce(&mut row, &mut value);
        let Some(p) = row.first_one() else { return false };
        for (r, v, _) in self.rows.iter_mut() {
            if r.get(p) {
                r.xor_with(&row);
                *v ^= value;
            }
        }
        self.rows.push((row, value, p));
        true
    }

    /// Full solution when the basis has rank `width`.
    pub fn solve(&self, width: usize) -> Option<Vec<bool>> {
        if self.rows.len() != width {
            return None;
        }
        let mut x = vec![false; width];
        for (_, v, p) in &self.rows {
            x[*p] = *v;
        }
        Some(x)
    }
}
