use std::fmt;

use serde::{Deserialize, Serialize};

/// Inclusive box of cell indices in one level's index space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: [i32; 3],
    pub hi: [i32; 3],
}

impl IndexBox {
    pub fn new(lo: [i32; 3], hi: [i32; 3]) -> Self {
        debug_assert!((0..3).all(|a| lo[a] <= hi[a]), "empty box {lo:?}..{hi:?}");
        Self { lo, hi }
    }

    /// Box covering `[0, n)` along each axis.
    pub fn from_extent(n: [i32; 3]) -> Self {
        Self::new([0; 3], [n[0] - 1, n[1] - 1, n[2] - 1])
    }

    pub fn extent(&self) -> [i32; 3] {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn volume(&self) -> usize {
        let n = self.extent();
        n[0] as usize * n[1] as usize * n[2] as usize
    }

    pub fn contains(&self, c: [i32; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= c[a] && c[a] <= self.hi[a])
    }

    pub fn contains_box(&self, other: &IndexBox) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    pub fn intersect(&self, other: &IndexBox) -> Option<IndexBox> {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].max(other.lo[a]);
            hi[a] = self.hi[a].min(other.hi[a]);
            if lo[a] > hi[a] {
                return None;
            }
        }
        Some(IndexBox { lo, hi })
    }

    pub fn intersects(&self, other: &IndexBox) -> bool {
        self.intersect(other).is_some()
    }

    pub fn grow(&self, n: i32) -> IndexBox {
        IndexBox {
            lo: [self.lo[0] - n, self.lo[1] - n, self.lo[2] - n],
            hi: [self.hi[0] + n, self.hi[1] + n, self.hi[2] + n],
        }
    }

    pub fn refine(&self, ratio: i32) -> IndexBox {
        IndexBox {
            lo: [self.lo[0] * ratio, self.lo[1] * ratio, self.lo[2] * ratio],
            hi: [
                (self.hi[0] + 1) * ratio - 1,
                (self.hi[1] + 1) * ratio - 1,
                (self.hi[2] + 1) * ratio - 1,
            ],
        }
    }

    pub fn coarsen(&self, ratio: i32) -> IndexBox {
        IndexBox {
            lo: self.lo.map(|v| v.div_euclid(ratio)),
            hi: self.hi.map(|v| v.div_euclid(ratio)),
        }
    }

    /// True when the box is the exact refinement of a coarse box.
    pub fn is_aligned(&self, ratio: i32) -> bool {
        (0..3).all(|a| self.lo[a].rem_euclid(ratio) == 0 && (self.hi[a] + 1).rem_euclid(ratio) == 0)
    }

    /// Cells in x-fastest order.
    pub fn cells(&self) -> impl Iterator<Item = [i32; 3]> + '_ {
        let lo = self.lo;
        let hi = self.hi;
        (lo[2]..=hi[2]).flat_map(move |k| {
            (lo[1]..=hi[1]).flat_map(move |j| (lo[0]..=hi[0]).map(move |i| [i, j, k]))
        })
    }

    /// x-fastest linear offset of `c` inside this box.
    #[inline]
    pub fn offset(&self, c: [i32; 3]) -> usize {
        let n = self.extent();
        ((c[2] - self.lo[2]) as usize * n[1] as usize + (c[1] - self.lo[1]) as usize)
            * n[0] as usize
            + (c[0] - self.lo[0]) as usize
    }

    /// Splits the box along `axis` so that the lower half ends at `cut` (inclusive).
    pub fn split(&self, axis: usize, cut: i32) -> (IndexBox, IndexBox) {
        debug_assert!(self.lo[axis] <= cut && cut < self.hi[axis]);
        let mut left = *self;
        let mut right = *self;
        left.hi[axis] = cut;
        right.lo[axis] = cut + 1;
        (left, right)
    }
}

impl fmt::Display for IndexBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[({},{},{})..({},{},{})]",
            self.lo[0], self.lo[1], self.lo[2], self.hi[0], self.hi[1], self.hi[2]
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refine_coarsen_roundtrip() {
        let b = IndexBox::new([1, 2, 3], [4, 5, 6]);
        let f = b.refine(2);
        assert_eq!(f, IndexBox::new([2, 4, 6], [9, 11, 13]));
        assert!(f.is_aligned(2));
        assert_eq!(f.coarsen(2), b);
        assert_eq!(f.volume(), 8 * b.volume());
    }

    #[test]
    fn coarsen_negative_indices() {
        let b = IndexBox::new([-1, -2, -3], [0, 1, 2]);
        assert_eq!(b.coarsen(2), IndexBox::new([-1, -1, -2], [0, 0, 1]));
    }

    #[test]
    fn offsets_follow_cell_order() {
        let b = IndexBox::new([2, -1, 0], [4, 0, 1]);
        for (n, c) in b.cells().enumerate() {
            assert_eq!(b.offset(c), n);
        }
        assert_eq!(b.cells().count(), b.volume());
    }

    #[test]
    fn intersection() {
        let a = IndexBox::new([0, 0, 0], [3, 3, 3]);
        let b = IndexBox::new([2, 2, 2], [5, 5, 5]);
        assert_eq!(a.intersect(&b), Some(IndexBox::new([2, 2, 2], [3, 3, 3])));
        let c = IndexBox::new([4, 0, 0], [5, 3, 3]);
        assert_eq!(a.intersect(&c), None);
    }
}
