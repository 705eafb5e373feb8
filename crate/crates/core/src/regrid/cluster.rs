//! Berger–Rigoutsos clustering of tagged cells into rectangular boxes.

use crate::mesh::IndexBox;

/// Boolean flags over every cell of a box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagGrid {
    pub bx: IndexBox,
    flags: Vec<bool>,
}

impl TagGrid {
    pub fn new(bx: IndexBox) -> Self {
        Self {
            bx,
            flags: vec![false; bx.volume()],
        }
    }

    #[inline]
    pub fn get(&self, c: [i32; 3]) -> bool {
        self.bx.contains(c) && self.flags[self.bx.offset(c)]
    }

    #[inline]
    pub fn set(&mut self, c: [i32; 3], v: bool) {
        let k = self.bx.offset(c);
        self.flags[k] = v;
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.flags.iter().any(|&f| f)
    }

    pub fn tagged(&self) -> impl Iterator<Item = [i32; 3]> + '_ {
        self.bx
            .cells()
            .zip(&self.flags)
            .filter(|(_, &f)| f)
            .map(|(c, _)| c)
    }

    /// Tags every cell within `n` cells (Chebyshev distance) of a tagged cell,
    /// clipped to the grid's box.
    pub fn dilate(&self, n: i32) -> TagGrid {
        if n <= 0 {
            return self.clone();
        }
        let mut out = TagGrid::new(self.bx);
        for c in self.tagged() {
            let around = IndexBox::new(c, c).grow(n);
            if let Some(b) = around.intersect(&self.bx) {
                for x in b.cells() {
                    out.set(x, true);
                }
            }
        }
        out
    }

    /// Logical AND with another grid over the same box.
    pub fn and(&self, other: &TagGrid) -> TagGrid {
        debug_assert_eq!(self.bx, other.bx);
        TagGrid {
            bx: self.bx,
            flags: self
                .flags
                .iter()
                .zip(&other.flags)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    /// Number of tagged cells in `b`.
    pub fn count_in(&self, b: &IndexBox) -> usize {
        b.cells().filter(|&c| self.get(c)).count()
    }

    /// Smallest box containing the tags inside `b`.
    pub fn bounding_box(&self, b: &IndexBox) -> Option<IndexBox> {
        let mut lo = [i32::MAX; 3];
        let mut hi = [i32::MIN; 3];
        let mut any = false;
        for c in b.cells().filter(|&c| self.get(c)) {
            any = true;
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        any.then(|| IndexBox::new(lo, hi))
    }

    /// Tag counts of the planes of `b` normal to each axis.
    fn signatures(&self, b: &IndexBox) -> [Vec<usize>; 3] {
        let n = b.extent();
        let mut sig = [
            vec![0; n[0] as usize],
            vec![0; n[1] as usize],
            vec![0; n[2] as usize],
        ];
        for c in b.cells().filter(|&c| self.get(c)) {
            for a in 0..3 {
                sig[a][(c[a] - b.lo[a]) as usize] += 1;
            }
        }
        sig
    }
}

/// Clustering parameters, all in cells of the tagged level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterParams {
    /// Accept a box once tagged / total reaches this fraction.
    pub efficiency: f64,
    /// Smallest extent a cut may leave along the cut axis.
    pub min_size: i32,
}

/// Covers every tagged cell with disjoint boxes.
///
/// Each box is shrunk to its tags and accepted once its efficiency reaches
/// `params.efficiency`; otherwise it is cut at the zero-signature plane
/// closest to its centre, else at the strongest inflection of the signature
/// Laplacian, else bisected along its longest axis. Cuts that are not holes
/// must leave at least `min_size` cells on both sides; a box with no
/// admissible cut is accepted as is. The result is deterministic.
pub fn cluster_tags(tags: &TagGrid, params: &ClusterParams) -> Vec<IndexBox> {
    let mut out = Vec::new();
    let mut stack = vec![tags.bx];
    while let Some(b) = stack.pop() {
        let Some(b) = tags.bounding_box(&b) else {
            continue;
        };
        let count = tags.count_in(&b);
        if count as f64 >= params.efficiency * b.volume() as f64 {
            out.push(b);
            continue;
        }
        match choose_cut(&tags.signatures(&b), &b, params.min_size) {
            Some((axis, cut)) => {
                let (left, right) = b.split(axis, cut);
                // Right is pushed first so the left half is processed first.
                stack.push(right);
                stack.push(left);
            }
            None => out.push(b),
        }
    }
    out
}

/// `(axis, last index of the lower half)` of the preferred cut, if any.
fn choose_cut(sig: &[Vec<usize>; 3], b: &IndexBox, min_size: i32) -> Option<(usize, i32)> {
    let n = b.extent();
    let centre_distance = |a: usize, i: i32| (2 * i + 1 - n[a]).abs();

    // Holes: planes with no tags. The ends are tagged after shrinking.
    let mut best: Option<(i32, usize, i32)> = None;
    for a in 0..3 {
        for i in 1..n[a] - 1 {
            if sig[a][i as usize] == 0 {
                let key = centre_distance(a, i);
                if best.is_none_or(|(k, _, _)| key < k) {
                    best = Some((key, a, i));
                }
            }
        }
    }
    if let Some((_, a, i)) = best {
        return Some((a, b.lo[a] + i));
    }

    // Inflections: sign changes of the second difference of the signature.
    let mut best: Option<(i64, i32, usize, i32)> = None;
    for a in 0..3 {
        let s: Vec<i64> = sig[a].iter().map(|&v| v as i64).collect();
        let len = s.len();
        if len < 4 {
            continue;
        }
        let lap: Vec<i64> = (1..len - 1)
            .map(|i| s[i - 1] - 2 * s[i] + s[i + 1])
            .collect();
        for k in 0..lap.len() - 1 {
            let (l0, l1) = (lap[k], lap[k + 1]);
            if l0.signum() * l1.signum() >= 0 {
                continue;
            }
            // The change happens between planes k + 1 and k + 2.
            let cut = k as i32 + 1;
            if cut + 1 < min_size || n[a] - cut - 1 < min_size {
                continue;
            }
            let strength = (l1 - l0).abs();
            let key = centre_distance(a, cut);
            let better = match best {
                None => true,
                Some((st, ck, _, _)) => strength > st || (strength == st && key < ck),
            };
            if better {
                best = Some((strength, key, a, cut));
            }
        }
    }
    if let Some((_, _, a, i)) = best {
        return Some((a, b.lo[a] + i));
    }

    // Bisection of the longest axis that can still be cut.
    let mut axes = [0, 1, 2];
    axes.sort_by_key(|&a| std::cmp::Reverse(n[a]));
    axes.into_iter()
        .find(|&a| n[a] >= 2 * min_size.max(1))
        .map(|a| (a, b.lo[a] + n[a] / 2 - 1))
}

/// Splits boxes until each lies entirely inside `allowed`, dropping pieces
/// without tags and shrinking the rest to their tags. Requires every tag to
/// be allowed.
pub fn fit_to_region(boxes: Vec<IndexBox>, tags: &TagGrid, allowed: &TagGrid) -> Vec<IndexBox> {
    let mut out = Vec::new();
    let mut stack: Vec<IndexBox> = boxes.into_iter().rev().collect();
    while let Some(b) = stack.pop() {
        let Some(b) = tags.bounding_box(&b) else {
            continue;
        };
        if b.cells().all(|c| allowed.get(c)) {
            out.push(b);
            continue;
        }
        let n = b.extent();
        let a = (0..3)
            .max_by_key(|&a| (n[a], std::cmp::Reverse(a)))
            .unwrap();
        debug_assert!(n[a] > 1, "tagged cell outside the allowed region");
        let (left, right) = b.split(a, b.lo[a] + n[a] / 2 - 1);
        stack.push(right);
        stack.push(left);
    }
    out
}
