//! Inter-level transfer: averaging restriction, trilinear prolongation of
//! corrections and slope-limited conservative prolongation.

use super::hierarchy::{PatchHierarchy, REFINE_RATIO};
use crate::error::{Error, Result};

/// Coarse donors and weights for linear interpolation to the centre of fine
/// cell `fine` along one axis.
///
/// The fine centre sits a quarter coarse cell from its parent's centre, so the
/// interior weights are 3/4 and 1/4. When the second donor would fall outside
/// a domain of `n_coarse` cells the weights switch to one-sided extrapolation,
/// which keeps linear data exact.
pub(crate) fn linear_weights_1d(fine: i32, n_coarse: i32) -> Vec<(i32, f64)> {
    let parent = fine.div_euclid(REFINE_RATIO);
    if n_coarse == 1 {
        return vec![(parent, 1.0)];
    }
    let other = if fine.rem_euclid(REFINE_RATIO) == 0 {
        parent - 1
    } else {
        parent + 1
    };
    if (0..n_coarse).contains(&other) {
        vec![(parent, 0.75), (other, 0.25)]
    } else {
        vec![(parent, 1.25), (2 * parent - other, -0.25)]
    }
}

#[derive(Clone, Debug)]
pub(crate) struct RestrictEntry {
    pub coarse: u32,
    pub fine: [u32; 8],
}

/// Covered cells of one level and their fine children on the next level.
#[derive(Clone, Debug, Default)]
pub(crate) struct RestrictSchedule {
    pub entries: Vec<RestrictEntry>,
}

impl RestrictSchedule {
    pub fn build(h: &PatchHierarchy, l: usize) -> Self {
        let mut entries = Vec::new();
        if l + 1 >= h.nlevels() {
            return Self { entries };
        }
        let coarse = h.level(l);
        for p in &h.level(l + 1).patches {
            for c in p.bx.coarsen(REFINE_RATIO).cells() {
                let mut fine = [0u32; 8];
                let mut n = 0;
                for dk in 0..2 {
                    for dj in 0..2 {
                        for di in 0..2 {
                            let f = [2 * c[0] + di, 2 * c[1] + dj, 2 * c[2] + dk];
                            fine[n] = p.flat(f) as u32;
                            n += 1;
                        }
                    }
                }
                let coarse_flat = coarse.flat(c).expect("nesting checked at build") as u32;
                entries.push(RestrictEntry {
                    coarse: coarse_flat,
                    fine,
                });
            }
        }
        entries.sort_by_key(|e| e.coarse);
        Self { entries }
    }
}

/// Trilinear donors for every cell of one level from the next coarser level.
#[derive(Clone, Debug, Default)]
pub(crate) struct ProlongSchedule {
    start: Vec<u32>,
    src: Vec<u32>,
    weight: Vec<f64>,
}

impl ProlongSchedule {
    pub fn build(h: &PatchHierarchy, l: usize) -> Result<Self> {
        let mut s = Self::default();
        if l == 0 {
            return Ok(s);
        }
        let coarse = h.level(l - 1);
        let n = coarse.domain_box.extent();
        s.start.push(0);
        for p in &h.level(l).patches {
            for c in p.bx.cells() {
                let wx = linear_weights_1d(c[0], n[0]);
                let wy = linear_weights_1d(c[1], n[1]);
                let wz = linear_weights_1d(c[2], n[2]);
                for &(k, w2) in &wz {
                    for &(j, w1) in &wy {
                        for &(i, w0) in &wx {
                            let src = coarse
                                .flat([i, j, k])
                                .ok_or(Error::MissingDonor { level: l, cell: c })?;
                            s.src.push(src as u32);
                            s.weight.push(w0 * w1 * w2);
                        }
                    }
                }
                s.start.push(s.src.len() as u32);
            }
        }
        Ok(s)
    }
}

/// Sets each covered cell of level `l` to the mean of its children on `l + 1`.
pub fn restrict_level(h: &PatchHierarchy, l: usize, u: &mut [f64]) {
    for e in &h.restrict[l].entries {
        let mut s = 0.0;
        for &f in &e.fine {
            s += u[f as usize];
        }
        u[e.coarse as usize] = 0.125 * s;
    }
}

/// Synchronises covered cells on every level with the finer data above them.
pub fn restrict_all(h: &PatchHierarchy, u: &mut [f64]) {
    for l in (0..h.nlevels().saturating_sub(1)).rev() {
        restrict_level(h, l, u);
    }
}

/// Trilinear interpolation of level `l - 1` values in `u` to every cell of
/// level `l`, added to `out` (`out` and `u` share the flat layout).
pub fn prolong_correction_add(h: &PatchHierarchy, l: usize, u: &[f64], out: &mut [f64]) {
    let s = &h.prolong[l];
    let base = h.level(l).offset;
    for n in 0..h.level(l).ncells {
        let (a, b) = (s.start[n] as usize, s.start[n + 1] as usize);
        let mut v = 0.0;
        for t in a..b {
            v += s.weight[t] * u[s.src[t] as usize];
        }
        out[base + n] += v;
    }
}

/// Overwrites level `l` of `u` with trilinear interpolation of level `l - 1`.
pub fn prolong_correction(h: &PatchHierarchy, l: usize, u: &mut [f64]) {
    let range = h.level(l).range();
    let mut tmp = vec![0.0; h.ncells()];
    prolong_correction_add(h, l, u, &mut tmp);
    u[range.clone()].copy_from_slice(&tmp[range]);
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a > 0.0 {
        a.min(b)
    } else {
        a.max(b)
    }
}

/// Piecewise-linear conservative refinement from level `l - 1` into level `l`.
///
/// Slopes are minmod-limited one-sided differences per axis; a missing
/// neighbour (outside the coarse level) gives a zero slope. Children of each
/// coarse cell average exactly to the coarse value and never leave the range
/// spanned by the coarse cell and its face neighbours. Only cells for which
/// `select(flat)` is true are written.
pub fn prolong_conservative(
    h: &PatchHierarchy,
    l: usize,
    u: &mut [f64],
    select: impl Fn(usize) -> bool,
) {
    assert!(l > 0, "level 0 has no coarser level");
    let coarse = h.level(l - 1);
    for p in &h.level(l).patches {
        for c in p.bx.coarsen(REFINE_RATIO).cells() {
            let parent = coarse.flat(c).expect("nesting checked at build");
            let uc = u[parent];
            let mut slope = [0.0; 3];
            for (a, s) in slope.iter_mut().enumerate() {
                let mut lo = c;
                let mut hi = c;
                lo[a] -= 1;
                hi[a] += 1;
                *s = match (coarse.flat(lo), coarse.flat(hi)) {
                    (Some(lo), Some(hi)) => minmod(u[hi] - uc, uc - u[lo]),
                    _ => 0.0,
                };
            }
            for dk in 0..2 {
                for dj in 0..2 {
                    for di in 0..2 {
                        let f = [2 * c[0] + di, 2 * c[1] + dj, 2 * c[2] + dk];
                        let flat = p.flat(f);
                        if !select(flat) {
                            continue;
                        }
                        let sign = |d: i32| if d == 0 { -0.25 } else { 0.25 };
                        u[flat] =
                            uc + sign(di) * slope[0] + sign(dj) * slope[1] + sign(dk) * slope[2];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, IndexBox};

    fn hierarchy() -> PatchHierarchy {
        let refine = vec![vec![
            IndexBox::new([0, 1, 1], [2, 3, 2]),
            IndexBox::new([3, 1, 1], [4, 4, 4]),
        ]];
        PatchHierarchy::build(Domain::unit_cube(), [6, 6, 6], &refine).unwrap()
    }

    #[test]
    fn restrict_mean_of_children() {
        let refine = vec![vec![IndexBox::new([0, 0, 0], [0, 0, 0])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [2, 2, 2], &refine).unwrap();
        let mut u = vec![0.0; h.ncells()];
        let fine = h.level(1).range();
        for (n, i) in fine.enumerate() {
            u[i] = (n + 1) as f64;
        }
        restrict_all(&h, &mut u);
        assert_eq!(u[h.level(0).flat([0, 0, 0]).unwrap()], 4.5);
    }

    #[test]
    fn restrict_after_prolong_is_identity_on_constants() {
        let h = hierarchy();
        let mut u = vec![0.0; h.ncells()];
        u[h.level(0).range()].fill(2.5);
        prolong_correction(&h, 1, &mut u);
        assert!(u[h.level(1).range()]
            .iter()
            .all(|&v| (v - 2.5).abs() < 1e-15));
        restrict_all(&h, &mut u);
        assert!(u.iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn trilinear_weights_by_hand() {
        let h = hierarchy();
        let mut u: Vec<f64> = (0..h.ncells())
            .map(|i| ((i * 13) % 17) as f64 + 0.5)
            .collect();
        prolong_correction(&h, 1, &mut u);
        // Fine cell (3, 4, 5): x odd -> coarse 1,2; y even -> coarse 2,1; z odd -> coarse 2,3.
        let c = |i, j, k| u[h.level(0).flat([i, j, k]).unwrap()];
        let mut expected = 0.0;
        for (i, wi) in [(1, 0.75), (2, 0.25)] {
            for (j, wj) in [(2, 0.75), (1, 0.25)] {
                for (k, wk) in [(2, 0.75), (3, 0.25)] {
                    expected += wi * wj * wk * c(i, j, k);
                }
            }
        }
        let got = u[h.level(1).flat([3, 4, 5]).unwrap()];
        assert!((got - expected).abs() < 1e-13, "{got} vs {expected}");
    }

    #[test]
    fn conservative_prolong_keeps_spike_positive() {
        let refine = vec![vec![IndexBox::new([1, 1, 1], [4, 4, 4])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [6, 6, 6], &refine).unwrap();
        let mut u = vec![1e-12; h.ncells()];
        u[h.level(0).flat([2, 3, 2]).unwrap()] = 10.0;
        u[h.level(0).flat([3, 3, 2]).unwrap()] = 1e-9;
        prolong_conservative(&h, 1, &mut u, |_| true);
        for i in h.level(1).range() {
            assert!(u[i] >= 0.0, "negative value {}", u[i]);
        }
    }

    #[test]
    fn extrapolating_weights_at_the_boundary() {
        assert_eq!(linear_weights_1d(0, 4), vec![(0, 1.25), (1, -0.25)]);
        assert_eq!(linear_weights_1d(7, 4), vec![(3, 1.25), (2, -0.25)]);
        assert_eq!(linear_weights_1d(3, 4), vec![(1, 0.75), (2, 0.25)]);
        assert_eq!(linear_weights_1d(1, 1), vec![(0, 1.0)]);
    }
}
