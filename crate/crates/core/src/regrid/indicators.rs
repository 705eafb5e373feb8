//! Curvature and gradient error indicators of `E`.

use crate::mesh::{IndexBox, PatchHierarchy, REFINE_RATIO};

/// A field sampled on every cell of one level's domain box.
///
/// Cells the level does not own are interpolated (tensor-product linear,
/// exact for linear fields) from the samples of the next coarser level, so
/// derivatives can be formed anywhere without staircase artefacts.
#[derive(Clone, Debug)]
pub struct DenseLevel {
    pub level: usize,
    pub bx: IndexBox,
    pub spacing: [f64; 3],
    pub values: Vec<f64>,
}

impl DenseLevel {
    #[inline]
    pub fn get(&self, c: [i32; 3]) -> f64 {
        self.values[self.bx.offset(c)]
    }

    /// Linear interpolation of this level at child `f` of the next finer level.
    fn interpolate_child(&self, f: [i32; 3]) -> f64 {
        let n = self.bx.extent();
        let mut axis_terms = [[(0, 0.0); 2]; 3];
        for a in 0..3 {
            let c = f[a].div_euclid(REFINE_RATIO);
            let dir = if f[a].rem_euclid(REFINE_RATIO) == 0 {
                -1
            } else {
                1
            };
            let inside = |i: i32| (0..n[a]).contains(&i);
            axis_terms[a] = if inside(c + dir) {
                [(c, 0.75), (c + dir, 0.25)]
            } else if inside(c - dir) {
                [(c, 1.25), (c - dir, -0.25)]
            } else {
                [(c, 1.0), (c, 0.0)]
            };
        }
        let mut v = 0.0;
        for &(k, wk) in &axis_terms[2] {
            for &(j, wj) in &axis_terms[1] {
                for &(i, wi) in &axis_terms[0] {
                    v += wi * wj * wk * self.get([i, j, k]);
                }
            }
        }
        v
    }
}

/// Dense samples of `u` on levels `0..nlevels`, extending past the finest
/// existing level by interpolation when `nlevels` exceeds it.
pub fn dense_levels(h: &PatchHierarchy, u: &[f64], nlevels: usize) -> Vec<DenseLevel> {
    let mut out: Vec<DenseLevel> = Vec::with_capacity(nlevels);
    let base = h.base_resolution();
    for l in 0..nlevels {
        let scale = REFINE_RATIO.pow(l as u32);
        let bx = IndexBox::from_extent(base.map(|n| n * scale));
        let spacing = [0, 1, 2].map(|a| h.domain.length(a) / bx.extent()[a] as f64);
        let level = (l < h.nlevels()).then(|| h.level(l));
        let values = bx
            .cells()
            .map(|c| match level.and_then(|lv| lv.flat(c)) {
                Some(i) => u[i],
                None => out[l - 1].interpolate_child(c),
            })
            .collect();
        out.push(DenseLevel {
            level: l,
            bx,
            spacing,
            values,
        });
    }
    out
}

/// Per-cell indicators over a level's domain box.
#[derive(Clone, Debug)]
pub struct LevelIndicators {
    pub bx: IndexBox,
    pub tau_c: Vec<f64>,
    pub tau_g: Vec<f64>,
}

/// First and second differences along `axis` at `c`: centred inside the
/// domain, one-sided (still exact for quadratics) at its boundary.
fn differences(d: &DenseLevel, c: [i32; 3], axis: usize) -> (f64, f64) {
    let n = d.bx.extent()[axis];
    let h = d.spacing[axis];
    let at = |o: i32| {
        let mut x = c;
        x[axis] += o;
        d.get(x)
    };
    let i = c[axis];
    if n < 3 {
        if n == 2 {
            let slope = if i == 0 {
                at(1) - at(0)
            } else {
                at(0) - at(-1)
            };
            return (slope / h, 0.0);
        }
        return (0.0, 0.0);
    }
    if i == 0 {
        (
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h),
            (at(0) - 2.0 * at(1) + at(2)) / (h * h),
        )
    } else if i == n - 1 {
        (
            (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h),
            (at(0) - 2.0 * at(-1) + at(-2)) / (h * h),
        )
    } else {
        (
            (at(1) - at(-1)) / (2.0 * h),
            (at(1) - 2.0 * at(0) + at(-1)) / (h * h),
        )
    }
}

/// `tau_c = sum_a h_a^2 |E_aa| / (0.1 max|E|)` and
/// `tau_g = sum_a h_a |E_a| / (0.1 max|E|)` on every cell of the dense level.
///
/// `max_abs` is the normalising maximum of `|E|`.
pub fn compute_indicators(d: &DenseLevel, max_abs: f64) -> LevelIndicators {
    let n = d.bx.volume();
    let mut tau_c = vec![0.0; n];
    let mut tau_g = vec![0.0; n];
    let scale = 0.1 * max_abs;
    if scale > 0.0 {
        for (k, c) in d.bx.cells().enumerate() {
            let (mut sc, mut sg) = (0.0, 0.0);
            for a in 0..3 {
                let (first, second) = differences(d, c, a);
                let h = d.spacing[a];
                sc += h * h * second.abs();
                sg += h * first.abs();
            }
            tau_c[k] = sc / scale;
            tau_g[k] = sg / scale;
        }
    }
    LevelIndicators {
        bx: d.bx,
        tau_c,
        tau_g,
    }
}

/// Largest `|E|` over the valid cells of level `l` of `h`, or over the dense
/// samples when the level does not exist (or is entirely covered).
pub fn level_max_abs(h: &PatchHierarchy, e: &[f64], d: &DenseLevel) -> f64 {
    if d.level < h.nlevels() {
        let valid = h.valid();
        let m = h
            .level(d.level)
            .range()
            .filter(|&i| valid[i])
            .map(|i| e[i].abs())
            .fold(0.0, f64::max);
        if m > 0.0 {
            return m;
        }
    }
    d.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    fn dense_of(n: i32, f: impl Fn([f64; 3]) -> f64) -> (PatchHierarchy, DenseLevel) {
        let h = PatchHierarchy::uniform(Domain::unit_cube(), [n, n, n]).unwrap();
        let u = h.sample(f);
        let d = dense_levels(&h, &u, 1).remove(0);
        (h, d)
    }

    #[test]
    fn constant_field_has_zero_indicators() {
        let (_, d) = dense_of(6, |_| 3.0);
        let ind = compute_indicators(&d, 3.0);
        assert!(ind.tau_c.iter().chain(&ind.tau_g).all(|&v| v == 0.0));
    }

    #[test]
    fn linear_field() {
        let (h, d) = dense_of(8, |x| x[0]);
        let e = h.sample(|x| x[0]);
        let m = level_max_abs(&h, &e, &d);
        let ind = compute_indicators(&d, m);
        let hx = 1.0 / 8.0;
        for k in 0..ind.tau_g.len() {
            assert!(ind.tau_c[k].abs() < 1e-10);
            assert!((ind.tau_g[k] - hx / (0.1 * m)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_field() {
        let (h, d) = dense_of(8, |x| x[0] * x[0]);
        let e = h.sample(|x| x[0] * x[0]);
        let m = level_max_abs(&h, &e, &d);
        let ind = compute_indicators(&d, m);
        let hx: f64 = 1.0 / 8.0;
        for k in 0..ind.tau_c.len() {
            assert!((ind.tau_c[k] - hx * hx * 2.0 / (0.1 * m)).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_levels_fill_missing_cells_linearly() {
        let refine = vec![vec![IndexBox::new([0, 0, 0], [1, 1, 1])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [4, 4, 4], &refine).unwrap();
        let f = |x: [f64; 3]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2];
        let u = h.sample(f);
        let d = dense_levels(&h, &u, 3);
        assert_eq!(d[1].get([0, 0, 0]), u[h.level(1).flat([0, 0, 0]).unwrap()]);
        for dl in &d[1..] {
            for c in dl.bx.cells() {
                let x = [0, 1, 2].map(|a| (c[a] as f64 + 0.5) * dl.spacing[a]);
                assert!((dl.get(c) - f(x)).abs() < 1e-12);
            }
        }
    }
}
